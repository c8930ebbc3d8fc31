#pragma once

#include <cstdint>
#include <string>

#include "dvar/criteria.hpp"
#include "dvar/diffusion.hpp"
#include "dvar/optim.hpp"
#include "dvar/toymodel.hpp"

namespace dvar::harness {

/// Which recorded stream feeds the stopping criterion.
enum class StopSignal { det_loss, train_loss, score };

std::string stop_signal_name(StopSignal signal);
StopSignal stop_signal_from_name(const std::string& name);

struct StopperConfig {
    criteria::CriterionConfig criterion = criteria::DvarConfig{};
    StopSignal signal = StopSignal::det_loss;
};

/// Default training optimizer: AdamW with enough decoupled weight decay to
/// keep the embedding from random-walking along loss-flat directions once
/// the objective has converged.
optim::OptimizerConfig default_train_optimizer();

struct RunSettings {
    std::size_t max_steps = 5000;
    std::size_t train_batch = 4;
    std::size_t eval_batch = 4;
    std::size_t score_every = 50;
    toy::ScoreKind score_kind = toy::ScoreKind::sample_similarity;
    toy::InitStrategy init;
    diffusion::FixedMask fixed;
};

/// Everything needed to reproduce a run bit-exactly.
struct RunConfig {
    int schema = 1;
    std::uint64_t seed = 0;
    toy::WorldConfig world;
    optim::OptimizerConfig optimizer = default_train_optimizer();
    StopperConfig stopper;
    RunSettings run;
};

/// Parses a config JSON document; missing fields take defaults, unknown or
/// ill-typed fields raise ConfigError naming the field.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

/// Deterministic JSON serialization (stable key order, 17 significant digits
/// for floats). parse_run_config(serialize_run_config(c)) reproduces c.
std::string serialize_run_config(const RunConfig& config);

/// FNV-1a hash of the serialized config; keys run output directories.
std::uint64_t config_hash(const RunConfig& config);

/// Applies a `dotted.path=value` override to a config JSON document.
std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides);

}  // namespace dvar::harness
