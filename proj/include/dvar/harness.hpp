#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dvar/config.hpp"
#include "dvar/record.hpp"

namespace dvar::harness {

/// Runs the training loop: each step draws a fresh fully stochastic training
/// batch, takes one optimizer step, evaluates the stored evaluation batch,
/// feeds the configured stopper, and scores on cadence. Every random draw
/// comes from a named stream derived from config.seed, so the record is a
/// pure function of the config.
RunRecord run_inversion(const RunConfig& config);

/// Fixed-budget protocol with periodic sampling: scores every `score_every`
/// steps (default 500) with the observational scorer and returns the
/// best-scoring checkpoint's embedding.
RunRecord run_baseline_original(RunConfig config);

/// Patience-on-score protocol: observational score every eval_every steps,
/// stop after `patience` evaluations without improvement beyond min_delta.
RunRecord run_clip_s(RunConfig config);

/// Fixed iteration budget, no intermediate scoring.
RunRecord run_few_iters(RunConfig config, std::int64_t budget);

struct FewItersBudgets {
    std::int64_t max = 0;
    std::int64_t mean = 0;  // arithmetic mean rounded to nearest integer
};

/// Budgets derived from a collection of adaptive stop steps.
FewItersBudgets compute_few_iters(const std::vector<std::int64_t>& stop_steps);

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct AblationCell {
    std::string factor;  // "none" for the fully fixed reference
    std::size_t eval_batch = 0;
    std::uint64_t seed = 0;
    double trend_amplitude = 0.0;  // range of the smoothed eval-loss trace
    double noise_amplitude = 0.0;  // stddev of the residual around the smoothed trace
    std::optional<std::int64_t> stop_step;  // criterion replayed on the eval trace
    RunRecord record;
};

struct AblationReport {
    std::vector<AblationCell> cells;
};

/// For each (factor, batch size): train normally but evaluate a batch-size
/// sized evaluation batch with exactly that factor resampled every step.
/// The run's criterion is replayed offline on the recorded eval trace.
AblationReport ablate_randomness(const RunConfig& base,
                                 const std::vector<std::string>& factors,
                                 const std::vector<std::size_t>& eval_batch_sizes);

struct SweepCell {
    std::size_t train_batch = 0;
    std::uint64_t seed = 0;
    std::size_t grad_evals_per_step = 0;
    double eval_ratio_vs_smallest = 0.0;  // gradient-evaluation cost relative to smallest size
    std::optional<std::int64_t> dvar_on_train_stop;
    RunRecord record;
};

struct SweepReport {
    std::vector<SweepCell> cells;
};

/// Full-budget runs across training batch sizes, recording train-loss and
/// grad-norm dynamics plus per-step gradient cost accounting.
SweepReport sweep_train_batch(const RunConfig& base, const std::vector<std::size_t>& sizes);

struct CompareRow {
    std::string criterion;
    std::optional<std::int64_t> stop_step;
    std::optional<double> diagnostic;  // at the stop step, or the last defined value
};

/// Replays each criterion over the same trace.
std::vector<CompareRow> compare_criteria(const criteria::LossTrace& trace,
                                         const std::vector<criteria::CriterionConfig>& configs);

/// DVAR, EMA, Hall, Trend with defaults plus a fixed budget.
std::vector<criteria::CriterionConfig> default_comparison_set(std::int64_t budget);

/// Smoothed-range / residual-spread summary used by the ablation report.
void summarize_trace(const std::vector<double>& values, double& trend_amplitude,
                     double& noise_amplitude);

}  // namespace dvar::harness
