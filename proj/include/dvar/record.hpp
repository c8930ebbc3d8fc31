#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dvar/config.hpp"
#include "dvar/criteria.hpp"
#include "dvar/linalg.hpp"

namespace dvar::harness {

struct StepRow {
    std::int64_t step = 0;
    double train_loss = 0.0;
    double det_loss = 0.0;
    double grad_norm = 0.0;
    std::optional<double> ratio;  // active criterion's diagnostic
    std::optional<double> score;
};

struct WallTimes {
    double setup_seconds = 0.0;
    double train_seconds = 0.0;
    double det_eval_seconds = 0.0;
    double score_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Complete account of one training run; enough to re-materialize the world,
/// replay the stopping decision, and audit every per-step metric.
struct RunRecord {
    RunConfig config;
    std::vector<StepRow> rows;
    std::int64_t stop_step = 0;
    std::string stop_reason;  // "criterion" | "budget" | "invalid"
    Vec final_embedding;
    std::optional<std::int64_t> best_step;  // checkpoint selection (baseline protocol)
    std::optional<double> best_score;
    WallTimes wall;
    bool valid = true;
    std::string error;

    /// det-loss column as a replayable trace.
    criteria::LossTrace det_trace() const;
    criteria::LossTrace train_trace() const;
    criteria::LossTrace grad_norm_trace() const;
};

/// Writes run.json, steps.jsonl, and summary.csv into `dir` (created if
/// missing). steps.jsonl bytes are a pure function of the run's metrics; all
/// floats carry 17 significant digits.
void write_run_record(const RunRecord& record, const std::string& dir);

std::vector<StepRow> load_steps_jsonl(const std::string& path);

/// Reads the config echo back out of a run.json.
RunConfig load_record_config(const std::string& path);

std::string format_float(double value);  // %.17g

}  // namespace dvar::harness
