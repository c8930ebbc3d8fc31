#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace dvar::criteria {

/// Outcome of feeding one observation to a stopping criterion.
/// `diagnostic` is the criterion's statistic (e.g. the variance ratio) when
/// it is defined at this point of the stream.
struct Decision {
    bool stop = false;
    std::optional<double> diagnostic;
};

/// A recorded scalar sequence indexed by strictly increasing step numbers.
/// Construction validates the invariants; downstream code may assume them.
class LossTrace {
public:
    LossTrace() = default;
    LossTrace(std::vector<std::int64_t> steps, std::vector<double> values);

    void append(std::int64_t step, double value);

    std::size_t size() const { return steps_.size(); }
    bool empty() const { return steps_.empty(); }
    const std::vector<std::int64_t>& steps() const { return steps_; }
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<std::int64_t> steps_;
    std::vector<double> values_;
};

/// Reads a trace from CSV with header `step,value`. Malformed rows raise
/// TraceParseError naming the line.
LossTrace load_trace_csv(const std::string& path);
void save_trace_csv(const LossTrace& trace, const std::string& path);

// ---------------------------------------------------------------------------
// Criterion configurations
// ---------------------------------------------------------------------------

struct DvarConfig {
    std::size_t window = 282;    // rolling window size N
    double threshold = 0.39;     // stop when rolling/global variance ratio drops below
    std::size_t warmup = 0;      // extra observations required beyond the window
};

struct EmaConfig {
    double smoothing = 0.1;      // EMA update weight for the newest value
    std::size_t lag = 282;       // compare EMA(t) against EMA(t - lag)
    double threshold = 0.01;
    bool use_absolute = true;    // stop on |statistic| rather than the signed value
};

struct HallConfig {
    std::size_t window = 282;
    double threshold = 0.05;
};

struct TrendConfig {
    std::size_t window = 282;
    double threshold = 1e-4;
    bool use_absolute = true;
};

struct PatienceConfig {
    double min_delta = 0.05;       // required improvement per evaluation
    std::size_t patience = 5;      // consecutive non-improving evaluations before stop
    std::size_t eval_every = 50;   // evaluation cadence in steps (enforced by the caller)
    bool against_best = true;      // measure improvement vs best score (false: vs previous)
};

struct FixedItersConfig {
    std::int64_t budget = 5000;
};

using CriterionConfig = std::variant<DvarConfig, EmaConfig, HallConfig, TrendConfig,
                                     PatienceConfig, FixedItersConfig>;

std::string criterion_name(const CriterionConfig& config);

// ---------------------------------------------------------------------------
// Streaming criteria
// ---------------------------------------------------------------------------

/// Stops when the rolling variance of the last `window` values falls below
/// `threshold` times the variance of the whole observed stream. Maintains a
/// ring buffer for the window and a Welford accumulator for the global
/// moments; both variances use the population convention (divide by count).
class DvarCriterion {
public:
    explicit DvarCriterion(const DvarConfig& config);

    Decision observe(double loss);

    std::size_t count() const { return count_; }
    double global_variance() const;
    double rolling_variance() const;
    std::optional<double> last_ratio() const { return last_ratio_; }

    // A global variance at or below this carries no convergence signal; the
    // ratio is left undefined instead of dividing by ~zero.
    static constexpr double variance_epsilon = 1e-30;

private:
    DvarConfig config_;
    std::vector<double> ring_;
    std::size_t ring_head_ = 0;
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    std::optional<double> last_ratio_;
};

/// Relative change of the exponential moving average over a fixed lag:
/// (EMA(t) - EMA(t-lag)) / EMA(t-lag). Undefined while fewer than lag+1 EMA
/// values exist or when the lagged EMA is zero.
class EmaPercentileCriterion {
public:
    explicit EmaPercentileCriterion(const EmaConfig& config);

    Decision observe(double loss);

private:
    EmaConfig config_;
    std::deque<double> history_;  // last lag+1 EMA values
    bool seeded_ = false;
    double ema_ = 0.0;
};

/// (max - min) / mean over the last `window` values.
class HallCriterion {
public:
    explicit HallCriterion(const HallConfig& config);

    Decision observe(double loss);

private:
    HallConfig config_;
    std::deque<double> window_;
};

/// Least-squares slope of the last `window` values against positions
/// 0..window-1, maintained incrementally as the window slides.
class TrendCriterion {
public:
    explicit TrendCriterion(const TrendConfig& config);

    Decision observe(double loss);

private:
    TrendConfig config_;
    std::deque<double> window_;
    double sum_y_ = 0.0;
    double sum_xy_ = 0.0;
};

/// Counts evaluations without sufficient improvement of a score and stops
/// once `patience` of them happen in a row. Call once per evaluation event.
class PatienceCriterion {
public:
    explicit PatienceCriterion(const PatienceConfig& config);

    Decision observe(double score);

    std::size_t evals_since_improvement() const { return evals_since_improvement_; }
    std::optional<double> best_score() const { return best_score_; }

private:
    PatienceConfig config_;
    std::optional<double> best_score_;
    std::optional<double> last_score_;
    std::size_t evals_since_improvement_ = 0;
};

/// Stops once the observed step reaches a fixed budget.
class FixedItersCriterion {
public:
    explicit FixedItersCriterion(const FixedItersConfig& config);

    Decision observe(std::int64_t step);

private:
    FixedItersConfig config_;
};

// ---------------------------------------------------------------------------
// Uniform dispatch and replay
// ---------------------------------------------------------------------------

/// Type-erased stopping rule over (step, value) observations, covering both
/// value-driven criteria and the step-driven fixed budget.
class StopRule {
public:
    explicit StopRule(const CriterionConfig& config);

    Decision observe(std::int64_t step, double value);

private:
    using Impl = std::variant<DvarCriterion, EmaPercentileCriterion, HallCriterion,
                              TrendCriterion, PatienceCriterion, FixedItersCriterion>;
    static Impl build(const CriterionConfig& config);

    Impl impl_;
};

/// Applies a criterion to a recorded trace and returns the step of the first
/// stop decision, or nullopt if it never fires. Pure function of its inputs.
std::optional<std::int64_t> replay(const LossTrace& trace, const CriterionConfig& config);

}  // namespace dvar::criteria
