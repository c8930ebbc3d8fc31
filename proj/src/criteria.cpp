#include "dvar/criteria.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <type_traits>

#include "dvar/common.hpp"

namespace dvar::criteria {

namespace {

void require_finite(double value, const char* what) {
    if (!std::isfinite(value)) {
        throw InputError(std::string(what) + " must be finite");
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// LossTrace
// ---------------------------------------------------------------------------

LossTrace::LossTrace(std::vector<std::int64_t> steps, std::vector<double> values) {
    if (steps.size() != values.size()) {
        throw InputError("trace steps and values differ in length");
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        append(steps[i], values[i]);
    }
}

void LossTrace::append(std::int64_t step, double value) {
    if (step < 0) {
        throw InputError("trace step must be nonnegative");
    }
    if (!steps_.empty() && step <= steps_.back()) {
        throw InputError("trace steps must be strictly increasing");
    }
    require_finite(value, "trace value");
    steps_.push_back(step);
    values_.push_back(value);
}

LossTrace load_trace_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open trace file: " + path);
    }
    std::string line;
    std::size_t line_number = 0;
    LossTrace trace;
    while (std::getline(in, line)) {
        ++line_number;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_number == 1) {
            if (line != "step,value") {
                throw TraceParseError("expected header 'step,value', got '" + line + "'",
                                      line_number);
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw TraceParseError("missing comma in trace row", line_number);
        }
        try {
            std::size_t used = 0;
            const std::string step_text = line.substr(0, comma);
            const std::string value_text = line.substr(comma + 1);
            const long long step = std::stoll(step_text, &used);
            if (used != step_text.size()) {
                throw std::invalid_argument("trailing characters");
            }
            const double value = std::stod(value_text, &used);
            if (used != value_text.size()) {
                throw std::invalid_argument("trailing characters");
            }
            trace.append(step, value);
        } catch (const TraceParseError&) {
            throw;
        } catch (const std::exception& e) {
            throw TraceParseError(std::string("bad trace row: ") + e.what(), line_number);
        }
    }
    return trace;
}

void save_trace_csv(const LossTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write trace file: " + path);
    }
    out << "step,value\n";
    char buf[64];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", trace.values()[i]);
        out << trace.steps()[i] << ',' << buf << '\n';
    }
}

std::string criterion_name(const CriterionConfig& config) {
    struct Visitor {
        std::string operator()(const DvarConfig&) const { return "dvar"; }
        std::string operator()(const EmaConfig&) const { return "ema"; }
        std::string operator()(const HallConfig&) const { return "hall"; }
        std::string operator()(const TrendConfig&) const { return "trend"; }
        std::string operator()(const PatienceConfig&) const { return "patience"; }
        std::string operator()(const FixedItersConfig&) const { return "fixed_iters"; }
    };
    return std::visit(Visitor{}, config);
}

// ---------------------------------------------------------------------------
// DVAR
// ---------------------------------------------------------------------------

DvarCriterion::DvarCriterion(const DvarConfig& config) : config_(config) {
    if (config_.window == 0) {
        throw ConfigError("dvar window must be positive");
    }
    if (!(config_.threshold > 0.0 && config_.threshold < 1.0)) {
        throw ConfigError("dvar threshold must lie in (0, 1)");
    }
    ring_.reserve(config_.window);
}

Decision DvarCriterion::observe(double loss) {
    require_finite(loss, "loss");
    if (ring_.size() < config_.window) {
        ring_.push_back(loss);
    } else {
        ring_[ring_head_] = loss;
        ring_head_ = (ring_head_ + 1) % config_.window;
    }
    ++count_;
    const double delta = loss - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (loss - mean_);

    last_ratio_.reset();
    Decision decision;
    if (count_ < config_.window + config_.warmup) {
        return decision;
    }
    const double total_var = global_variance();
    if (total_var <= variance_epsilon) {
        return decision;
    }
    const double ratio = rolling_variance() / total_var;
    last_ratio_ = ratio;
    decision.diagnostic = ratio;
    decision.stop = ratio < config_.threshold;
    return decision;
}

double DvarCriterion::global_variance() const {
    if (count_ == 0) {
        return 0.0;
    }
    return m2_ / static_cast<double>(count_);
}

double DvarCriterion::rolling_variance() const {
    // One Welford pass over the retained window; N is small, so recomputing
    // keeps the window variance as accurate as the global accumulator.
    if (ring_.empty()) {
        return 0.0;
    }
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (const double x : ring_) {
        ++n;
        const double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    return m2 / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// EMA percentile
// ---------------------------------------------------------------------------

EmaPercentileCriterion::EmaPercentileCriterion(const EmaConfig& config) : config_(config) {
    if (!(config_.smoothing > 0.0 && config_.smoothing <= 1.0)) {
        throw ConfigError("ema smoothing must lie in (0, 1]");
    }
    if (config_.lag == 0) {
        throw ConfigError("ema lag must be positive");
    }
}

Decision EmaPercentileCriterion::observe(double loss) {
    require_finite(loss, "loss");
    if (!seeded_) {
        ema_ = loss;
        seeded_ = true;
    } else {
        ema_ = config_.smoothing * loss + (1.0 - config_.smoothing) * ema_;
    }
    history_.push_back(ema_);
    if (history_.size() > config_.lag + 1) {
        history_.pop_front();
    }

    Decision decision;
    if (history_.size() < config_.lag + 1) {
        return decision;
    }
    const double lagged = history_.front();
    if (lagged == 0.0) {
        return decision;
    }
    const double statistic = (ema_ - lagged) / lagged;
    decision.diagnostic = statistic;
    const double tested = config_.use_absolute ? std::fabs(statistic) : statistic;
    decision.stop = tested < config_.threshold;
    return decision;
}

// ---------------------------------------------------------------------------
// Hall
// ---------------------------------------------------------------------------

HallCriterion::HallCriterion(const HallConfig& config) : config_(config) {
    if (config_.window == 0) {
        throw ConfigError("hall window must be positive");
    }
}

Decision HallCriterion::observe(double loss) {
    require_finite(loss, "loss");
    window_.push_back(loss);
    if (window_.size() > config_.window) {
        window_.pop_front();
    }

    Decision decision;
    if (window_.size() < config_.window) {
        return decision;
    }
    double lo = window_.front();
    double hi = window_.front();
    double sum = 0.0;
    for (const double x : window_) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        sum += x;
    }
    const double mean = sum / static_cast<double>(window_.size());
    if (mean == 0.0) {
        return decision;
    }
    const double statistic = (hi - lo) / mean;
    decision.diagnostic = statistic;
    decision.stop = statistic < config_.threshold;
    return decision;
}

// ---------------------------------------------------------------------------
// Trend
// ---------------------------------------------------------------------------

TrendCriterion::TrendCriterion(const TrendConfig& config) : config_(config) {
    if (config_.window < 2) {
        throw ConfigError("trend window must be at least 2");
    }
}

Decision TrendCriterion::observe(double loss) {
    require_finite(loss, "loss");
    if (window_.size() == config_.window) {
        // Sliding the window shifts every position down by one:
        // sum_xy loses one copy of each retained value plus the evicted y at x=0.
        const double evicted = window_.front();
        window_.pop_front();
        sum_xy_ -= sum_y_ - evicted;
        sum_y_ -= evicted;
    }
    sum_xy_ += static_cast<double>(window_.size()) * loss;
    sum_y_ += loss;
    window_.push_back(loss);

    Decision decision;
    if (window_.size() < config_.window) {
        return decision;
    }
    const double n = static_cast<double>(config_.window);
    const double sum_x = n * (n - 1.0) / 2.0;
    const double sum_xx = (n - 1.0) * n * (2.0 * n - 1.0) / 6.0;
    const double slope = (n * sum_xy_ - sum_x * sum_y_) / (n * sum_xx - sum_x * sum_x);
    decision.diagnostic = slope;
    const double tested = config_.use_absolute ? std::fabs(slope) : slope;
    decision.stop = tested < config_.threshold;
    return decision;
}

// ---------------------------------------------------------------------------
// Patience
// ---------------------------------------------------------------------------

PatienceCriterion::PatienceCriterion(const PatienceConfig& config) : config_(config) {
    if (config_.patience == 0) {
        throw ConfigError("patience must be positive");
    }
    if (config_.eval_every == 0) {
        throw ConfigError("patience eval_every must be positive");
    }
}

Decision PatienceCriterion::observe(double score) {
    require_finite(score, "score");
    Decision decision;
    if (!best_score_.has_value()) {
        best_score_ = score;
        last_score_ = score;
        decision.diagnostic = 0.0;
        return decision;
    }
    const double reference = config_.against_best ? *best_score_ : *last_score_;
    if (score - reference > config_.min_delta) {
        evals_since_improvement_ = 0;
        best_score_ = std::max(*best_score_, score);
    } else {
        ++evals_since_improvement_;
    }
    last_score_ = score;
    decision.diagnostic = static_cast<double>(evals_since_improvement_);
    decision.stop = evals_since_improvement_ >= config_.patience;
    return decision;
}

// ---------------------------------------------------------------------------
// Fixed iterations
// ---------------------------------------------------------------------------

FixedItersCriterion::FixedItersCriterion(const FixedItersConfig& config) : config_(config) {
    if (config_.budget < 1) {
        throw ConfigError("fixed_iters budget must be at least 1");
    }
}

Decision FixedItersCriterion::observe(std::int64_t step) {
    Decision decision;
    decision.diagnostic = static_cast<double>(step);
    decision.stop = step >= config_.budget;
    return decision;
}

// ---------------------------------------------------------------------------
// StopRule and replay
// ---------------------------------------------------------------------------

StopRule::Impl StopRule::build(const CriterionConfig& config) {
    return std::visit(
        [](const auto& c) -> Impl {
            using C = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<C, DvarConfig>) {
                return DvarCriterion(c);
            } else if constexpr (std::is_same_v<C, EmaConfig>) {
                return EmaPercentileCriterion(c);
            } else if constexpr (std::is_same_v<C, HallConfig>) {
                return HallCriterion(c);
            } else if constexpr (std::is_same_v<C, TrendConfig>) {
                return TrendCriterion(c);
            } else if constexpr (std::is_same_v<C, PatienceConfig>) {
                return PatienceCriterion(c);
            } else {
                return FixedItersCriterion(c);
            }
        },
        config);
}

StopRule::StopRule(const CriterionConfig& config) : impl_(build(config)) {}

Decision StopRule::observe(std::int64_t step, double value) {
    return std::visit(
        [step, value](auto& c) -> Decision {
            using C = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<C, FixedItersCriterion>) {
                return c.observe(step);
            } else {
                return c.observe(value);
            }
        },
        impl_);
}

std::optional<std::int64_t> replay(const LossTrace& trace, const CriterionConfig& config) {
    StopRule rule(config);
    for (std::size_t i = 0; i < trace.size(); ++i) {
        if (rule.observe(trace.steps()[i], trace.values()[i]).stop) {
            return trace.steps()[i];
        }
    }
    return std::nullopt;
}

}  // namespace dvar::criteria
