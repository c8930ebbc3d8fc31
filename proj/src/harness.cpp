#include "dvar/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dvar/common.hpp"
#include "dvar/objective.hpp"
#include "dvar/optim.hpp"
#include "dvar/series.hpp"

namespace dvar::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Checkpoint {
    std::int64_t step;
    double score;
    Vec embedding;
};

// Core loop shared by all protocols. When `checkpoints` is non-null the
// embedding is snapshotted at every scored step.
RunRecord run_core(const RunConfig& config, std::vector<Checkpoint>* checkpoints) {
    const auto run_start = Clock::now();
    RunRecord record;
    record.config = config;

    auto phase_start = Clock::now();
    const toy::FrozenWorld world =
        toy::build_world(config.world, derive_seed(config.seed, "world"));
    const toy::Scorer scorer(world, config.run.score_kind);
    RngStream init_rng(derive_seed(config.seed, "init"));
    Vec embedding = toy::select_init(world, config.run.init, scorer, init_rng);

    RngStream batch_rng(derive_seed(config.seed, "evalbatch"));
    const diffusion::EvalBatch eval_batch =
        objective::make_eval_batch(world, config.run.eval_batch, config.run.fixed, batch_rng);
    RngStream train_rng(derive_seed(config.seed, "train"));
    RngStream eval_rng(derive_seed(config.seed, "eval"));

    auto optimizer = optim::make_optimizer(config.optimizer);
    criteria::StopRule stopper(config.stopper.criterion);
    const diffusion::FixedMask fresh_batch_mask;  // all fixed: read the new sample verbatim
    record.wall.setup_seconds += seconds_since(phase_start);

    bool stopped = false;
    try {
        for (std::size_t step = 1; step <= config.run.max_steps; ++step) {
            StepRow row;
            row.step = static_cast<std::int64_t>(step);

            phase_start = Clock::now();
            const diffusion::EvalBatch train_batch = objective::make_eval_batch(
                world, config.run.train_batch, fresh_batch_mask, train_rng);
            const diffusion::ResolvedBatch resolved =
                objective::resolve_batch(world, train_batch, embedding, nullptr);
            bool first_eval = true;
            const optim::GradFn grad_fn = [&](const Vec& point) {
                objective::LossGrad lg = objective::loss_and_gradient(world, resolved, point);
                if (first_eval) {
                    row.train_loss = lg.loss;
                    row.grad_norm = norm(lg.grad);
                    first_eval = false;
                }
                return lg.grad;
            };
            embedding = optimizer->step(embedding, grad_fn);
            record.wall.train_seconds += seconds_since(phase_start);

            phase_start = Clock::now();
            row.det_loss = objective::det_loss(world, eval_batch, embedding, &eval_rng);
            criteria::Decision decision;
            switch (config.stopper.signal) {
                case StopSignal::det_loss:
                    decision = stopper.observe(row.step, row.det_loss);
                    break;
                case StopSignal::train_loss:
                    decision = stopper.observe(row.step, row.train_loss);
                    break;
                case StopSignal::score:
                    break;  // fed below, on scoring steps only
            }
            record.wall.det_eval_seconds += seconds_since(phase_start);

            const bool scoring_step =
                config.run.score_every > 0 && step % config.run.score_every == 0;
            if (scoring_step) {
                phase_start = Clock::now();
                row.score = scorer(world, embedding);
                if (config.stopper.signal == StopSignal::score) {
                    decision = stopper.observe(row.step, *row.score);
                }
                if (checkpoints != nullptr) {
                    checkpoints->push_back({row.step, *row.score, embedding});
                }
                record.wall.score_seconds += seconds_since(phase_start);
            }

            row.ratio = decision.diagnostic;
            record.rows.push_back(row);
            if (decision.stop) {
                record.stop_step = row.step;
                record.stop_reason = "criterion";
                stopped = true;
                break;
            }
        }
    } catch (const InputError& e) {
        record.valid = false;
        record.error = e.what();
        record.stop_reason = "invalid";
        record.stop_step = record.rows.empty() ? 0 : record.rows.back().step;
        record.final_embedding = embedding;
        record.wall.total_seconds = seconds_since(run_start);
        return record;
    }

    if (!stopped) {
        record.stop_step = record.rows.empty() ? 0 : record.rows.back().step;
        record.stop_reason = "budget";
    }
    if (!record.rows.empty() && !record.rows.back().score.has_value()) {
        phase_start = Clock::now();
        record.rows.back().score = scorer(world, embedding);
        record.wall.score_seconds += seconds_since(phase_start);
    }
    record.final_embedding = embedding;
    record.wall.total_seconds = seconds_since(run_start);
    return record;
}

}  // namespace

RunRecord run_inversion(const RunConfig& config) {
    return run_core(config, nullptr);
}

RunRecord run_baseline_original(RunConfig config) {
    // Fixed budget; the stopper never fires before it.
    config.stopper.criterion =
        criteria::FixedItersConfig{static_cast<std::int64_t>(config.run.max_steps)};
    config.stopper.signal = StopSignal::det_loss;
    config.run.score_kind = toy::ScoreKind::sample_similarity;
    if (config.run.score_every == 0) {
        config.run.score_every = 500;
    }
    std::vector<Checkpoint> checkpoints;
    RunRecord record = run_core(config, &checkpoints);
    if (!record.valid || checkpoints.empty()) {
        return record;
    }
    const Checkpoint* best = &checkpoints.front();
    for (const Checkpoint& cp : checkpoints) {
        if (cp.score > best->score) {
            best = &cp;
        }
    }
    record.best_step = best->step;
    record.best_score = best->score;
    record.final_embedding = best->embedding;
    return record;
}

RunRecord run_clip_s(RunConfig config) {
    criteria::PatienceConfig patience;
    if (const auto* existing =
            std::get_if<criteria::PatienceConfig>(&config.stopper.criterion)) {
        patience = *existing;
    } else {
        // Toy-scale defaults: the published min_delta of 0.05 is on CLIP-score
        // units; the surrogate score has a narrower dynamic range.
        patience.min_delta = 0.005;
        patience.patience = 5;
        patience.eval_every = 50;
    }
    config.stopper.criterion = patience;
    config.stopper.signal = StopSignal::score;
    config.run.score_kind = toy::ScoreKind::sample_similarity;
    config.run.score_every = patience.eval_every;
    return run_core(config, nullptr);
}

RunRecord run_few_iters(RunConfig config, std::int64_t budget) {
    if (budget < 1) {
        throw ConfigError("few_iters budget must be at least 1");
    }
    config.stopper.criterion = criteria::FixedItersConfig{budget};
    config.stopper.signal = StopSignal::det_loss;
    config.run.max_steps =
        std::max(config.run.max_steps, static_cast<std::size_t>(budget));
    config.run.score_every = 0;  // no intermediate sampling in this protocol
    return run_core(config, nullptr);
}

FewItersBudgets compute_few_iters(const std::vector<std::int64_t>& stop_steps) {
    if (stop_steps.empty()) {
        throw ConfigError("compute_few_iters needs at least one stop step");
    }
    FewItersBudgets budgets;
    double sum = 0.0;
    budgets.max = stop_steps.front();
    for (const std::int64_t s : stop_steps) {
        budgets.max = std::max(budgets.max, s);
        sum += static_cast<double>(s);
    }
    budgets.mean = std::llround(sum / static_cast<double>(stop_steps.size()));
    return budgets;
}

void summarize_trace(const std::vector<double>& values, double& trend_amplitude,
                     double& noise_amplitude) {
    if (values.empty()) {
        trend_amplitude = 0.0;
        noise_amplitude = 0.0;
        return;
    }
    const std::vector<double> smoothed = series::centered_moving_average(values, 101);
    const auto [lo, hi] = std::minmax_element(smoothed.begin(), smoothed.end());
    trend_amplitude = *hi - *lo;
    std::vector<double> residual(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        residual[i] = values[i] - smoothed[i];
    }
    noise_amplitude = series::stddev(residual);
}

AblationReport ablate_randomness(const RunConfig& base, const std::vector<std::string>& factors,
                                 const std::vector<std::size_t>& eval_batch_sizes) {
    std::vector<std::string> factor_list = factors;
    if (factor_list.empty()) {
        factor_list.push_back("none");
    }
    AblationReport report;
    for (const std::string& factor : factor_list) {
        diffusion::FixedMask mask;  // everything fixed
        if (factor != "none") {
            mask.flag(diffusion::factor_from_name(factor)) = false;
        }
        for (const std::size_t batch_size : eval_batch_sizes) {
            RunConfig config = base;
            config.run.fixed = mask;
            config.run.eval_batch = batch_size;
            // Run the full budget and replay the criterion offline, so the
            // recorded trace covers the whole run even when it fires early.
            const criteria::CriterionConfig criterion = config.stopper.criterion;
            config.stopper.criterion =
                criteria::FixedItersConfig{static_cast<std::int64_t>(config.run.max_steps)};
            config.stopper.signal = StopSignal::det_loss;

            AblationCell cell;
            cell.factor = factor;
            cell.eval_batch = batch_size;
            cell.seed = config.seed;
            cell.record = run_inversion(config);
            const criteria::LossTrace trace = cell.record.det_trace();
            summarize_trace(trace.values(), cell.trend_amplitude, cell.noise_amplitude);
            cell.stop_step = criteria::replay(trace, criterion);
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

SweepReport sweep_train_batch(const RunConfig& base, const std::vector<std::size_t>& sizes) {
    if (sizes.empty()) {
        throw ConfigError("sweep needs at least one batch size");
    }
    const std::size_t smallest = *std::min_element(sizes.begin(), sizes.end());
    if (smallest < 1) {
        throw ConfigError("sweep batch sizes must be at least 1");
    }
    SweepReport report;
    for (const std::size_t size : sizes) {
        RunConfig config = base;
        config.run.train_batch = size;
        const criteria::CriterionConfig criterion = config.stopper.criterion;
        config.stopper.criterion =
            criteria::FixedItersConfig{static_cast<std::int64_t>(config.run.max_steps)};
        config.stopper.signal = StopSignal::det_loss;

        SweepCell cell;
        cell.train_batch = size;
        cell.seed = config.seed;
        cell.grad_evals_per_step = size;
        cell.eval_ratio_vs_smallest =
            static_cast<double>(size) / static_cast<double>(smallest);
        cell.record = run_inversion(config);
        cell.dvar_on_train_stop = criteria::replay(cell.record.train_trace(), criterion);
        report.cells.push_back(std::move(cell));
    }
    return report;
}

std::vector<CompareRow> compare_criteria(const criteria::LossTrace& trace,
                                         const std::vector<criteria::CriterionConfig>& configs) {
    std::vector<CompareRow> rows;
    rows.reserve(configs.size());
    for (const criteria::CriterionConfig& config : configs) {
        CompareRow row;
        row.criterion = criteria::criterion_name(config);
        criteria::StopRule rule(config);
        for (std::size_t i = 0; i < trace.size(); ++i) {
            const criteria::Decision decision =
                rule.observe(trace.steps()[i], trace.values()[i]);
            if (decision.diagnostic.has_value()) {
                row.diagnostic = decision.diagnostic;
            }
            if (decision.stop) {
                row.stop_step = trace.steps()[i];
                break;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<criteria::CriterionConfig> default_comparison_set(std::int64_t budget) {
    return {criteria::DvarConfig{}, criteria::EmaConfig{}, criteria::HallConfig{},
            criteria::TrendConfig{}, criteria::FixedItersConfig{budget}};
}

}  // namespace dvar::harness
