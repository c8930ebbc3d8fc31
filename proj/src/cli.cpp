#include "dvar/cli.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "dvar/common.hpp"
#include "dvar/harness.hpp"
#include "dvar/plot.hpp"
#include "dvar/series.hpp"

namespace dvar::cli {

namespace {

namespace fs = std::filesystem;

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

harness::RunConfig resolve_config(const std::string& config_path,
                                  const std::vector<std::string>& overrides,
                                  const std::optional<std::uint64_t>& seed_flag) {
    std::string text = "{}";
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) {
            throw ConfigError("cannot open config file: " + config_path);
        }
        std::stringstream buffer;
        buffer << in.rdbuf();
        text = buffer.str();
    }
    if (!overrides.empty()) {
        text = harness::apply_overrides(text, overrides);
    }
    harness::RunConfig config = harness::parse_run_config(text);
    // Seed precedence: --seed flag, then DVAR_LAB_SEED, then the config file.
    if (seed_flag.has_value()) {
        config.seed = *seed_flag;
    } else if (const char* env = std::getenv("DVAR_LAB_SEED")) {
        try {
            config.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw ConfigError("DVAR_LAB_SEED must be an unsigned integer");
        }
    }
    return config;
}

void run_parallel(std::size_t jobs, std::size_t count,
                  const std::function<void(std::size_t)>& work) {
    jobs = std::max<std::size_t>(1, std::min(jobs, count));
    if (jobs == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            work(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) {
                    return;
                }
                work(i);
            }
        });
    }
    for (std::thread& t : pool) {
        t.join();
    }
}

std::mutex stdout_mutex;

void emit_line(const std::string& line) {
    std::lock_guard<std::mutex> lock(stdout_mutex);
    std::cout << line << "\n";
}

plot::Panel record_panel(const harness::RunRecord& record, const std::string& title) {
    plot::Panel panel;
    panel.title = title;
    plot::Series train{"train_loss", {}, {}};
    plot::Series det{"det_loss", {}, {}};
    plot::Series ratio{"ratio", {}, {}};
    for (const harness::StepRow& row : record.rows) {
        const double step = static_cast<double>(row.step);
        train.x.push_back(step);
        train.y.push_back(row.train_loss);
        det.x.push_back(step);
        det.y.push_back(row.det_loss);
        if (row.ratio.has_value()) {
            ratio.x.push_back(step);
            ratio.y.push_back(*row.ratio);
        }
    }
    panel.series = {train, det, ratio};
    return panel;
}

std::string summary_line(const harness::RunRecord& record, const std::string& out_dir) {
    std::ostringstream line;
    line << "stop_step=" << record.stop_step << " reason=" << record.stop_reason;
    if (!record.rows.empty() && record.rows.back().score.has_value()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", *record.rows.back().score);
        line << " final_score=" << buf;
    }
    char wall[32];
    std::snprintf(wall, sizeof(wall), "%.2f", record.wall.total_seconds);
    line << " wall_seconds=" << wall << " out=" << out_dir;
    return line.str();
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string config_path;
    std::string protocol = "dvar";
    std::string out_dir;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    bool paper_scale = false;
    std::optional<std::int64_t> budget;
};

int cmd_train(const TrainArgs& args) {
    harness::RunConfig config = resolve_config(args.config_path, args.overrides, args.seed);
    if (args.paper_scale) {
        config.run.max_steps = 6100;
        if (args.protocol == "clip-s") {
            criteria::PatienceConfig patience;
            patience.min_delta = 0.05;
            patience.patience = 5;
            patience.eval_every = 50;
            config.stopper.criterion = patience;
        }
    }

    harness::RunRecord record;
    if (args.protocol == "dvar") {
        record = harness::run_inversion(config);
    } else if (args.protocol == "baseline") {
        record = harness::run_baseline_original(config);
    } else if (args.protocol == "clip-s") {
        record = harness::run_clip_s(config);
    } else if (args.protocol == "few-iters") {
        std::int64_t budget = 445;
        if (const auto* fixed =
                std::get_if<criteria::FixedItersConfig>(&config.stopper.criterion)) {
            budget = fixed->budget;
        }
        if (args.budget.has_value()) {
            budget = *args.budget;
        }
        record = harness::run_few_iters(config, budget);
    } else {
        throw ConfigError("unknown protocol '" + args.protocol +
                          "'; valid protocols: dvar, baseline, clip-s, few-iters");
    }

    const std::string out_dir = args.out_dir.empty()
                                    ? "runs/run-" + hash_hex(harness::config_hash(config))
                                    : args.out_dir;
    harness::write_run_record(record, out_dir);
    plot::write_svg({record_panel(record, args.protocol)}, out_dir + "/plot.svg");
    emit_line(summary_line(record, out_dir));
    if (!record.valid) {
        std::cerr << "run aborted: " << record.error << "\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

struct ReplayArgs {
    std::string trace_path;
    std::string criterion = "dvar";
    std::optional<std::size_t> window;
    std::optional<double> threshold;
    std::optional<std::size_t> warmup;
    std::optional<double> smoothing;
    std::optional<std::size_t> lag;
    std::optional<double> min_delta;
    std::optional<std::size_t> patience;
    std::optional<std::size_t> eval_every;
    std::optional<std::int64_t> budget;
    std::optional<bool> use_absolute;
};

criteria::CriterionConfig criterion_from_args(const ReplayArgs& args) {
    if (args.criterion == "dvar") {
        criteria::DvarConfig c;
        c.window = args.window.value_or(c.window);
        c.threshold = args.threshold.value_or(c.threshold);
        c.warmup = args.warmup.value_or(c.warmup);
        return c;
    }
    if (args.criterion == "ema") {
        criteria::EmaConfig c;
        c.smoothing = args.smoothing.value_or(c.smoothing);
        c.lag = args.lag.value_or(args.window.value_or(c.lag));
        c.threshold = args.threshold.value_or(c.threshold);
        c.use_absolute = args.use_absolute.value_or(c.use_absolute);
        return c;
    }
    if (args.criterion == "hall") {
        criteria::HallConfig c;
        c.window = args.window.value_or(c.window);
        c.threshold = args.threshold.value_or(c.threshold);
        return c;
    }
    if (args.criterion == "trend") {
        criteria::TrendConfig c;
        c.window = args.window.value_or(c.window);
        c.threshold = args.threshold.value_or(c.threshold);
        c.use_absolute = args.use_absolute.value_or(c.use_absolute);
        return c;
    }
    if (args.criterion == "patience") {
        criteria::PatienceConfig c;
        c.min_delta = args.min_delta.value_or(c.min_delta);
        c.patience = args.patience.value_or(c.patience);
        c.eval_every = args.eval_every.value_or(c.eval_every);
        return c;
    }
    if (args.criterion == "fixed_iters") {
        criteria::FixedItersConfig c;
        c.budget = args.budget.value_or(c.budget);
        return c;
    }
    throw ConfigError("unknown criterion '" + args.criterion +
                      "'; valid: dvar, ema, hall, trend, patience, fixed_iters");
}

int cmd_replay(const ReplayArgs& args) {
    const criteria::LossTrace trace = criteria::load_trace_csv(args.trace_path);
    const criteria::CriterionConfig config = criterion_from_args(args);
    const auto rows = harness::compare_criteria(trace, {config});
    std::ostringstream line;
    if (rows[0].stop_step.has_value()) {
        line << "stop_step=" << *rows[0].stop_step;
    } else {
        line << "stop_step=never";
    }
    if (rows[0].diagnostic.has_value()) {
        line << " diagnostic=" << harness::format_float(*rows[0].diagnostic);
    }
    emit_line(line.str());
    return 0;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateArgs {
    std::string config_path;
    std::string out_dir = "ablation";
    std::vector<std::string> factors;
    std::vector<std::size_t> sizes;
    std::size_t seeds = 1;
    std::size_t jobs = 1;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

void write_cell_trace(const harness::RunRecord& record, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot write " + path);
    }
    for (const harness::StepRow& row : record.rows) {
        out << "{\"step\":" << row.step
            << ",\"det_loss\":" << harness::format_float(row.det_loss)
            << ",\"train_loss\":" << harness::format_float(row.train_loss) << "}\n";
    }
}

int cmd_ablate(const AblateArgs& args) {
    const harness::RunConfig base = resolve_config(args.config_path, args.overrides, args.seed);
    if (args.sizes.empty()) {
        throw ConfigError("ablate requires --sizes");
    }
    std::vector<std::string> factors = args.factors;
    if (factors.empty()) {
        factors = {"none"};
    }
    for (const std::string& f : factors) {
        if (f != "none") {
            diffusion::factor_from_name(f);  // validate early
        }
    }

    struct Task {
        std::string factor;
        std::size_t size;
        std::uint64_t seed;
    };
    std::vector<Task> tasks;
    for (const std::string& factor : factors) {
        for (const std::size_t size : args.sizes) {
            for (std::size_t s = 0; s < args.seeds; ++s) {
                tasks.push_back({factor, size, base.seed + s});
            }
        }
    }
    std::vector<harness::AblationCell> cells(tasks.size());
    run_parallel(args.jobs, tasks.size(), [&](std::size_t i) {
        harness::RunConfig config = base;
        config.seed = tasks[i].seed;
        const std::vector<std::string> factor_list =
            tasks[i].factor == "none" ? std::vector<std::string>{}
                                      : std::vector<std::string>{tasks[i].factor};
        harness::AblationReport report =
            harness::ablate_randomness(config, factor_list, {tasks[i].size});
        cells[i] = std::move(report.cells.front());
        std::ostringstream line;
        line << "ablate factor=" << cells[i].factor << " eval_batch=" << cells[i].eval_batch
             << " seed=" << cells[i].seed << " stop_step=";
        if (cells[i].stop_step.has_value()) {
            line << *cells[i].stop_step;
        } else {
            line << "never";
        }
        emit_line(line.str());
    });

    fs::create_directories(args.out_dir);
    fs::create_directories(args.out_dir + "/traces");
    std::ofstream csv(args.out_dir + "/report.csv", std::ios::binary);
    if (!csv) {
        throw ConfigError("cannot write " + args.out_dir + "/report.csv");
    }
    csv << "factor,eval_batch,seed,trend_amplitude,noise_amplitude,stop_step\n";
    std::vector<plot::Panel> panels;
    for (const harness::AblationCell& cell : cells) {
        csv << cell.factor << ',' << cell.eval_batch << ',' << cell.seed << ','
            << harness::format_float(cell.trend_amplitude) << ','
            << harness::format_float(cell.noise_amplitude) << ',';
        if (cell.stop_step.has_value()) {
            csv << *cell.stop_step;
        }
        csv << '\n';
        const std::string stem = cell.factor + "_" + std::to_string(cell.eval_batch) + "_" +
                                 std::to_string(cell.seed);
        write_cell_trace(cell.record, args.out_dir + "/traces/" + stem + ".jsonl");

        plot::Panel panel;
        panel.title = cell.factor + " B=" + std::to_string(cell.eval_batch) +
                      " seed=" + std::to_string(cell.seed);
        plot::Series det{"eval_loss", {}, {}};
        for (const harness::StepRow& row : cell.record.rows) {
            det.x.push_back(static_cast<double>(row.step));
            det.y.push_back(row.det_loss);
        }
        panel.series = {det};
        panels.push_back(std::move(panel));
    }
    plot::write_svg(panels, args.out_dir + "/ablate.svg", std::min<std::size_t>(3, panels.size()));
    return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string config_path;
    std::string out_dir = "sweep";
    std::vector<std::size_t> sizes;
    std::size_t jobs = 1;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

int cmd_sweep(const SweepArgs& args) {
    const harness::RunConfig base = resolve_config(args.config_path, args.overrides, args.seed);
    if (args.sizes.empty()) {
        throw ConfigError("sweep requires --sizes");
    }
    const std::size_t smallest = *std::min_element(args.sizes.begin(), args.sizes.end());
    if (smallest < 1) {
        throw ConfigError("sweep batch sizes must be at least 1");
    }
    std::vector<harness::SweepCell> cells(args.sizes.size());
    run_parallel(args.jobs, args.sizes.size(), [&](std::size_t i) {
        harness::SweepReport report = harness::sweep_train_batch(base, {args.sizes[i]});
        cells[i] = std::move(report.cells.front());
        cells[i].eval_ratio_vs_smallest =
            static_cast<double>(args.sizes[i]) / static_cast<double>(smallest);
        std::ostringstream line;
        line << "sweep train_batch=" << cells[i].train_batch
             << " grad_evals_per_step=" << cells[i].grad_evals_per_step
             << " ratio_vs_smallest=" << cells[i].eval_ratio_vs_smallest << " dvar_on_train=";
        if (cells[i].dvar_on_train_stop.has_value()) {
            line << *cells[i].dvar_on_train_stop;
        } else {
            line << "never";
        }
        emit_line(line.str());
    });

    fs::create_directories(args.out_dir);
    fs::create_directories(args.out_dir + "/traces");
    std::ofstream csv(args.out_dir + "/report.csv", std::ios::binary);
    if (!csv) {
        throw ConfigError("cannot write " + args.out_dir + "/report.csv");
    }
    csv << "train_batch,seed,grad_evals_per_step,eval_ratio_vs_smallest,dvar_on_train_stop\n";
    std::vector<plot::Panel> panels;
    for (const harness::SweepCell& cell : cells) {
        csv << cell.train_batch << ',' << cell.seed << ',' << cell.grad_evals_per_step << ','
            << harness::format_float(cell.eval_ratio_vs_smallest) << ',';
        if (cell.dvar_on_train_stop.has_value()) {
            csv << *cell.dvar_on_train_stop;
        }
        csv << '\n';
        const std::string stem = "batch_" + std::to_string(cell.train_batch);
        write_cell_trace(cell.record, args.out_dir + "/traces/" + stem + ".jsonl");

        plot::Panel panel;
        panel.title = "train_batch=" + std::to_string(cell.train_batch);
        plot::Series train{"train_loss", {}, {}};
        plot::Series grad{"grad_norm", {}, {}};
        for (const harness::StepRow& row : cell.record.rows) {
            train.x.push_back(static_cast<double>(row.step));
            train.y.push_back(row.train_loss);
            grad.x.push_back(static_cast<double>(row.step));
            grad.y.push_back(row.grad_norm);
        }
        panel.series = {train, grad};
        panels.push_back(std::move(panel));
    }
    plot::write_svg(panels, args.out_dir + "/sweep.svg", std::min<std::size_t>(2, panels.size()));
    return 0;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareArgs {
    std::string run_dir;
    std::string trace_path;
    std::string config_path;
    std::string out_dir = "compare";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

int cmd_compare(const CompareArgs& args) {
    criteria::LossTrace trace;
    std::int64_t budget = 5000;
    if (!args.run_dir.empty()) {
        const auto rows = harness::load_steps_jsonl(args.run_dir + "/steps.jsonl");
        for (const harness::StepRow& row : rows) {
            trace.append(row.step, row.det_loss);
        }
    } else if (!args.trace_path.empty()) {
        trace = criteria::load_trace_csv(args.trace_path);
    } else {
        harness::RunConfig config =
            resolve_config(args.config_path, args.overrides, args.seed);
        config.stopper.criterion =
            criteria::FixedItersConfig{static_cast<std::int64_t>(config.run.max_steps)};
        budget = static_cast<std::int64_t>(config.run.max_steps);
        const harness::RunRecord record = harness::run_inversion(config);
        if (!record.valid) {
            std::cerr << "run aborted: " << record.error << "\n";
            return 1;
        }
        trace = record.det_trace();
    }
    if (!trace.empty()) {
        budget = trace.steps().back();
    }
    const auto rows = harness::compare_criteria(trace, harness::default_comparison_set(budget));

    fs::create_directories(args.out_dir);
    std::ofstream csv(args.out_dir + "/compare.csv", std::ios::binary);
    if (!csv) {
        throw ConfigError("cannot write " + args.out_dir + "/compare.csv");
    }
    csv << "criterion,stop_step,diagnostic\n";
    for (const harness::CompareRow& row : rows) {
        csv << row.criterion << ',';
        if (row.stop_step.has_value()) {
            csv << *row.stop_step;
        } else {
            csv << "never";
        }
        csv << ',';
        if (row.diagnostic.has_value()) {
            csv << harness::format_float(*row.diagnostic);
        }
        csv << '\n';
        std::ostringstream line;
        line << "compare criterion=" << row.criterion << " stop_step=";
        if (row.stop_step.has_value()) {
            line << *row.stop_step;
        } else {
            line << "never";
        }
        emit_line(line.str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

struct PlotArgs {
    std::string input_path;
    std::vector<std::string> series_names;
    std::size_t smooth = 1;
    std::string out_path = "plot.svg";
};

int cmd_plot(const PlotArgs& args) {
    if (args.smooth < 1) {
        throw ConfigError("smoothing window must be at least 1");
    }
    std::vector<plot::Series> available;
    if (args.input_path.size() > 4 &&
        args.input_path.substr(args.input_path.size() - 4) == ".csv") {
        const criteria::LossTrace trace = criteria::load_trace_csv(args.input_path);
        plot::Series s{"value", {}, {}};
        for (std::size_t i = 0; i < trace.size(); ++i) {
            s.x.push_back(static_cast<double>(trace.steps()[i]));
            s.y.push_back(trace.values()[i]);
        }
        available.push_back(std::move(s));
    } else {
        const auto rows = harness::load_steps_jsonl(args.input_path);
        plot::Series train{"train_loss", {}, {}}, det{"det_loss", {}, {}},
            grad{"grad_norm", {}, {}}, ratio{"ratio", {}, {}}, score{"score", {}, {}};
        for (const harness::StepRow& row : rows) {
            const double step = static_cast<double>(row.step);
            train.x.push_back(step);
            train.y.push_back(row.train_loss);
            det.x.push_back(step);
            det.y.push_back(row.det_loss);
            grad.x.push_back(step);
            grad.y.push_back(row.grad_norm);
            if (row.ratio.has_value()) {
                ratio.x.push_back(step);
                ratio.y.push_back(*row.ratio);
            }
            if (row.score.has_value()) {
                score.x.push_back(step);
                score.y.push_back(*row.score);
            }
        }
        available = {train, det, grad, ratio, score};
    }

    std::vector<std::string> wanted = args.series_names;
    if (wanted.empty()) {
        wanted.push_back(available.front().label);
    }
    plot::Panel panel;
    panel.title = fs::path(args.input_path).filename().string();
    for (const std::string& name : wanted) {
        bool found = false;
        for (const plot::Series& s : available) {
            if (s.label == name) {
                if (s.x.empty()) {
                    throw ConfigError("series '" + name + "' has no data in " + args.input_path);
                }
                plot::Series smoothed = s;
                smoothed.y = series::centered_moving_average(s.y, args.smooth);
                panel.series.push_back(std::move(smoothed));
                found = true;
                break;
            }
        }
        if (!found) {
            throw ConfigError("unknown series '" + name + "' in " + args.input_path);
        }
    }
    plot::write_svg({panel}, args.out_path);
    emit_line("wrote " + args.out_path);
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"Convergence-detection toolkit for iterative stochastic training"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Run a training protocol end to end");
    train->add_option("--config", train_args.config_path, "Config JSON path");
    train->add_option("--protocol", train_args.protocol,
                      "Protocol: dvar, baseline, clip-s, few-iters");
    train->add_option("--out", train_args.out_dir, "Output directory (default runs/run-<hash>)");
    train->add_option("--set", train_args.overrides, "Config override key=value");
    train->add_option("--seed", train_args.seed, "Master seed override");
    train->add_flag("--paper-scale", train_args.paper_scale,
                    "Use published protocol scales (budget 6100, min_delta 0.05)");
    train->add_option("--budget", train_args.budget, "Step budget for --protocol few-iters");

    ReplayArgs replay_args;
    CLI::App* replay = app.add_subcommand("replay", "Apply a criterion to a recorded trace");
    replay->add_option("trace", replay_args.trace_path, "CSV trace (header step,value)")
        ->required();
    replay->add_option("--criterion", replay_args.criterion,
                       "dvar, ema, hall, trend, patience, fixed_iters");
    replay->add_option("--window", replay_args.window, "Rolling window size");
    replay->add_option("--threshold", replay_args.threshold, "Stop threshold");
    replay->add_option("--warmup", replay_args.warmup, "Extra warmup observations (dvar)");
    replay->add_option("--smoothing", replay_args.smoothing, "EMA smoothing factor");
    replay->add_option("--lag", replay_args.lag, "EMA comparison lag");
    replay->add_option("--min-delta", replay_args.min_delta, "Patience improvement delta");
    replay->add_option("--patience", replay_args.patience, "Patience evaluation count");
    replay->add_option("--eval-every", replay_args.eval_every, "Patience cadence (steps)");
    replay->add_option("--budget", replay_args.budget, "fixed_iters budget");
    replay->add_option("--use-absolute", replay_args.use_absolute,
                       "Stop on |statistic| (ema/trend)");

    AblateArgs ablate_args;
    CLI::App* ablate = app.add_subcommand("ablate", "Unfix evaluation factors one by one");
    ablate->add_option("--config", ablate_args.config_path, "Config JSON path");
    ablate->add_option("--out", ablate_args.out_dir, "Output directory");
    ablate->add_option("--factors", ablate_args.factors, "Factors to unfix (comma separated)")
        ->delimiter(',');
    ablate->add_option("--sizes", ablate_args.sizes, "Evaluation batch sizes")
        ->delimiter(',')
        ->required();
    ablate->add_option("--seeds", ablate_args.seeds, "Number of consecutive seeds");
    ablate->add_option("--jobs", ablate_args.jobs, "Parallel cells");
    ablate->add_option("--set", ablate_args.overrides, "Config override key=value");
    ablate->add_option("--seed", ablate_args.seed, "Master seed override");

    SweepArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "Sweep the training batch size");
    sweep->add_option("--config", sweep_args.config_path, "Config JSON path");
    sweep->add_option("--out", sweep_args.out_dir, "Output directory");
    sweep->add_option("--sizes", sweep_args.sizes, "Training batch sizes")
        ->delimiter(',')
        ->required();
    sweep->add_option("--jobs", sweep_args.jobs, "Parallel cells");
    sweep->add_option("--set", sweep_args.overrides, "Config override key=value");
    sweep->add_option("--seed", sweep_args.seed, "Master seed override");

    CompareArgs compare_args;
    CLI::App* compare = app.add_subcommand("compare", "Apply all criteria to one trace");
    compare->add_option("--run", compare_args.run_dir, "Stored run directory");
    compare->add_option("--trace", compare_args.trace_path, "CSV trace path");
    compare->add_option("--config", compare_args.config_path, "Config to generate a trace");
    compare->add_option("--out", compare_args.out_dir, "Output directory");
    compare->add_option("--set", compare_args.overrides, "Config override key=value");
    compare->add_option("--seed", compare_args.seed, "Master seed override");

    PlotArgs plot_args;
    CLI::App* plot_cmd = app.add_subcommand("plot", "Render series from a record as SVG");
    plot_cmd->add_option("input", plot_args.input_path, "steps.jsonl or trace CSV")->required();
    plot_cmd->add_option("--series", plot_args.series_names,
                         "Series names (train_loss, det_loss, grad_norm, ratio, score)")
        ->delimiter(',');
    plot_cmd->add_option("--smooth", plot_args.smooth, "Centered moving-average window");
    plot_cmd->add_option("--out", plot_args.out_path, "Output SVG path");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (train->parsed()) {
            return cmd_train(train_args);
        }
        if (replay->parsed()) {
            return cmd_replay(replay_args);
        }
        if (ablate->parsed()) {
            return cmd_ablate(ablate_args);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_args);
        }
        if (compare->parsed()) {
            return cmd_compare(compare_args);
        }
        if (plot_cmd->parsed()) {
            return cmd_plot(plot_args);
        }
        std::cerr << "no subcommand given\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
    for (int i = 1; i < argc; ++i) {
        args.emplace_back(argv[i]);
    }
    return run(args);
}

}  // namespace dvar::cli
