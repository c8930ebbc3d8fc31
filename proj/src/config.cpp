#include "dvar/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <type_traits>

#include <json.hpp>

#include "dvar/common.hpp"

namespace dvar::harness {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
        throw ConfigError("config section '" + section + "' must be an object");
    }
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("unknown config field '" + section + "." + item.key() + "'");
        }
    }
}

double get_double(const json& obj, const std::string& section, const char* key, double dflt) {
    if (!obj.contains(key)) {
        return dflt;
    }
    if (!obj[key].is_number()) {
        throw ConfigError("config field '" + section + "." + key + "' must be a number");
    }
    return obj[key].get<double>();
}

std::size_t get_size(const json& obj, const std::string& section, const char* key,
                     std::size_t dflt) {
    if (!obj.contains(key)) {
        return dflt;
    }
    if (!obj[key].is_number_unsigned() && !obj[key].is_number_integer()) {
        throw ConfigError("config field '" + section + "." + key + "' must be an integer");
    }
    const auto v = obj[key].get<std::int64_t>();
    if (v < 0) {
        throw ConfigError("config field '" + section + "." + key + "' must be nonnegative");
    }
    return static_cast<std::size_t>(v);
}

std::int64_t get_int(const json& obj, const std::string& section, const char* key,
                     std::int64_t dflt) {
    if (!obj.contains(key)) {
        return dflt;
    }
    if (!obj[key].is_number_integer() && !obj[key].is_number_unsigned()) {
        throw ConfigError("config field '" + section + "." + key + "' must be an integer");
    }
    return obj[key].get<std::int64_t>();
}

bool get_bool(const json& obj, const std::string& section, const char* key, bool dflt) {
    if (!obj.contains(key)) {
        return dflt;
    }
    if (!obj[key].is_boolean()) {
        throw ConfigError("config field '" + section + "." + key + "' must be a boolean");
    }
    return obj[key].get<bool>();
}

std::string get_string(const json& obj, const std::string& section, const char* key,
                       const std::string& dflt) {
    if (!obj.contains(key)) {
        return dflt;
    }
    if (!obj[key].is_string()) {
        throw ConfigError("config field '" + section + "." + key + "' must be a string");
    }
    return obj[key].get<std::string>();
}

toy::WorldConfig parse_world(const json& obj) {
    toy::WorldConfig w;
    check_keys(obj, "world",
               {"latent_dim", "image_dim", "embed_dim", "cond_dim", "hidden_dim",
                "num_templates", "vocab_size", "num_images", "time_feature_dim",
                "num_timesteps", "beta_start", "beta_end", "encoder_sigma", "vocab_scale",
                "caption_spread",
                "data_spread", "time_feature_gain", "condition_gain", "weight_scale",
                "data_alignment", "target_regularization"});
    w.latent_dim = get_size(obj, "world", "latent_dim", w.latent_dim);
    w.image_dim = get_size(obj, "world", "image_dim", w.image_dim);
    w.embed_dim = get_size(obj, "world", "embed_dim", w.embed_dim);
    w.cond_dim = get_size(obj, "world", "cond_dim", w.cond_dim);
    w.hidden_dim = get_size(obj, "world", "hidden_dim", w.hidden_dim);
    w.num_templates = get_size(obj, "world", "num_templates", w.num_templates);
    w.vocab_size = get_size(obj, "world", "vocab_size", w.vocab_size);
    w.num_images = get_size(obj, "world", "num_images", w.num_images);
    w.time_feature_dim = get_size(obj, "world", "time_feature_dim", w.time_feature_dim);
    w.num_timesteps = get_size(obj, "world", "num_timesteps", w.num_timesteps);
    w.beta_start = get_double(obj, "world", "beta_start", w.beta_start);
    w.beta_end = get_double(obj, "world", "beta_end", w.beta_end);
    w.encoder_sigma = get_double(obj, "world", "encoder_sigma", w.encoder_sigma);
    w.vocab_scale = get_double(obj, "world", "vocab_scale", w.vocab_scale);
    w.caption_spread = get_double(obj, "world", "caption_spread", w.caption_spread);
    w.data_spread = get_double(obj, "world", "data_spread", w.data_spread);
    w.time_feature_gain = get_double(obj, "world", "time_feature_gain", w.time_feature_gain);
    w.condition_gain = get_double(obj, "world", "condition_gain", w.condition_gain);
    w.weight_scale = get_double(obj, "world", "weight_scale", w.weight_scale);
    w.data_alignment = get_double(obj, "world", "data_alignment", w.data_alignment);
    w.target_regularization =
        get_double(obj, "world", "target_regularization", w.target_regularization);
    return w;
}

optim::OptimizerConfig parse_optimizer(const json& obj) {
    check_keys(obj, "optimizer",
               {"kind", "lr", "beta1", "beta2", "eps", "weight_decay", "momentum", "rho"});
    const std::string kind = get_string(obj, "optimizer", "kind", "adamw");
    if (kind == "sgd") {
        optim::SgdConfig c;
        c.lr = get_double(obj, "optimizer", "lr", c.lr);
        c.momentum = get_double(obj, "optimizer", "momentum", c.momentum);
        return c;
    }
    if (kind == "adamw") {
        auto c = std::get<optim::AdamWConfig>(default_train_optimizer());
        c.lr = get_double(obj, "optimizer", "lr", c.lr);
        c.beta1 = get_double(obj, "optimizer", "beta1", c.beta1);
        c.beta2 = get_double(obj, "optimizer", "beta2", c.beta2);
        c.eps = get_double(obj, "optimizer", "eps", c.eps);
        c.weight_decay = get_double(obj, "optimizer", "weight_decay", c.weight_decay);
        return c;
    }
    if (kind == "sam_sgd") {
        optim::SamSgdConfig c;
        c.base.lr = get_double(obj, "optimizer", "lr", c.base.lr);
        c.base.momentum = get_double(obj, "optimizer", "momentum", c.base.momentum);
        c.rho = get_double(obj, "optimizer", "rho", c.rho);
        return c;
    }
    throw ConfigError("optimizer.kind must be one of sgd, adamw, sam_sgd (got '" + kind + "')");
}

StopperConfig parse_stopper(const json& obj) {
    check_keys(obj, "stopper",
               {"kind", "signal", "window", "threshold", "warmup", "smoothing", "lag",
                "use_absolute", "min_delta", "patience", "eval_every", "against_best",
                "budget"});
    StopperConfig s;
    const std::string kind = get_string(obj, "stopper", "kind", "dvar");
    if (kind == "dvar") {
        criteria::DvarConfig c;
        c.window = get_size(obj, "stopper", "window", c.window);
        c.threshold = get_double(obj, "stopper", "threshold", c.threshold);
        c.warmup = get_size(obj, "stopper", "warmup", c.warmup);
        s.criterion = c;
    } else if (kind == "ema") {
        criteria::EmaConfig c;
        c.smoothing = get_double(obj, "stopper", "smoothing", c.smoothing);
        c.lag = get_size(obj, "stopper", "lag", c.lag);
        c.threshold = get_double(obj, "stopper", "threshold", c.threshold);
        c.use_absolute = get_bool(obj, "stopper", "use_absolute", c.use_absolute);
        s.criterion = c;
    } else if (kind == "hall") {
        criteria::HallConfig c;
        c.window = get_size(obj, "stopper", "window", c.window);
        c.threshold = get_double(obj, "stopper", "threshold", c.threshold);
        s.criterion = c;
    } else if (kind == "trend") {
        criteria::TrendConfig c;
        c.window = get_size(obj, "stopper", "window", c.window);
        c.threshold = get_double(obj, "stopper", "threshold", c.threshold);
        c.use_absolute = get_bool(obj, "stopper", "use_absolute", c.use_absolute);
        s.criterion = c;
    } else if (kind == "patience") {
        criteria::PatienceConfig c;
        c.min_delta = get_double(obj, "stopper", "min_delta", c.min_delta);
        c.patience = get_size(obj, "stopper", "patience", c.patience);
        c.eval_every = get_size(obj, "stopper", "eval_every", c.eval_every);
        c.against_best = get_bool(obj, "stopper", "against_best", c.against_best);
        s.criterion = c;
    } else if (kind == "fixed_iters") {
        criteria::FixedItersConfig c;
        c.budget = get_int(obj, "stopper", "budget", c.budget);
        s.criterion = c;
    } else {
        throw ConfigError(
            "stopper.kind must be one of dvar, ema, hall, trend, patience, fixed_iters (got '" +
            kind + "')");
    }
    s.signal = stop_signal_from_name(get_string(obj, "stopper", "signal", "det_loss"));
    return s;
}

RunSettings parse_run_settings(const json& obj) {
    RunSettings r;
    check_keys(obj, "run",
               {"max_steps", "train_batch", "eval_batch", "score_every", "score_kind", "init",
                "init_index", "fixed"});
    r.max_steps = get_size(obj, "run", "max_steps", r.max_steps);
    r.train_batch = get_size(obj, "run", "train_batch", r.train_batch);
    r.eval_batch = get_size(obj, "run", "eval_batch", r.eval_batch);
    r.score_every = get_size(obj, "run", "score_every", r.score_every);
    r.score_kind =
        toy::score_kind_from_name(get_string(obj, "run", "score_kind", "sample_similarity"));
    r.init.kind = toy::init_kind_from_name(get_string(obj, "run", "init", "random"));
    r.init.manual_index = get_size(obj, "run", "init_index", 0);
    if (obj.contains("fixed")) {
        const json& f = obj["fixed"];
        check_keys(f, "run.fixed",
                   {"images", "captions", "encoder_noise", "timesteps", "diffusion_noise"});
        r.fixed.images = get_bool(f, "run.fixed", "images", true);
        r.fixed.captions = get_bool(f, "run.fixed", "captions", true);
        r.fixed.encoder_noise = get_bool(f, "run.fixed", "encoder_noise", true);
        r.fixed.timesteps = get_bool(f, "run.fixed", "timesteps", true);
        r.fixed.diffusion_noise = get_bool(f, "run.fixed", "diffusion_noise", true);
    }
    if (r.max_steps < 1) {
        throw ConfigError("run.max_steps must be at least 1");
    }
    if (r.train_batch < 1 || r.eval_batch < 1) {
        throw ConfigError("run batch sizes must be at least 1");
    }
    return r;
}

}  // namespace

optim::OptimizerConfig default_train_optimizer() {
    optim::AdamWConfig c;
    c.lr = 1e-2;
    c.weight_decay = 2.0;
    return c;
}

std::string stop_signal_name(StopSignal signal) {
    switch (signal) {
        case StopSignal::det_loss: return "det_loss";
        case StopSignal::train_loss: return "train_loss";
        case StopSignal::score: return "score";
    }
    return "unknown";
}

StopSignal stop_signal_from_name(const std::string& name) {
    if (name == "det_loss") {
        return StopSignal::det_loss;
    }
    if (name == "train_loss") {
        return StopSignal::train_loss;
    }
    if (name == "score") {
        return StopSignal::score;
    }
    throw ConfigError("stopper.signal must be one of det_loss, train_loss, score (got '" + name +
                      "')");
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "config", {"schema", "seed", "world", "optimizer", "stopper", "run"});
    RunConfig config;
    const std::int64_t schema = get_int(j, "config", "schema", 1);
    if (schema != 1) {
        throw ConfigError("config field 'schema' must be 1");
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
            throw ConfigError("config field 'seed' must be an integer");
        }
        config.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("world")) {
        config.world = parse_world(j["world"]);
    }
    if (j.contains("optimizer")) {
        config.optimizer = parse_optimizer(j["optimizer"]);
    }
    if (j.contains("stopper")) {
        config.stopper = parse_stopper(j["stopper"]);
    }
    if (j.contains("run")) {
        config.run = parse_run_settings(j["run"]);
    }
    return config;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_run_config(buffer.str());
}

std::string serialize_run_config(const RunConfig& c) {
    std::ostringstream out;
    out << "{\n";
    out << "  \"schema\": 1,\n";
    out << "  \"seed\": " << c.seed << ",\n";
    const auto& w = c.world;
    out << "  \"world\": {\"latent_dim\": " << w.latent_dim << ", \"image_dim\": " << w.image_dim
        << ", \"embed_dim\": " << w.embed_dim << ", \"cond_dim\": " << w.cond_dim
        << ", \"hidden_dim\": " << w.hidden_dim << ", \"num_templates\": " << w.num_templates
        << ", \"vocab_size\": " << w.vocab_size << ", \"num_images\": " << w.num_images
        << ", \"time_feature_dim\": " << w.time_feature_dim
        << ", \"num_timesteps\": " << w.num_timesteps << ", \"beta_start\": " << fmt(w.beta_start)
        << ", \"beta_end\": " << fmt(w.beta_end)
        << ", \"encoder_sigma\": " << fmt(w.encoder_sigma)
        << ", \"vocab_scale\": " << fmt(w.vocab_scale)
        << ", \"caption_spread\": " << fmt(w.caption_spread)
        << ", \"data_spread\": " << fmt(w.data_spread)
        << ", \"time_feature_gain\": " << fmt(w.time_feature_gain)
        << ", \"condition_gain\": " << fmt(w.condition_gain)
        << ", \"weight_scale\": " << fmt(w.weight_scale)
        << ", \"data_alignment\": " << fmt(w.data_alignment)
        << ", \"target_regularization\": " << fmt(w.target_regularization) << "},\n";
    out << "  \"optimizer\": ";
    std::visit(
        [&out](const auto& opt) {
            using T = std::decay_t<decltype(opt)>;
            if constexpr (std::is_same_v<T, optim::SgdConfig>) {
                out << "{\"kind\": \"sgd\", \"lr\": " << fmt(opt.lr)
                    << ", \"momentum\": " << fmt(opt.momentum) << "}";
            } else if constexpr (std::is_same_v<T, optim::AdamWConfig>) {
                out << "{\"kind\": \"adamw\", \"lr\": " << fmt(opt.lr)
                    << ", \"beta1\": " << fmt(opt.beta1) << ", \"beta2\": " << fmt(opt.beta2)
                    << ", \"eps\": " << fmt(opt.eps)
                    << ", \"weight_decay\": " << fmt(opt.weight_decay) << "}";
            } else {
                out << "{\"kind\": \"sam_sgd\", \"lr\": " << fmt(opt.base.lr)
                    << ", \"momentum\": " << fmt(opt.base.momentum)
                    << ", \"rho\": " << fmt(opt.rho) << "}";
            }
        },
        c.optimizer);
    out << ",\n";
    out << "  \"stopper\": ";
    std::visit(
        [&out, &c](const auto& crit) {
            using T = std::decay_t<decltype(crit)>;
            const std::string signal = stop_signal_name(c.stopper.signal);
            if constexpr (std::is_same_v<T, criteria::DvarConfig>) {
                out << "{\"kind\": \"dvar\", \"signal\": \"" << signal
                    << "\", \"window\": " << crit.window
                    << ", \"threshold\": " << fmt(crit.threshold)
                    << ", \"warmup\": " << crit.warmup << "}";
            } else if constexpr (std::is_same_v<T, criteria::EmaConfig>) {
                out << "{\"kind\": \"ema\", \"signal\": \"" << signal
                    << "\", \"smoothing\": " << fmt(crit.smoothing) << ", \"lag\": " << crit.lag
                    << ", \"threshold\": " << fmt(crit.threshold) << ", \"use_absolute\": "
                    << (crit.use_absolute ? "true" : "false") << "}";
            } else if constexpr (std::is_same_v<T, criteria::HallConfig>) {
                out << "{\"kind\": \"hall\", \"signal\": \"" << signal
                    << "\", \"window\": " << crit.window
                    << ", \"threshold\": " << fmt(crit.threshold) << "}";
            } else if constexpr (std::is_same_v<T, criteria::TrendConfig>) {
                out << "{\"kind\": \"trend\", \"signal\": \"" << signal
                    << "\", \"window\": " << crit.window
                    << ", \"threshold\": " << fmt(crit.threshold) << ", \"use_absolute\": "
                    << (crit.use_absolute ? "true" : "false") << "}";
            } else if constexpr (std::is_same_v<T, criteria::PatienceConfig>) {
                out << "{\"kind\": \"patience\", \"signal\": \"" << signal
                    << "\", \"min_delta\": " << fmt(crit.min_delta)
                    << ", \"patience\": " << crit.patience
                    << ", \"eval_every\": " << crit.eval_every << ", \"against_best\": "
                    << (crit.against_best ? "true" : "false") << "}";
            } else {
                out << "{\"kind\": \"fixed_iters\", \"signal\": \"" << signal
                    << "\", \"budget\": " << crit.budget << "}";
            }
        },
        c.stopper.criterion);
    out << ",\n";
    const auto& r = c.run;
    out << "  \"run\": {\"max_steps\": " << r.max_steps << ", \"train_batch\": " << r.train_batch
        << ", \"eval_batch\": " << r.eval_batch << ", \"score_every\": " << r.score_every
        << ", \"score_kind\": \"" << toy::score_kind_name(r.score_kind) << "\", \"init\": \""
        << toy::init_kind_name(r.init.kind) << "\", \"init_index\": " << r.init.manual_index
        << ", \"fixed\": {\"images\": " << (r.fixed.images ? "true" : "false")
        << ", \"captions\": " << (r.fixed.captions ? "true" : "false")
        << ", \"encoder_noise\": " << (r.fixed.encoder_noise ? "true" : "false")
        << ", \"timesteps\": " << (r.fixed.timesteps ? "true" : "false")
        << ", \"diffusion_noise\": " << (r.fixed.diffusion_noise ? "true" : "false") << "}}\n";
    out << "}\n";
    return out.str();
}

std::uint64_t config_hash(const RunConfig& config) {
    const std::string text = serialize_run_config(config);
    std::uint64_t h = 1469598103934665603ull;
    for (const char ch : text) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    return h;
}

std::string apply_overrides(const std::string& json_text,
                            const std::vector<std::string>& overrides) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    for (const std::string& entry : overrides) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("override must have the form key=value: '" + entry + "'");
        }
        const std::string path = entry.substr(0, eq);
        const std::string value_text = entry.substr(eq + 1);
        json value;
        try {
            value = json::parse(value_text);
        } catch (const json::parse_error&) {
            value = value_text;  // bare words are strings
        }
        json* node = &j;
        std::size_t start = 0;
        while (true) {
            const auto dot = path.find('.', start);
            const std::string key = path.substr(start, dot - start);
            if (key.empty()) {
                throw ConfigError("override path has an empty component: '" + path + "'");
            }
            if (dot == std::string::npos) {
                (*node)[key] = value;
                break;
            }
            node = &(*node)[key];
            start = dot + 1;
        }
    }
    return j.dump();
}

}  // namespace dvar::harness
