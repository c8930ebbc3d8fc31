#include "dvar/record.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dvar/common.hpp"

namespace dvar::harness {

using nlohmann::json;

std::string format_float(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

namespace {

criteria::LossTrace column_trace(const std::vector<StepRow>& rows, double StepRow::* member) {
    criteria::LossTrace trace;
    for (const StepRow& row : rows) {
        trace.append(row.step, row.*member);
    }
    return trace;
}

}  // namespace

criteria::LossTrace RunRecord::det_trace() const {
    return column_trace(rows, &StepRow::det_loss);
}

criteria::LossTrace RunRecord::train_trace() const {
    return column_trace(rows, &StepRow::train_loss);
}

criteria::LossTrace RunRecord::grad_norm_trace() const {
    return column_trace(rows, &StepRow::grad_norm);
}

void write_run_record(const RunRecord& record, const std::string& dir) {
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir + "/steps.jsonl", std::ios::binary);
        if (!out) {
            throw ConfigError("cannot write " + dir + "/steps.jsonl");
        }
        for (const StepRow& row : record.rows) {
            out << "{\"step\":" << row.step << ",\"train_loss\":" << format_float(row.train_loss)
                << ",\"det_loss\":" << format_float(row.det_loss)
                << ",\"grad_norm\":" << format_float(row.grad_norm) << ",\"ratio\":";
            if (row.ratio.has_value()) {
                out << format_float(*row.ratio);
            } else {
                out << "null";
            }
            if (row.score.has_value()) {
                out << ",\"score\":" << format_float(*row.score);
            }
            out << "}\n";
        }
    }

    {
        std::ofstream out(dir + "/run.json", std::ios::binary);
        if (!out) {
            throw ConfigError("cannot write " + dir + "/run.json");
        }
        // The config echo is embedded verbatim (it is already JSON).
        std::string config_text = serialize_run_config(record.config);
        // Indent the embedded block to keep the file readable.
        out << "{\n\"config\": " << config_text << ",\n\"summary\": {\n";
        out << "  \"stop_step\": " << record.stop_step << ",\n";
        out << "  \"stop_reason\": \"" << record.stop_reason << "\",\n";
        out << "  \"valid\": " << (record.valid ? "true" : "false") << ",\n";
        out << "  \"error\": \"" << record.error << "\",\n";
        out << "  \"final_embedding\": [";
        for (std::size_t i = 0; i < record.final_embedding.size(); ++i) {
            if (i > 0) {
                out << ", ";
            }
            out << format_float(record.final_embedding[i]);
        }
        out << "],\n";
        out << "  \"best_step\": ";
        if (record.best_step.has_value()) {
            out << *record.best_step;
        } else {
            out << "null";
        }
        out << ",\n  \"best_score\": ";
        if (record.best_score.has_value()) {
            out << format_float(*record.best_score);
        } else {
            out << "null";
        }
        out << ",\n  \"wall\": {\"setup_seconds\": " << format_float(record.wall.setup_seconds)
            << ", \"train_seconds\": " << format_float(record.wall.train_seconds)
            << ", \"det_eval_seconds\": " << format_float(record.wall.det_eval_seconds)
            << ", \"score_seconds\": " << format_float(record.wall.score_seconds)
            << ", \"total_seconds\": " << format_float(record.wall.total_seconds) << "}\n";
        out << "}\n}\n";
    }

    {
        std::ofstream out(dir + "/summary.csv", std::ios::binary);
        if (!out) {
            throw ConfigError("cannot write " + dir + "/summary.csv");
        }
        out << "stop_step,stop_reason,valid,rows,final_score,train_seconds,det_eval_seconds,"
               "score_seconds,total_seconds\n";
        std::string final_score = "";
        if (!record.rows.empty() && record.rows.back().score.has_value()) {
            final_score = format_float(*record.rows.back().score);
        }
        out << record.stop_step << ',' << record.stop_reason << ','
            << (record.valid ? "true" : "false") << ',' << record.rows.size() << ','
            << final_score << ',' << format_float(record.wall.train_seconds) << ','
            << format_float(record.wall.det_eval_seconds) << ','
            << format_float(record.wall.score_seconds) << ','
            << format_float(record.wall.total_seconds) << "\n";
    }
}

std::vector<StepRow> load_steps_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path);
    }
    std::vector<StepRow> rows;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw TraceParseError(std::string("bad JSONL row: ") + e.what(), line_number);
        }
        StepRow row;
        try {
            row.step = j.at("step").get<std::int64_t>();
            row.train_loss = j.at("train_loss").get<double>();
            row.det_loss = j.at("det_loss").get<double>();
            row.grad_norm = j.at("grad_norm").get<double>();
            if (j.contains("ratio") && !j["ratio"].is_null()) {
                row.ratio = j["ratio"].get<double>();
            }
            if (j.contains("score") && !j["score"].is_null()) {
                row.score = j["score"].get<double>();
            }
        } catch (const json::exception& e) {
            throw TraceParseError(std::string("bad JSONL row: ") + e.what(), line_number);
        }
        rows.push_back(row);
    }
    return rows;
}

RunConfig load_record_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open " + path);
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    json j;
    try {
        j = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("run.json is not valid JSON: ") + e.what());
    }
    if (!j.contains("config")) {
        throw ConfigError("run.json has no config section: " + path);
    }
    return parse_run_config(j["config"].dump());
}

}  // namespace dvar::harness
