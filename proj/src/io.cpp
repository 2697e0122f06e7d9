#include "drr/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "drr/errors.hpp"

namespace drr {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

double parse_double(const std::string& text, std::size_t row) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw DataError("row " + std::to_string(row) + ": cannot parse number '" +
                        text + "'");
    }
    if (!std::isfinite(value)) {
        throw DataError("row " + std::to_string(row) + ": non-finite score");
    }
    return value;
}

int parse_label(const std::string& text, std::size_t row) {
    int value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end || value < 0) {
        throw DataError("row " + std::to_string(row) +
                        ": label must be a non-negative integer, got '" + text + "'");
    }
    return value;
}

void validate_probability_row(const std::vector<double>& scores, std::size_t row) {
    double sum = 0.0;
    for (double v : scores) {
        if (v < -1e-12) {
            throw DataError("row " + std::to_string(row) + ": negative probability");
        }
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-9) {
        throw DataError("row " + std::to_string(row) + ": probabilities sum to " +
                        std::to_string(sum) + ", expected 1 within 1e-9");
    }
}

Dataset finalize_dataset(std::vector<PredictionRecord> records, ScoreType type) {
    if (records.empty()) {
        throw DataError("input file holds no records");
    }
    Dataset data;
    data.classes = records.front().scores.size();
    data.all_labeled = true;
    std::unordered_set<std::string> seen;
    seen.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.scores.size() != data.classes) {
            throw DataError("row " + std::to_string(i) + ": expected " +
                            std::to_string(data.classes) + " scores, got " +
                            std::to_string(r.scores.size()));
        }
        if (!seen.insert(r.id).second) {
            throw DataError("duplicate id: " + r.id);
        }
        if (!r.label.has_value()) data.all_labeled = false;
        if (type == ScoreType::probs) validate_probability_row(r.scores, i);
    }
    if (data.classes < 2) {
        throw DataError("records need at least two per-class scores");
    }
    data.records = std::move(records);
    return data;
}

Dataset ingest_csv(const std::string& path, ScoreType type) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open input file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("empty input file: " + path);
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "id") {
        throw DataError("csv header must start with 'id': " + path);
    }
    const bool has_label_col = header.size() > 1 && header[1] == "label";
    const std::size_t score_start = has_label_col ? 2 : 1;
    for (std::size_t i = score_start; i < header.size(); ++i) {
        const std::string expected = "s" + std::to_string(i - score_start);
        if (header[i] != expected) {
            throw DataError("csv header column " + std::to_string(i) +
                            " must be '" + expected + "', got '" + header[i] + "'");
        }
    }
    const std::size_t classes = header.size() - score_start;
    if (classes == 0) {
        throw DataError("csv header declares no score columns: " + path);
    }

    std::vector<PredictionRecord> records;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        row++;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("row " + std::to_string(row) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        }
        PredictionRecord rec;
        rec.id = cells[0];
        if (rec.id.empty()) {
            throw DataError("row " + std::to_string(row) + ": empty id");
        }
        if (has_label_col && !cells[1].empty()) {
            rec.label = parse_label(cells[1], row);
        }
        rec.scores.reserve(classes);
        for (std::size_t i = score_start; i < cells.size(); ++i) {
            rec.scores.push_back(parse_double(cells[i], row));
        }
        records.push_back(std::move(rec));
    }
    return finalize_dataset(std::move(records), type);
}

Dataset ingest_jsonl(const std::string& path, ScoreType type) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open input file: " + path);
    }
    std::vector<PredictionRecord> records;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        row++;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("row " + std::to_string(row) + ": invalid json (" +
                            e.what() + ")");
        }
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("scores")) {
            throw DataError("row " + std::to_string(row) +
                            ": expected an object with 'id' and 'scores'");
        }
        PredictionRecord rec;
        if (obj["id"].is_string()) {
            rec.id = obj["id"].get<std::string>();
        } else if (obj["id"].is_number_integer()) {
            rec.id = std::to_string(obj["id"].get<long long>());
        } else {
            throw DataError("row " + std::to_string(row) + ": id must be string or integer");
        }
        if (obj.contains("label") && !obj["label"].is_null()) {
            if (!obj["label"].is_number_integer() || obj["label"].get<long long>() < 0) {
                throw DataError("row " + std::to_string(row) +
                                ": label must be a non-negative integer");
            }
            rec.label = static_cast<int>(obj["label"].get<long long>());
        }
        if (!obj["scores"].is_array() || obj["scores"].empty()) {
            throw DataError("row " + std::to_string(row) + ": scores must be a non-empty array");
        }
        for (const auto& v : obj["scores"]) {
            if (!v.is_number()) {
                throw DataError("row " + std::to_string(row) + ": scores must be numbers");
            }
            const double value = v.get<double>();
            if (!std::isfinite(value)) {
                throw DataError("row " + std::to_string(row) + ": non-finite score");
            }
            rec.scores.push_back(value);
        }
        records.push_back(std::move(rec));
    }
    return finalize_dataset(std::move(records), type);
}

json task_to_json(const SyntheticTask& task) {
    json j;
    j["ids"] = task.marginal.ids();
    j["weights"] = task.marginal.weights();
    j["posterior"] = task.posterior;
    j["label_noise_rate"] = task.label_noise_rate;
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot open output file: " + path);
    }
    out << text;
    if (!out) {
        throw DataError("failed writing output file: " + path);
    }
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open file: " + path);
    }
    try {
        json j;
        in >> j;
        return j;
    } catch (const json::exception& e) {
        throw DataError("invalid json in " + path + ": " + e.what());
    }
}

}  // namespace

FileFormat file_format_from_string(const std::string& name) {
    if (name == "csv") return FileFormat::csv;
    if (name == "jsonl") return FileFormat::jsonl;
    throw ConfigError("unknown file format: " + name);
}

ScoreType score_type_from_string(const std::string& name) {
    if (name == "probs" || name == "probabilities") return ScoreType::probs;
    if (name == "logits") return ScoreType::logits;
    throw ConfigError("unknown score type: " + name);
}

std::string to_string(FileFormat format) {
    return format == FileFormat::csv ? "csv" : "jsonl";
}

std::string to_string(ScoreType type) {
    return type == ScoreType::probs ? "probs" : "logits";
}

Dataset ingest(const std::string& path, FileFormat format, ScoreType type) {
    return format == FileFormat::csv ? ingest_csv(path, type)
                                     : ingest_jsonl(path, type);
}

std::string format_significant(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%.12g", value);
    return buffer;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "tau,coverage,accuracy,selective_risk,n_accepted\n";
    for (const auto& row : rows) {
        out << format_significant(row.tau) << ',' << format_significant(row.coverage)
            << ',';
        if (row.accuracy.has_value()) out << format_significant(*row.accuracy);
        out << ',';
        if (row.selective_risk.has_value()) {
            out << format_significant(*row.selective_risk);
        }
        out << ',' << row.n_accepted << '\n';
    }
    write_text(path, out.str());
}

void write_predictions_csv(const std::string& path,
                           const std::vector<PredictionRecord>& records) {
    std::ostringstream out;
    out << "id,label";
    const std::size_t classes = records.empty() ? 0 : records.front().scores.size();
    for (std::size_t k = 0; k < classes; ++k) out << ",s" << k;
    out << '\n';
    for (const auto& rec : records) {
        out << rec.id << ',';
        if (rec.label.has_value()) out << *rec.label;
        for (double v : rec.scores) out << ',' << format_significant(v);
        out << '\n';
    }
    write_text(path, out.str());
}

void save_rejector(const std::string& path, const RejectorArtifact& artifact) {
    json j;
    j["kind"] = to_string(artifact.rejector.spec.kind);
    j["alpha"] = artifact.rejector.spec.alpha;
    j["lambda"] = artifact.rejector.spec.lambda;
    j["normalizer"] = artifact.rejector.normalizer;
    j["mean_risk"] = artifact.rejector.mean_risk;
    j["kl_shift"] = artifact.rejector.kl_shift;
    j["kl_scale"] = artifact.rejector.kl_scale;
    j["loss"] = to_string(artifact.loss);
    j["prob_floor"] = artifact.prob_floor;
    if (artifact.temperature.has_value()) {
        j["temperature"] = *artifact.temperature;
    } else {
        j["temperature"] = nullptr;
    }
    j["fit_support_size"] = artifact.fit_support_size;
    j["seed"] = artifact.seed;
    write_text(path, j.dump(2) + "\n");
}

RejectorArtifact load_rejector(const std::string& path) {
    const json j = read_json_file(path);
    RejectorArtifact artifact;
    try {
        artifact.rejector.spec.kind =
            rejector_kind_from_string(j.at("kind").get<std::string>());
        artifact.rejector.spec.alpha = j.at("alpha").get<double>();
        artifact.rejector.spec.lambda = j.at("lambda").get<double>();
        artifact.rejector.normalizer = j.at("normalizer").get<double>();
        artifact.rejector.mean_risk = j.at("mean_risk").get<double>();
        artifact.rejector.kl_shift = j.at("kl_shift").get<double>();
        artifact.rejector.kl_scale = j.at("kl_scale").get<double>();
        artifact.loss = loss_kind_from_string(j.at("loss").get<std::string>());
        artifact.prob_floor = j.at("prob_floor").get<double>();
        if (j.contains("temperature") && !j["temperature"].is_null()) {
            artifact.temperature = j["temperature"].get<double>();
        }
        artifact.fit_support_size = j.at("fit_support_size").get<std::size_t>();
        artifact.seed = j.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw DataError("malformed rejector file " + path + ": " + e.what());
    }
    return artifact;
}

void save_calibration(const std::string& path, const CalibrationModel& model) {
    json j;
    j["temperature"] = model.temperature;
    j["final_nll"] = model.final_nll;
    j["at_boundary"] = model.at_boundary;
    write_text(path, j.dump(2) + "\n");
}

CalibrationModel load_calibration(const std::string& path) {
    const json j = read_json_file(path);
    CalibrationModel model;
    try {
        model.temperature = j.at("temperature").get<double>();
        model.final_nll = j.at("final_nll").get<double>();
        model.at_boundary = j.at("at_boundary").get<bool>();
    } catch (const json::exception& e) {
        throw DataError("malformed calibration file " + path + ": " + e.what());
    }
    return model;
}

void save_task(const std::string& path, const SyntheticTask& task) {
    write_text(path, task_to_json(task).dump(2) + "\n");
}

SyntheticTask load_task(const std::string& path) {
    const json j = read_json_file(path);
    SyntheticTask task;
    try {
        auto ids = j.at("ids").get<std::vector<std::string>>();
        auto weights = j.at("weights").get<std::vector<double>>();
        task.marginal = DiscreteDistribution::make(std::move(ids), std::move(weights));
        task.posterior = j.at("posterior").get<std::vector<std::vector<double>>>();
        task.label_noise_rate = j.at("label_noise_rate").get<double>();
    } catch (const json::exception& e) {
        throw DataError("malformed task file " + path + ": " + e.what());
    }
    validate_task(task);
    return task;
}

}  // namespace drr
