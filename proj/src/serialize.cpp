#include "rtn/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <system_error>

namespace rtn::io {

namespace {

std::runtime_error file_error(const std::filesystem::path& path, const std::string& what) {
    return std::runtime_error(what + ": " + path.string());
}

bool parse_double(std::string_view token, double& out) {
    const char* first = token.data();
    const char* last = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

nlohmann::json rle_to_json(const ActivityTrace& trace) {
    auto runs = rle_encode(trace.states);
    nlohmann::json array = nlohmann::json::array();
    for (const auto& [state, length] : runs) {
        array.push_back(nlohmann::json::array({static_cast<int>(state), length}));
    }
    return array;
}

ActivityTrace rle_from_json(const nlohmann::json& array) {
    std::vector<std::pair<std::uint8_t, std::int64_t>> runs;
    runs.reserve(array.size());
    for (const auto& run : array) {
        runs.emplace_back(static_cast<std::uint8_t>(run.at(0).get<int>()),
                          run.at(1).get<std::int64_t>());
    }
    ActivityTrace trace;
    trace.states = rle_decode(runs);
    return trace;
}

double finite_or_infinity(const nlohmann::json& value) {
    // Non-finite doubles serialize as null; read them back as +infinity.
    return value.is_null() ? std::numeric_limits<double>::infinity() : value.get<double>();
}

nlohmann::json json_or_null(double value) {
    if (std::isfinite(value)) return value;
    return nullptr;
}

nlohmann::json series_to_json(const eval::DistributionSeries& series) {
    return nlohmann::json{{"x", series.x}, {"y", series.y}};
}

nlohmann::json confusion_to_json(const eval::ConfusionMatrix& confusion) {
    return nlohmann::json{{"true_axis", confusion.true_axis},
                          {"est_axis", confusion.est_axis},
                          {"cells", confusion.cells}};
}

void append_series_csv(std::string& out, const eval::DistributionSeries& series,
                       const std::string& label) {
    for (std::size_t i = 0; i < series.x.size(); ++i) {
        if (!label.empty()) {
            out += label;
            out += ',';
        }
        out += format_double(series.x[i]);
        out += ',';
        out += format_double(series.y[i]);
        out += '\n';
    }
}

void append_confusion_rows(std::string& out, const eval::ConfusionMatrix& confusion,
                           const std::string& noise_label) {
    for (std::size_t row = 0; row < confusion.true_axis.size(); ++row) {
        for (std::size_t col = 0; col < confusion.est_axis.size(); ++col) {
            out += noise_label;
            out += ',';
            out += std::to_string(confusion.true_axis[row]);
            out += ',';
            out += std::to_string(confusion.est_axis[col]);
            out += ',';
            out += std::to_string(confusion.at(row, col));
            out += '\n';
        }
    }
}

}  // namespace

std::string format_double(double value) {
    char buffer[32];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buffer, ptr);
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t hash = 14695981039346656037ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(buffer, 16);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw file_error(path, "cannot open for reading");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw file_error(path, "read failed");
    return content;
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
    // Write-then-rename so readers (and resumed runs) never see partial files.
    auto temp = path;
    temp += ".tmp";
    {
        std::ofstream out(temp, std::ios::binary | std::ios::trunc);
        if (!out) throw file_error(path, "cannot open for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw file_error(path, "write failed");
    }
    std::error_code ec;
    std::filesystem::rename(temp, path, ec);
    if (ec) throw file_error(path, "rename failed (" + ec.message() + ")");
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    const auto text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw file_error(path, std::string("invalid JSON (") + e.what() + ")");
    }
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& document) {
    write_text_file(path, document.dump(2) + "\n");
}

void write_signal_csv(const std::filesystem::path& path, const Signal& signal) {
    if (signal.values.empty()) throw EmptyInput("write_signal_csv: empty signal");
    std::string out = "time,value\n";
    out.reserve(out.size() + signal.values.size() * 24);
    for (std::size_t i = 0; i < signal.values.size(); ++i) {
        out += format_double(static_cast<double>(i) * signal.sample_period);
        out += ',';
        out += format_double(signal.values[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

Signal read_signal_csv(const std::filesystem::path& path,
                       std::optional<double> sample_period) {
    const auto text = read_text_file(path);
    std::vector<double> times;
    std::vector<double> values;
    int n_columns = 0;
    bool first_line = true;
    std::size_t line_start = 0;
    std::size_t line_number = 0;
    while (line_start <= text.size()) {
        auto line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::string_view line(text.data() + line_start, line_end - line_start);
        line_start = line_end + 1;
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        const auto fields = split_csv_line(line);
        if (first_line) {
            first_line = false;
            n_columns = static_cast<int>(fields.size());
            if (n_columns != 1 && n_columns != 2) {
                throw file_error(path, "signal CSV must have 1 or 2 columns");
            }
            double probe = 0.0;
            bool numeric = true;
            for (const auto& field : fields) numeric = numeric && parse_double(field, probe);
            if (!numeric) continue;  // header row
        }
        if (static_cast<int>(fields.size()) != n_columns) {
            throw file_error(path, "inconsistent column count at line " +
                                       std::to_string(line_number));
        }
        double value = 0.0;
        if (!parse_double(fields.back(), value)) {
            throw file_error(path, "invalid number at line " + std::to_string(line_number));
        }
        if (n_columns == 2) {
            double time = 0.0;
            if (!parse_double(fields.front(), time)) {
                throw file_error(path, "invalid number at line " + std::to_string(line_number));
            }
            times.push_back(time);
        }
        values.push_back(value);
    }
    if (values.empty()) throw file_error(path, "signal CSV has no samples");

    Signal signal;
    signal.values = std::move(values);
    if (n_columns == 2) {
        if (times.size() < 2) throw file_error(path, "time column needs at least 2 rows");
        const double period = times[1] - times[0];
        if (!(period > 0.0)) throw file_error(path, "time column must be increasing");
        for (std::size_t i = 1; i < times.size(); ++i) {
            const double step = times[i] - times[i - 1];
            if (std::abs(step - period) > 1e-9 * std::abs(period)) {
                throw file_error(path, "time column is not uniform at row " +
                                           std::to_string(i + 1));
            }
        }
        signal.sample_period = period;
    } else {
        if (!sample_period) {
            throw file_error(path, "value-only CSV requires an explicit sample period");
        }
        if (!(*sample_period > 0.0)) {
            throw file_error(path, "sample period must be > 0");
        }
        signal.sample_period = *sample_period;
    }
    return signal;
}

nlohmann::json truth_to_json(const TruthDocument& truth) {
    nlohmann::json sources = nlohmann::json::array();
    for (const auto& source : truth.sources) {
        sources.push_back({{"amplitude", source.amplitude},
                           {"mean_on", source.mean_on},
                           {"mean_off", source.mean_off}});
    }
    nlohmann::json activities = nlohmann::json::array();
    for (const auto& trace : truth.activities) activities.push_back(rle_to_json(trace));
    nlohmann::json renditions = nlohmann::json::array();
    for (const auto& rendition : truth.renditions) {
        renditions.push_back({{"dataset_id", rendition.dataset_id},
                              {"noise_level", rendition.noise_level},
                              {"noise_sigma", rendition.noise_sigma},
                              {"signal_file", rendition.signal_file}});
    }
    return nlohmann::json{{"base_id", truth.base_id},
                          {"baseline", truth.baseline},
                          {"sample_period", truth.sample_period},
                          {"n_samples", truth.n_samples},
                          {"sources", sources},
                          {"activities", activities},
                          {"renditions", renditions}};
}

TruthDocument truth_from_json(const nlohmann::json& document) {
    TruthDocument truth;
    truth.base_id = document.at("base_id").get<std::int64_t>();
    truth.baseline = document.at("baseline").get<double>();
    truth.sample_period = document.at("sample_period").get<double>();
    truth.n_samples = document.at("n_samples").get<std::int64_t>();
    for (const auto& source : document.at("sources")) {
        truth.sources.push_back({source.at("amplitude").get<double>(),
                                 source.at("mean_on").get<double>(),
                                 source.at("mean_off").get<double>()});
    }
    for (const auto& trace : document.at("activities")) {
        truth.activities.push_back(rle_from_json(trace));
        if (static_cast<std::int64_t>(truth.activities.back().states.size()) !=
            truth.n_samples) {
            throw std::runtime_error("truth document: activity length != n_samples");
        }
    }
    if (truth.activities.size() != truth.sources.size()) {
        throw std::runtime_error("truth document: activities vs sources count");
    }
    for (const auto& rendition : document.at("renditions")) {
        truth.renditions.push_back({rendition.at("dataset_id").get<std::int64_t>(),
                                    rendition.at("noise_level").get<double>(),
                                    rendition.at("noise_sigma").get<double>(),
                                    rendition.at("signal_file").get<std::string>()});
    }
    return truth;
}

ResultDocument make_result(std::string input, std::int64_t dataset_id,
                           const levels::FeatureModel& model,
                           const mapper::MapOutcome& outcome) {
    ResultDocument result;
    result.input = std::move(input);
    result.dataset_id = dataset_id;
    result.has_model = true;
    result.model = model;
    result.model.quantized.clear();
    if (outcome.solution) {
        result.status = "ok";
        ResultDocument::SolutionRecord record;
        record.amplitudes = outcome.solution->candidate.amplitudes;
        record.baseline = outcome.solution->candidate.baseline;
        record.cost = outcome.solution->candidate.cost;
        record.mismatch_metric = outcome.solution->candidate.mismatch_metric;
        record.violation_metric = outcome.solution->candidate.violation_metric;
        record.violations = outcome.solution->candidate.violations;
        record.transitions = outcome.solution->candidate.transitions;
        record.amplitude_repetition = outcome.solution->amplitude_repetition;
        record.traces = outcome.solution->source_traces;
        result.solution = std::move(record);
    } else {
        result.status = "nonconvergence";
        ResultDocument::FailureRecord record;
        record.reason = outcome.failure_reason;
        record.first_hypothesis = outcome.first_hypothesis;
        record.last_hypothesis = outcome.last_hypothesis;
        record.best_cost = outcome.best_cost;
        result.failure = std::move(record);
    }
    return result;
}

ResultDocument make_error_result(std::string input, std::int64_t dataset_id,
                                 std::string message) {
    ResultDocument result;
    result.input = std::move(input);
    result.dataset_id = dataset_id;
    result.status = "error";
    result.error = std::move(message);
    return result;
}

nlohmann::json result_to_json(const ResultDocument& result) {
    nlohmann::json document{{"input", result.input},
                            {"dataset_id", result.dataset_id},
                            {"status", result.status}};
    if (!result.config_hash.empty()) document["config_hash"] = result.config_hash;
    if (!result.error.empty()) document["error"] = result.error;
    if (result.has_model) {
        nlohmann::json levels = nlohmann::json::array();
        for (const auto& level : result.model.levels) {
            levels.push_back(
                {{"mu", level.mu}, {"sigma", level.sigma}, {"count", level.count}});
        }
        document["model"] = {{"sigma_init", result.model.sigma_init},
                             {"bic", result.model.bic},
                             {"n_levels", result.model.levels.size()},
                             {"levels", levels}};
    }
    if (result.solution) {
        nlohmann::json traces = nlohmann::json::array();
        for (const auto& trace : result.solution->traces) traces.push_back(rle_to_json(trace));
        document["solution"] = {{"n_sources", result.solution->amplitudes.size()},
                                {"amplitudes", result.solution->amplitudes},
                                {"baseline", result.solution->baseline},
                                {"cost", result.solution->cost},
                                {"mismatch_metric", result.solution->mismatch_metric},
                                {"violation_metric", result.solution->violation_metric},
                                {"violations", result.solution->violations},
                                {"transitions", result.solution->transitions},
                                {"amplitude_repetition", result.solution->amplitude_repetition},
                                {"traces", traces}};
    }
    if (result.failure) {
        document["failure"] = {{"reason", result.failure->reason},
                               {"first_hypothesis", result.failure->first_hypothesis},
                               {"last_hypothesis", result.failure->last_hypothesis},
                               {"best_cost", json_or_null(result.failure->best_cost)}};
    }
    return document;
}

ResultDocument result_from_json(const nlohmann::json& document) {
    ResultDocument result;
    result.input = document.at("input").get<std::string>();
    result.dataset_id = document.at("dataset_id").get<std::int64_t>();
    result.status = document.at("status").get<std::string>();
    if (document.contains("config_hash")) {
        result.config_hash = document.at("config_hash").get<std::string>();
    }
    if (document.contains("error")) result.error = document.at("error").get<std::string>();
    if (document.contains("model")) {
        result.has_model = true;
        const auto& model = document.at("model");
        result.model.sigma_init = model.at("sigma_init").get<double>();
        result.model.bic = model.at("bic").get<double>();
        for (const auto& level : model.at("levels")) {
            result.model.levels.push_back({level.at("mu").get<double>(),
                                           level.at("sigma").get<double>(),
                                           level.at("count").get<std::int64_t>()});
        }
    }
    if (document.contains("solution")) {
        const auto& solution = document.at("solution");
        ResultDocument::SolutionRecord record;
        record.amplitudes = solution.at("amplitudes").get<std::vector<double>>();
        record.baseline = solution.at("baseline").get<double>();
        record.cost = solution.at("cost").get<double>();
        record.mismatch_metric = solution.at("mismatch_metric").get<double>();
        record.violation_metric = solution.at("violation_metric").get<double>();
        record.violations = solution.at("violations").get<std::int64_t>();
        record.transitions = solution.at("transitions").get<std::int64_t>();
        record.amplitude_repetition = solution.at("amplitude_repetition").get<bool>();
        for (const auto& trace : solution.at("traces")) {
            record.traces.push_back(rle_from_json(trace));
        }
        result.solution = std::move(record);
    }
    if (document.contains("failure")) {
        const auto& failure = document.at("failure");
        ResultDocument::FailureRecord record;
        record.reason = failure.at("reason").get<std::string>();
        record.first_hypothesis = failure.at("first_hypothesis").get<int>();
        record.last_hypothesis = failure.at("last_hypothesis").get<int>();
        record.best_cost = finite_or_infinity(failure.at("best_cost"));
        result.failure = std::move(record);
    }
    return result;
}

nlohmann::json manifest_to_json(const Manifest& manifest) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& entry : manifest.entries) {
        entries.push_back({{"dataset_id", entry.dataset_id},
                           {"base_id", entry.base_id},
                           {"noise_level", entry.noise_level},
                           {"signal_file", entry.signal_file},
                           {"truth_file", entry.truth_file}});
    }
    return nlohmann::json{{"config_hash", manifest.config_hash},
                          {"base_seed", manifest.base_seed},
                          {"sample_period", manifest.sample_period},
                          {"n_datasets", manifest.entries.size()},
                          {"datasets", entries}};
}

Manifest manifest_from_json(const nlohmann::json& document) {
    Manifest manifest;
    manifest.config_hash = document.at("config_hash").get<std::string>();
    manifest.base_seed = document.at("base_seed").get<std::uint64_t>();
    manifest.sample_period = document.at("sample_period").get<double>();
    for (const auto& entry : document.at("datasets")) {
        manifest.entries.push_back({entry.at("dataset_id").get<std::int64_t>(),
                                    entry.at("base_id").get<std::int64_t>(),
                                    entry.at("noise_level").get<double>(),
                                    entry.at("signal_file").get<std::string>(),
                                    entry.at("truth_file").get<std::string>()});
    }
    return manifest;
}

nlohmann::json report_to_json(const eval::EvaluationReport& report) {
    nlohmann::json yields = nlohmann::json::array();
    for (const auto& yield : report.yields) {
        yields.push_back({{"noise_level", yield.noise_level},
                          {"datasets_total", yield.datasets_total},
                          {"datasets_converged", yield.datasets_converged},
                          {"dataset_yield_pct", yield.dataset_yield_pct},
                          {"sources_true_total", yield.sources_true_total},
                          {"sources_detected", yield.sources_detected},
                          {"source_yield_pct", yield.source_yield_pct}});
    }
    nlohmann::json confusion_by_noise = nlohmann::json::array();
    for (const auto& [noise, confusion] : report.confusion_by_noise) {
        confusion_by_noise.push_back(
            {{"noise_level", noise}, {"confusion", confusion_to_json(confusion)}});
    }
    nlohmann::json matches = nlohmann::json::array();
    for (const auto& match : report.matches) {
        nlohmann::json row{{"dataset_id", match.dataset_id},
                           {"noise_level", match.noise_level},
                           {"true_index", match.true_index},
                           {"est_index", match.est_index},
                           {"true_amplitude", match.true_amplitude},
                           {"est_amplitude", match.est_amplitude},
                           {"activity_match_pct", match.activity_match_pct},
                           {"true_mean_on", match.true_mean_on},
                           {"true_mean_off", match.true_mean_off}};
        row["est_mean_on"] =
            match.est_mean_on ? nlohmann::json(*match.est_mean_on) : nlohmann::json(nullptr);
        row["est_mean_off"] =
            match.est_mean_off ? nlohmann::json(*match.est_mean_off) : nlohmann::json(nullptr);
        matches.push_back(std::move(row));
    }
    return nlohmann::json{
        {"yields", yields},
        {"confusion", confusion_to_json(report.confusion)},
        {"confusion_by_noise", confusion_by_noise},
        {"matches", matches},
        {"amplitude_pairs", report.amplitude_pairs},
        {"mean_on_pairs", report.mean_on_pairs},
        {"mean_off_pairs", report.mean_off_pairs},
        {"amplitude_within_factor2", report.amplitude_within_factor2},
        {"mean_on_within_factor2", report.mean_on_within_factor2},
        {"mean_off_within_factor2", report.mean_off_within_factor2},
        {"series",
         {{"activity_match_cdf", series_to_json(report.activity_match_cdf)},
          {"amplitude_ccdf_est", series_to_json(report.amplitude_ccdf_est)},
          {"amplitude_ccdf_true", series_to_json(report.amplitude_ccdf_true)},
          {"mean_on_cdf_est", series_to_json(report.mean_on_cdf_est)},
          {"mean_on_cdf_true", series_to_json(report.mean_on_cdf_true)},
          {"mean_off_cdf_est", series_to_json(report.mean_off_cdf_est)},
          {"mean_off_cdf_true", series_to_json(report.mean_off_cdf_true)}}}};
}

void write_report_csvs(const std::filesystem::path& directory,
                       const eval::EvaluationReport& report) {
    std::string yields = "noise_level,datasets_total,datasets_converged,dataset_yield_pct,"
                         "sources_true_total,sources_detected,source_yield_pct\n";
    for (const auto& yield : report.yields) {
        yields += format_double(yield.noise_level);
        yields += ',';
        yields += std::to_string(yield.datasets_total);
        yields += ',';
        yields += std::to_string(yield.datasets_converged);
        yields += ',';
        yields += format_double(yield.dataset_yield_pct);
        yields += ',';
        yields += std::to_string(yield.sources_true_total);
        yields += ',';
        yields += std::to_string(yield.sources_detected);
        yields += ',';
        yields += format_double(yield.source_yield_pct);
        yields += '\n';
    }
    write_text_file(directory / "yields.csv", yields);

    std::string confusion = "noise_level,true_n,est_n,count\n";
    append_confusion_rows(confusion, report.confusion, "all");
    for (const auto& [noise, matrix] : report.confusion_by_noise) {
        append_confusion_rows(confusion, matrix, format_double(noise));
    }
    write_text_file(directory / "confusion.csv", confusion);

    std::string matches =
        "dataset_id,noise_level,true_index,est_index,true_amplitude,est_amplitude,"
        "activity_match_pct,true_mean_on,est_mean_on,true_mean_off,est_mean_off\n";
    for (const auto& match : report.matches) {
        matches += std::to_string(match.dataset_id);
        matches += ',';
        matches += format_double(match.noise_level);
        matches += ',';
        matches += std::to_string(match.true_index);
        matches += ',';
        matches += std::to_string(match.est_index);
        matches += ',';
        matches += format_double(match.true_amplitude);
        matches += ',';
        matches += format_double(match.est_amplitude);
        matches += ',';
        matches += format_double(match.activity_match_pct);
        matches += ',';
        matches += format_double(match.true_mean_on);
        matches += ',';
        matches += match.est_mean_on ? format_double(*match.est_mean_on) : std::string();
        matches += ',';
        matches += format_double(match.true_mean_off);
        matches += ',';
        matches += match.est_mean_off ? format_double(*match.est_mean_off) : std::string();
        matches += '\n';
    }
    write_text_file(directory / "matches.csv", matches);

    std::string activity = "x,y\n";
    append_series_csv(activity, report.activity_match_cdf, "");
    write_text_file(directory / "activity_match_cdf.csv", activity);

    std::string amplitude = "series,x,y\n";
    append_series_csv(amplitude, report.amplitude_ccdf_est, "est");
    append_series_csv(amplitude, report.amplitude_ccdf_true, "true");
    write_text_file(directory / "amplitude_ccdf.csv", amplitude);

    std::string dwell_on = "series,x,y\n";
    append_series_csv(dwell_on, report.mean_on_cdf_est, "est");
    append_series_csv(dwell_on, report.mean_on_cdf_true, "true");
    write_text_file(directory / "dwell_on_cdf.csv", dwell_on);

    std::string dwell_off = "series,x,y\n";
    append_series_csv(dwell_off, report.mean_off_cdf_est, "est");
    append_series_csv(dwell_off, report.mean_off_cdf_true, "true");
    write_text_file(directory / "dwell_off_cdf.csv", dwell_off);
}

std::string dataset_signal_name(std::int64_t dataset_id) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "signal_%06lld.csv",
                  static_cast<long long>(dataset_id));
    return buffer;
}

std::string dataset_result_name(std::int64_t dataset_id) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "result_%06lld.json",
                  static_cast<long long>(dataset_id));
    return buffer;
}

std::string truth_file_name(std::int64_t base_id) {
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "truth_%06lld.json",
                  static_cast<long long>(base_id));
    return buffer;
}

}  // namespace rtn::io
