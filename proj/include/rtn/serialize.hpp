#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rtn/core.hpp"
#include "rtn/evaluation.hpp"
#include "rtn/levels_extractor.hpp"
#include "rtn/sources_mapper.hpp"

namespace rtn::io {

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double value);

/// FNV-1a 64-bit hash as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Sorted keys, two-space indent, trailing newline: byte-stable given equal content.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& document);

/// Signal CSV. Writing emits `time,value` with time = index * sample_period.
/// Reading accepts `time,value` (sample period inferred from the first two
/// rows and checked uniform to 1e-9 relative) or a single `value` column, in
/// which case the caller must supply the sample period. A non-numeric first
/// row is treated as a header.
void write_signal_csv(const std::filesystem::path& path, const Signal& signal);
Signal read_signal_csv(const std::filesystem::path& path,
                       std::optional<double> sample_period = std::nullopt);

/// Ground truth for one clean realization plus every noisy rendition of it.
struct TruthRendition {
    std::int64_t dataset_id = 0;
    double noise_level = 0.0;
    double noise_sigma = 0.0;
    std::string signal_file;
};
struct TruthDocument {
    std::int64_t base_id = 0;
    double baseline = 0.0;
    double sample_period = 1.0;
    std::int64_t n_samples = 0;
    std::vector<RtnSource> sources;
    std::vector<ActivityTrace> activities;  ///< run-length encoded on disk
    std::vector<TruthRendition> renditions;
};
nlohmann::json truth_to_json(const TruthDocument& truth);
TruthDocument truth_from_json(const nlohmann::json& document);

/// Per-signal analysis result. Exactly one status:
///   "ok"             model + solution present
///   "nonconvergence" model + failure record present
///   "error"          error message present (model optional)
struct ResultDocument {
    std::string input;             ///< signal file name
    std::int64_t dataset_id = -1;  ///< -1 when unknown
    std::string config_hash;       ///< empty when not part of a batch
    std::string status;
    std::string error;

    bool has_model = false;
    levels::FeatureModel model;  ///< quantized left empty on disk

    struct SolutionRecord {
        std::vector<double> amplitudes;
        double baseline = 0.0;
        double cost = 0.0;
        double mismatch_metric = 0.0;
        double violation_metric = 0.0;
        std::int64_t violations = 0;
        std::int64_t transitions = 0;
        bool amplitude_repetition = false;
        std::vector<ActivityTrace> traces;  ///< run-length encoded on disk
    };
    std::optional<SolutionRecord> solution;

    struct FailureRecord {
        std::string reason;
        int first_hypothesis = 0;
        int last_hypothesis = 0;
        double best_cost = 0.0;
    };
    std::optional<FailureRecord> failure;
};
ResultDocument make_result(std::string input, std::int64_t dataset_id,
                           const levels::FeatureModel& model,
                           const mapper::MapOutcome& outcome);
ResultDocument make_error_result(std::string input, std::int64_t dataset_id,
                                 std::string message);
nlohmann::json result_to_json(const ResultDocument& result);
ResultDocument result_from_json(const nlohmann::json& document);

struct ManifestEntry {
    std::int64_t dataset_id = 0;
    std::int64_t base_id = 0;
    double noise_level = 0.0;
    std::string signal_file;
    std::string truth_file;
};
struct Manifest {
    std::string config_hash;
    std::uint64_t base_seed = 0;
    double sample_period = 1.0;
    std::vector<ManifestEntry> entries;
};
nlohmann::json manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& document);

nlohmann::json report_to_json(const eval::EvaluationReport& report);
/// Plot-ready CSVs next to the report: yields, confusion (long format with a
/// noise column; the "all" row spans every noise level), per-source matches,
/// and the distribution series.
void write_report_csvs(const std::filesystem::path& directory,
                       const eval::EvaluationReport& report);

std::string dataset_signal_name(std::int64_t dataset_id);
std::string dataset_result_name(std::int64_t dataset_id);
std::string truth_file_name(std::int64_t base_id);

}  // namespace rtn::io
