#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "syntaxshap/attribution.hpp"
#include "syntaxshap/metrics.hpp"

namespace syntaxshap {

// Pretty-prints with floats written as %.17g; scalar arrays stay on one line.
std::string dump_json(const nlohmann::ordered_json& j, int indent = 2);

// %.17g rendering of a double; "null" for non-finite values.
std::string format_double(double v);

nlohmann::ordered_json explanation_json(const std::string& id, std::span<const Token> tokens,
                                        const AttributionResult& result);

// Reads a file written by explanation_json. Throws std::runtime_error.
ExplainedSentence explanation_from_json(const nlohmann::json& j);

nlohmann::ordered_json metric_report_json(const MetricReport& report);
// One row per sentence, then a summary row with id "__mean__".
std::string metric_report_csv(const MetricReport& report);

nlohmann::ordered_json coherency_json(const CoherencyReport& report);
nlohmann::ordered_json alignment_json(const AlignmentReport& report);

void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace syntaxshap
