#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "iconary/metrics.hpp"

// Human-readable tables and machine-readable records for metric outputs.
namespace iconary::report {

std::string format_count(std::size_t n);  // 56000 -> "56k", 5100 -> "5.1k"

std::string dataset_table(const metrics::DatasetStats& stats);
nlohmann::json to_json(const metrics::DatasetStats& stats);
std::string dataset_csv(const metrics::DatasetStats& stats);

std::string metrics_table(const metrics::MetricsReport& r);
nlohmann::json to_json(const metrics::MetricsReport& r);
std::string metrics_csv(const metrics::MetricsReport& r);

nlohmann::json to_json(const metrics::HumanAiScores& s);
std::string human_ai_table(const metrics::HumanAiScores& s);

// Win (solid) and soft win (dashed) against cutoff, as a standalone SVG.
std::string curve_svg(const std::string& title, const std::string& x_label,
                      const std::vector<metrics::CutoffPoint>& points);

}  // namespace iconary::report
