#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ogcil/engine.hpp"

namespace ogcil {

class ReportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Decisions header first, then config, manifest, per-task metrics and sequence averages.
nlohmann::ordered_json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

// <dir>/report.json, <dir>/curves/task_<t>.csv (fpr,ccr), <dir>/logs/task_<t>.csv, <dir>/manifest.json.
void write_report(const std::filesystem::path& dir, const RunReport& report);
RunReport read_report(const std::filesystem::path& report_json);

// Every report.json below `root`, sorted by path.
std::vector<std::filesystem::path> find_reports(const std::filesystem::path& root);

// Paired per-seed table of mean OSCR / ACC / AUC; `a` and `b` must hold the same seeds in the same order.
std::string comparison_table(const std::string& name_a, const std::vector<RunReport>& a, const std::string& name_b,
                             const std::vector<RunReport>& b);

nlohmann::ordered_json summary_to_json(const SeedSummary& s);

// Binary checkpoint of every trainable tensor plus the prototype class ids.
void save_checkpoint(const std::filesystem::path& path, const ModelState& state);
ModelState load_checkpoint(const std::filesystem::path& path);

// Static SVG figures.
std::string svg_metric_bars(const RunReport& report);
std::string svg_curve(const std::vector<std::string>& names, const std::vector<std::vector<CurvePoint>>& curves,
                      const std::string& title);
std::string svg_oscr_overlay(const std::vector<std::string>& names, const std::vector<RunReport>& reports);

// Writes bars and per-task curves next to each report, plus overlays when there are several.
// Returns the files written.
std::vector<std::filesystem::path> plot_reports(const std::filesystem::path& root);

}  // namespace ogcil
