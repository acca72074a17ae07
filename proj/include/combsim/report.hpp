#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include "json.hpp"

#include "combsim/model.hpp"
#include "combsim/pipeline.hpp"
#include "combsim/solver.hpp"
#include "combsim/wellposed.hpp"

namespace combsim {

// Bumped whenever a CSV column set changes.
inline constexpr const char* kCsvSchema = "combsim-csv/1";

std::string layer_csv_header(std::size_t layer);  // 0-based layer, 1-based column name
std::string diagnostics_csv_header();
std::string dependence_csv_header();
std::string operator_csv_header();

// layer_<i>.csv (i = 1..n) with every `every`-th time (the last time always).
void write_layer_csvs(const std::filesystem::path& dir, const SolutionTrajectory& tr, std::size_t every = 1);
void write_diagnostics_csv(const std::filesystem::path& file, const SolutionTrajectory& tr);
void write_dependence_csv(const std::filesystem::path& file, const DependenceReport& rep);
void write_operator_csv(const std::filesystem::path& file, const std::vector<OperatorConvergenceRow>& rows);

nlohmann::ordered_json to_json(const HypothesisReport& r);
nlohmann::ordered_json to_json(const ContractionParams& p);
nlohmann::ordered_json to_json(const DependenceReport& r);
nlohmann::ordered_json to_json(const Analysis& a);
nlohmann::ordered_json to_json(const std::vector<WindowRecord>& ws);

void render(std::ostream& os, const HypothesisReport& r);
void render(std::ostream& os, const ContractionParams& p);
void render(std::ostream& os, const DependenceReport& r);

void write_json(const std::filesystem::path& file, const nlohmann::ordered_json& j);

}  // namespace combsim
