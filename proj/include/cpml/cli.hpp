#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "cpml/distance.hpp"
#include "cpml/evaluation.hpp"
#include "cpml/optimizer.hpp"

namespace cpml::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

/// Runs the `cpml` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Flat key=value file; '#' starts a comment. Keys must be among
/// lambda, p, b, step_decay, max_iters, max_linesearch, tol, constraints, seed, kind.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Applies config-file entries to a TrainConfig. Throws std::invalid_argument
/// on unknown keys or malformed values.
void apply_config(const std::map<std::string, std::string>& entries, TrainConfig& config);

/// Headerless CSV, one row per matrix row, 17 significant digits.
void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m);
/// Reads a headerless numeric CSV; "nan"/"inf" cells are accepted as such.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

std::string train_report_json(const TrainReport& report, const TrainConfig& config);
std::string experiment_report_json(const ExperimentReport& report);

}  // namespace cpml::cli
