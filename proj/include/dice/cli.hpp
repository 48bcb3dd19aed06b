#ifndef DICE_CLI_HPP_
#define DICE_CLI_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dice/model_io.hpp"
#include "dice/scoring.hpp"

namespace dice::cli {

inline constexpr const char* kFormatVersion = "1";

/// Exit codes shared by every command.
enum ExitCode : int {
  kOk = 0,
  kBadFlags = 2,
  kBundleError = 3,
  kNumericalError = 4,
};

/// Maps an engine exception onto the exit-code contract.
int exit_code_for(const std::exception& e);

struct EvalOptions {
  std::string bundle_path;
  std::string method = "dice";
  std::string score = "energy";
  double p = 0.9;
  std::uint64_t seed = 0;
  std::optional<double> react_percentile;  // nullopt = clipping off
  bool contribution_after_clip = true;
  std::size_t contribution_subsample = 0;  // 0 = whole training set
  double shrinkage = kDefaultShrinkage;
};

/// Runs one (method, score, p) configuration against every OOD set of the
/// bundle. The result has no timestamps; see finalize_report().
nlohmann::json evaluate(const io::Bundle& bundle, const EvalOptions& opts);

struct SweepOptions {
  std::string bundle_path;
  std::vector<std::string> methods = {"dice"};
  std::vector<double> p_grid = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99};
  std::string score = "energy";
  std::uint64_t seed = 0;
  std::optional<double> react_percentile;
  bool contribution_after_clip = true;
  std::size_t contribution_subsample = 0;
  std::string validate;  // "", "noise", or the name of an OOD set
};

nlohmann::json sweep(const io::Bundle& bundle, const SweepOptions& opts);

/// Plot-ready rows of a sweep report: method,p,k,set,fpr95,auroc.
std::string sweep_csv(const nlohmann::json& report);

struct AnalyzeOptions {
  std::string bundle_path;
  std::size_t cls = 0;
  double p = 0.9;
  std::string ood;  // empty = first OOD set in name order
};

struct AnalyzeOutput {
  std::string profile_csv;  // unit,id_mean,id_var,ood_mean,ood_var in ID order
  Tensor2D covariance;      // OOD unit-contribution covariance, ID order
  nlohmann::json report;
};

AnalyzeOutput analyze(const io::Bundle& bundle, const AnalyzeOptions& opts);

/// Fixed-width summary table of an eval report.
std::string format_table(const nlohmann::json& report);

/// FNV-1a 64 of the report serialized without its timestamps and hash.
std::string determinism_hash(const nlohmann::json& report);

/// Adds determinism_hash and timestamps (the latter excluded from the hash).
void finalize_report(nlohmann::json& report, const std::string& started, const std::string& finished);

/// Entry point behind the `dice` executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dice::cli

#endif  // DICE_CLI_HPP_
