#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fgd/harness.hpp"

namespace fgd::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitCheckFailed = 2,
    kExitRuntime = 3,
};

struct VerifyOptions
{
    long mc_samples = 1000000;
    int instances = 5;
    /// Replaces sqrt(2/pi) in the sign-moment row (mutation check only).
    std::optional<double> sign_constant;
    double tolerance_se = 5.0;
    long bias_trajectories = 20000;
    long bias_mc_samples = 100000;
    double bias_tolerance_se = 4.0;
};

struct BoundOptions
{
    /// 2: FGD(ell) MSPE bound; 4: aFGD(ell) MSE bound.
    int theorem = 2;
    int d = 2;
    long n_samples = 10000;
    int repetitions = 20;
    int ell = 1;
    std::optional<double> c1;
    std::optional<double> c2;
    std::optional<double> constant_alpha;
    int n_checkpoints = 30;
    double half_width = CovariateSpec::kUnitVarianceHalfWidth;
    double tolerance_se = 3.0;
};

struct Config
{
    ExperimentPlan plan;
    VerifyOptions verify;
    BoundOptions bound;
    std::filesystem::path out_dir = "out";
    bool paper_scale = false;
};

/// Command-line values that override the config file.
struct Overrides
{
    std::optional<std::filesystem::path> config_path;
    std::optional<std::string> study;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
    std::optional<int> repetitions;
    std::optional<int> threads;
    bool paper_scale = false;
};

/*!
 * Parses INI text. Sections: [run] (study, seed, out, threads, repetitions,
 * paper_scale), one section per study named as in study_name, [verify] and
 * [bound]. Unknown sections or keys raise ConfigError naming them. Only the
 * section of the selected study is applied on top of the desk (or paper)
 * preset; the others are still checked for unknown keys.
 */
Config parse_config(const std::string& text, const Overrides& overrides = {});
/// Reads the file named in `overrides` (if any) and calls parse_config.
Config resolve_config(const Overrides& overrides);

/// Long-format CSV: study,axis_value,optimizer,ell,repetition,step,metric_name,value.
/// One row per repetition and checkpoint, then "mean" and "std" rows.
std::string run_csv(const RunRecord& record);
/// Resolved configuration, policies, version and wall time.
nlohmann::ordered_json run_metadata(const RunRecord& record, const Config& config);

/// %.17g formatting used by every CSV writer.
std::string format_double(double v);

struct VerifyRow
{
    std::string identity;
    int instance = 0;
    double exact = 0.0;
    double empirical = 0.0;
    double deviation = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

/// Runs the moment identities on `instances` randomized inputs each, plus the
/// bias-product check. Each row reports the entry with the largest
/// standardized deviation.
std::vector<VerifyRow> run_oracle_suite(const VerifyOptions& options, std::uint64_t seed);

struct BoundRow
{
    long step = 0;
    double measured_mean = 0.0;
    double measured_std = 0.0;
    double bound = 0.0;
};

struct BoundResult
{
    std::vector<BoundRow> rows;
    Schedule schedule;
    int repetitions = 0;
    /// Rows where measured_mean > bound + tolerance_se * std / sqrt(reps).
    std::vector<long> violations;
};

/// Throws InadmissibleError if the schedule does not meet the bound's assumptions.
BoundResult run_bound_check(const BoundOptions& options, std::uint64_t seed);

std::string bound_csv(const BoundResult& result);

int cmd_run(const Config& config, std::ostream& log);
int cmd_verify(const Config& config, std::ostream& out);
int cmd_bound(const Config& config, std::ostream& out);

/// Full command line: subcommands run, verify and bound. Maps errors to ExitCode.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fgd::cli
