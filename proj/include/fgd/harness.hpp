#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fgd/linmodel.hpp"
#include "fgd/metrics.hpp"
#include "fgd/optim.hpp"

namespace fgd {

inline constexpr std::string_view kLibraryVersion = "0.1.0";

enum class Study { DimSweep, RepsSweep, RankSweep, StepTrace };

std::string_view study_name(Study study);
/// Accepts the names returned by study_name ("dim_sweep", ...).
Study parse_study(std::string_view name);

/*!
 * How the (c1, c2) of every TheoremForm rule in a study are chosen.
 *
 * MeanNorm:  c1 = 2 / lmin!=0, c2 = (tr / lmin!=0)(2 lmax + tr / ell), i.e. the
 *            theorem2 constants with 4b replaced by E|X|^2 = tr(Sigma).
 * Theorem2:  theorem2_constants verbatim.
 */
enum class SchedulePolicy { MeanNorm, Theorem2 };

std::string_view schedule_policy_name(SchedulePolicy policy);
SchedulePolicy parse_schedule_policy(std::string_view name);

ScheduleConstants mean_norm_constants(const SecondMomentSummary& sigma, int ell);

struct ExperimentPlan
{
    Study study = Study::StepTrace;
    /// d for DimSweep and StepTrace, ell for RepsSweep, s for RankSweep.
    std::vector<int> axis_values;
    /// Ambient dimension for RepsSweep and RankSweep.
    int d = 10;
    long n_samples = 1000;
    int repetitions = 10;
    std::uint64_t master_seed = 0;
    /// Explicit step grid; empty means the default grid for the study.
    std::vector<long> checkpoints;
    /// Size of the default log grid (StepTrace only).
    int n_checkpoints = 30;
    long first_checkpoint = 10;
    SchedulePolicy schedule_policy = SchedulePolicy::MeanNorm;
    std::optional<double> c1;
    std::optional<double> c2;
    /// Constant rate for every optimizer instead of the TheoremForm rule.
    std::optional<double> constant_alpha;
    /// Multiplier of the FGD rates used by aFGD.
    double afgd_rate_scale = 1.2533141373155003;  // sqrt(pi / 2)
    double half_width = CovariateSpec::kUnitVarianceHalfWidth;
    double noise_std = 1.0;
    int threads = 1;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Laptop-sized defaults used by the acceptance suite.
ExperimentPlan desk_plan(Study study);
/// The sizes of the original simulation study. Expect hours of CPU time for
/// RepsSweep and tens of minutes for the others.
ExperimentPlan paper_plan(Study study);

/// round(10^t) for t equally spaced on [log10 lo, log10 hi], deduplicated.
std::vector<long> log_grid(long lo, long hi, int count);

/// Checkpoint grid the plan resolves to: explicit list, log grid for
/// StepTrace, final step only for the sweeps.
std::vector<long> resolve_checkpoints(const ExperimentPlan& plan);

/// splitmix-style avalanche over the packed indices. Indices must be nonnegative.
std::uint64_t derive_seed(std::uint64_t master_seed, std::int64_t axis_index,
                          std::int64_t optimizer_index, std::int64_t repetition_index);

struct SeriesRecord
{
    int axis_value = 0;
    /// Role of the optimizer in the study, stable across axis values:
    /// "SGD", "FGD(1)", "FGD(d)", "FGD(s)", "FGD(ell)", "aFGD(1)", "aFGD(d)",
    /// and "+epochs" suffixed variants for the epoch rows.
    std::string role;
    OptimizerKind optimizer;
    /// Passes through a fixed dataset; 0 for streaming single-pass runs.
    int epochs = 0;
    std::string metric_name;
    std::vector<RepSeries> reps;
    MetricSeries summary;
};

struct RunRecord
{
    ExperimentPlan plan;
    std::vector<long> checkpoints;
    std::vector<SeriesRecord> series;
    double wall_seconds = 0.0;
    std::string version{kLibraryVersion};

    /// Throws std::out_of_range if absent.
    const SeriesRecord& find(int axis_value, std::string_view role) const;
};

RunRecord run_dim_sweep(const ExperimentPlan& plan);
RunRecord run_reps_sweep(const ExperimentPlan& plan);
RunRecord run_rank_sweep(const ExperimentPlan& plan);
RunRecord run_step_trace(const ExperimentPlan& plan);
/// Dispatches on plan.study.
RunRecord run_study(const ExperimentPlan& plan);

}  // namespace fgd
