#include "fgd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <stdexcept>
#include <thread>

#include "fgd/errors.hpp"

namespace fgd {

namespace {

constexpr std::int64_t kProblemSlot = 0;
constexpr std::int64_t kDataSlot = 1;

// Perturbation streams are keyed by the number of inner updates only, not by
// the position in the study, the epoch count or the FGD/aFGD variant. So
// coinciding configurations (FGD(1) and FGD(d) at d = 1, one epoch and one pass)
// see the same draws, and aFGD(l) is compared with FGD(l) on common draws.
std::int64_t perturbation_slot(const OptimizerKind& opt)
{
    return 16 + opt.inner_updates();
}

struct Problem
{
    CovariateSpec covariates;
    Vector theta_star;
    SecondMomentSummary sigma;
};

Problem cube_problem(int d, ThetaStarPolicy policy, const ExperimentPlan& plan, Rng& rng)
{
    CovariateSpec spec = CovariateSpec::full_cube(d, plan.half_width);
    Vector theta_star = draw_theta_star(d, policy, rng);
    return {spec, std::move(theta_star), second_moment(spec)};
}

Problem low_rank_problem(int d, int s, const ExperimentPlan& plan, Rng& rng)
{
    Vector theta_star = draw_theta_star(d, ThetaStarPolicy::UniformBox, rng);
    CovariateSpec spec = CovariateSpec::low_rank(draw_embedding(d, s, rng), plan.half_width);
    return {spec, std::move(theta_star), second_moment(spec)};
}

Schedule optimizer_schedule(const ExperimentPlan& plan, const SecondMomentSummary& sigma,
                            double b, const OptimizerKind& opt)
{
    const int ell = opt.inner_updates();
    Schedule sched;
    if (plan.constant_alpha) {
        sched = Schedule::constant(*plan.constant_alpha, ell);
    } else {
        ScheduleConstants c = plan.schedule_policy == SchedulePolicy::Theorem2
                                  ? theorem2_constants(sigma, b, ell)
                                  : mean_norm_constants(sigma, ell);
        if (plan.c1)
            c.c1 = *plan.c1;
        if (plan.c2)
            c.c2 = *plan.c2;
        sched = Schedule::theorem_form(c.c1, c.c2, ell);
    }
    if (opt.method == Method::Afgd)
        sched = sched.scaled(plan.afgd_rate_scale);
    return sched;
}

using MetricFn = std::function<double(const Vector& theta, const Problem& problem)>;

struct SeriesJob
{
    int axis_index = 0;
    int problem_axis_index = 0;
    int epochs = 0;
};

struct StudyLayout
{
    std::vector<SeriesRecord> series;
    std::vector<SeriesJob> jobs;
};

// Runs `body(i)` for i in [0, count) on `threads` workers. Each index writes
// only its own slot; the first failing index (in index order) is rethrown.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body)
{
    unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(worker);
    }
    for (const std::exception_ptr& e : errors) {
        if (e)
            std::rethrow_exception(e);
    }
}

using ProblemFactory = std::function<Problem(int axis_value, Rng& rng)>;

RunRecord execute(const ExperimentPlan& plan, StudyLayout layout, const ProblemFactory& make_problem,
                  MetricKind kind, const MetricFn& metric)
{
    const auto started = std::chrono::steady_clock::now();
    RunRecord record;
    record.plan = plan;
    record.checkpoints = resolve_checkpoints(plan);
    const std::vector<long>& grid = record.checkpoints;

    const std::size_t reps = static_cast<std::size_t>(plan.repetitions);
    for (SeriesRecord& s : layout.series)
        s.reps.assign(reps, RepSeries{});

    const std::size_t tasks = layout.series.size() * reps;
    parallel_for(tasks, plan.threads, [&](std::size_t task) {
        const std::size_t si = task / reps;
        const int rep = static_cast<int>(task % reps);
        SeriesRecord& series = layout.series[si];
        const SeriesJob& job = layout.jobs[si];

        Rng problem_rng(derive_seed(plan.master_seed, job.problem_axis_index, kProblemSlot, rep));
        const Problem problem = make_problem(series.axis_value, problem_rng);
        const ModelSpec model(problem.covariates, problem.theta_star, plan.noise_std);
        const Schedule sched =
            optimizer_schedule(plan, problem.sigma, model.b_bound(), series.optimizer);

        Rng data_rng(derive_seed(plan.master_seed, job.problem_axis_index, kDataSlot, rep));
        Rng xi_rng(derive_seed(plan.master_seed, job.axis_index,
                               perturbation_slot(series.optimizer), rep));
        const Vector theta0 = Vector::Zero(model.dim());

        RepSeries out;
        out.steps = grid;
        out.values.reserve(grid.size());
        if (job.epochs == 0) {
            const auto path = run_trajectory(model, series.optimizer, sched, plan.n_samples, grid,
                                             theta0, data_rng, xi_rng);
            for (const Checkpoint& c : path)
                out.values.push_back(metric(c.theta, problem));
        } else {
            const auto path = run_trajectory_epochs(model, series.optimizer, sched, plan.n_samples,
                                                    job.epochs, theta0, data_rng, xi_rng);
            out.values.push_back(metric(path.back().theta, problem));
        }
        series.reps[static_cast<std::size_t>(rep)] = std::move(out);
    });

    for (SeriesRecord& s : layout.series)
        s.summary = aggregate(kind, s.reps);
    record.series = std::move(layout.series);
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return record;
}

void add_series(StudyLayout& layout, int axis_index, int problem_axis_index, int axis_value,
                std::string role, OptimizerKind opt, int epochs, const std::string& metric_name)
{
    SeriesRecord s;
    s.axis_value = axis_value;
    s.role = std::move(role);
    s.optimizer = opt;
    s.epochs = epochs;
    s.metric_name = metric_name;
    layout.series.push_back(std::move(s));
    layout.jobs.push_back({axis_index, problem_axis_index, epochs});
}

void require_study(const ExperimentPlan& plan, Study study)
{
    if (plan.study != study)
        throw ConfigError(std::string("plan study is ") + std::string(study_name(plan.study))
                          + ", expected " + std::string(study_name(study)));
    plan.validate();
}

}  // namespace

std::string_view study_name(Study study)
{
    switch (study) {
    case Study::DimSweep:
        return "dim_sweep";
    case Study::RepsSweep:
        return "reps_sweep";
    case Study::RankSweep:
        return "rank_sweep";
    case Study::StepTrace:
        return "step_trace";
    }
    return "unknown";
}

Study parse_study(std::string_view name)
{
    for (Study s : {Study::DimSweep, Study::RepsSweep, Study::RankSweep, Study::StepTrace}) {
        if (study_name(s) == name)
            return s;
    }
    throw ConfigError("study: unknown value '" + std::string(name)
                      + "' (expected dim_sweep, reps_sweep, rank_sweep or step_trace)");
}

std::string_view schedule_policy_name(SchedulePolicy policy)
{
    return policy == SchedulePolicy::MeanNorm ? "mean_norm" : "theorem2";
}

SchedulePolicy parse_schedule_policy(std::string_view name)
{
    if (name == "mean_norm")
        return SchedulePolicy::MeanNorm;
    if (name == "theorem2")
        return SchedulePolicy::Theorem2;
    throw ConfigError("schedule_policy: unknown value '" + std::string(name)
                      + "' (expected mean_norm or theorem2)");
}

ScheduleConstants mean_norm_constants(const SecondMomentSummary& sigma, int ell)
{
    if (ell < 1)
        throw ConfigError("mean_norm_constants: ell must be at least 1");
    if (!(sigma.trace > 0.0) || !(sigma.lambda_min_nonzero > 0.0))
        throw NumericalError("mean_norm_constants: degenerate second moment");
    const double lmin = sigma.lambda_min_nonzero;
    return {2.0 / lmin, (sigma.trace / lmin) * (2.0 * sigma.lambda_max + sigma.trace / ell)};
}

void ExperimentPlan::validate() const
{
    if (axis_values.empty())
        throw ConfigError("axis_values: must be nonempty");
    for (std::size_t i = 0; i < axis_values.size(); ++i) {
        if (axis_values[i] < 1)
            throw ConfigError("axis_values: entries must be positive");
        if (i > 0 && axis_values[i] <= axis_values[i - 1])
            throw ConfigError("axis_values: must be strictly increasing");
    }
    if (d < 1)
        throw ConfigError("d: must be positive");
    if (study == Study::RankSweep && axis_values.back() > d)
        throw ConfigError("axis_values: rank s must not exceed d");
    if (n_samples < 1)
        throw ConfigError("n_samples: must be positive");
    if (repetitions < 1)
        throw ConfigError("repetitions: must be at least 1");
    if (n_checkpoints < 1)
        throw ConfigError("n_checkpoints: must be positive");
    if (first_checkpoint < 1)
        throw ConfigError("first_checkpoint: must be positive");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 0 || checkpoints[i] > n_samples)
            throw ConfigError("checkpoints: entries must lie in [0, n_samples]");
        if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
            throw ConfigError("checkpoints: must be strictly increasing");
    }
    if (study != Study::StepTrace && !checkpoints.empty()
        && (checkpoints.size() != 1 || checkpoints.front() != n_samples))
        throw ConfigError("checkpoints: sweeps record the final step only");
    if (c1 && !(*c1 > 0.0))
        throw ConfigError("c1: must be positive");
    if (c2 && !(*c2 > 0.0))
        throw ConfigError("c2: must be positive");
    if (constant_alpha && !(*constant_alpha > 0.0))
        throw ConfigError("alpha: must be positive");
    if (!(afgd_rate_scale > 0.0))
        throw ConfigError("afgd_rate_scale: must be positive");
    if (!(half_width > 0.0))
        throw ConfigError("half_width: must be positive");
    if (!(noise_std >= 0.0))
        throw ConfigError("noise_std: must be nonnegative");
    if (threads < 0)
        throw ConfigError("threads: must be nonnegative (0 = hardware concurrency)");
}

ExperimentPlan desk_plan(Study study)
{
    ExperimentPlan p;
    p.study = study;
    switch (study) {
    case Study::DimSweep:
        p.axis_values = {8, 16, 32};
        p.n_samples = 20000;
        break;
    case Study::RepsSweep:
        p.axis_values = {1, 2, 5, 10, 20, 40};
        p.d = 10;
        p.n_samples = 10000;
        break;
    case Study::RankSweep:
        p.axis_values = {5, 10, 20};
        p.d = 40;
        p.n_samples = 10000;
        break;
    case Study::StepTrace:
        p.axis_values = {10};
        p.n_samples = 100000;
        break;
    }
    return p;
}

ExperimentPlan paper_plan(Study study)
{
    ExperimentPlan p;
    p.study = study;
    switch (study) {
    case Study::DimSweep: {
        p.axis_values.clear();
        for (long v : log_grid(10, 200, 8))
            p.axis_values.push_back(static_cast<int>(v));
        p.n_samples = 50000;
        break;
    }
    case Study::RepsSweep:
        p.axis_values.clear();
        for (long v : log_grid(1, 100, 9))
            p.axis_values.push_back(static_cast<int>(v));
        p.d = 30;
        p.n_samples = 100000;
        break;
    case Study::RankSweep:
        p.axis_values = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
        p.d = 100;
        p.n_samples = 30000;
        break;
    case Study::StepTrace:
        p.axis_values = {30};
        p.n_samples = 100000;
        break;
    }
    return p;
}

std::vector<long> log_grid(long lo, long hi, int count)
{
    if (lo < 1 || hi < lo || count < 1)
        throw ConfigError("log_grid: need 1 <= lo <= hi and count >= 1");
    std::vector<long> out;
    if (count == 1 || lo == hi) {
        out.push_back(hi);
        return out;
    }
    const double a = std::log10(static_cast<double>(lo));
    const double b = std::log10(static_cast<double>(hi));
    for (int i = 0; i < count; ++i) {
        long v = i == count - 1 ? hi
                                : std::lround(std::pow(10.0, a + (b - a) * i / (count - 1)));
        v = std::clamp(v, lo, hi);
        if (out.empty() || v > out.back())
            out.push_back(v);
    }
    return out;
}

std::vector<long> resolve_checkpoints(const ExperimentPlan& plan)
{
    if (!plan.checkpoints.empty())
        return plan.checkpoints;
    if (plan.study != Study::StepTrace || plan.n_samples <= plan.first_checkpoint)
        return {plan.n_samples};
    return log_grid(plan.first_checkpoint, plan.n_samples, plan.n_checkpoints);
}

std::uint64_t derive_seed(std::uint64_t master_seed, std::int64_t axis_index,
                          std::int64_t optimizer_index, std::int64_t repetition_index)
{
    if (axis_index < 0 || optimizer_index < 0 || repetition_index < 0)
        throw ConfigError("derive_seed: indices must be nonnegative");
    std::uint64_t h = splitmix64_mix(master_seed ^ 0x243f6a8885a308d3ull);
    h = splitmix64_mix(h ^ static_cast<std::uint64_t>(axis_index));
    h = splitmix64_mix(h ^ static_cast<std::uint64_t>(optimizer_index));
    h = splitmix64_mix(h ^ static_cast<std::uint64_t>(repetition_index));
    return h;
}

const SeriesRecord& RunRecord::find(int axis_value, std::string_view role) const
{
    for (const SeriesRecord& s : series) {
        if (s.axis_value == axis_value && s.role == role)
            return s;
    }
    throw std::out_of_range("no series " + std::string(role) + " at axis value "
                            + std::to_string(axis_value));
}

RunRecord run_dim_sweep(const ExperimentPlan& plan)
{
    require_study(plan, Study::DimSweep);
    StudyLayout layout;
    for (std::size_t a = 0; a < plan.axis_values.size(); ++a) {
        const int d = plan.axis_values[a];
        const int ai = static_cast<int>(a);
        add_series(layout, ai, ai, d, "SGD", OptimizerKind::sgd(), 0, "mse_per_dim");
        add_series(layout, ai, ai, d, "FGD(1)", OptimizerKind::fgd(1), 0, "mse_per_dim");
        add_series(layout, ai, ai, d, "FGD(d)", OptimizerKind::fgd(d), 0, "mse_per_dim");
    }
    return execute(
        plan, std::move(layout),
        [&](int d, Rng& rng) { return cube_problem(d, ThetaStarPolicy::Normalized, plan, rng); },
        MetricKind::Mse,
        [](const Vector& theta, const Problem& p) {
            return mse(theta, p.theta_star) / static_cast<double>(theta.size());
        });
}

RunRecord run_reps_sweep(const ExperimentPlan& plan)
{
    require_study(plan, Study::RepsSweep);
    const int d = plan.d;
    StudyLayout layout;
    // Every ell shares the problem and the data of axis slot 0.
    for (int ell : plan.axis_values) {
        add_series(layout, 0, 0, ell, "FGD(ell)", OptimizerKind::fgd(ell), 0, "mse");
        add_series(layout, 0, 0, ell, "FGD(1)+epochs", OptimizerKind::fgd(1), ell, "mse");
        add_series(layout, 0, 0, ell, "SGD+epochs", OptimizerKind::sgd(), ell, "mse");
        add_series(layout, 0, 0, ell, "FGD(d)+epochs", OptimizerKind::fgd(d), ell, "mse");
        add_series(layout, 0, 0, ell, "SGD", OptimizerKind::sgd(), 0, "mse");
    }
    return execute(
        plan, std::move(layout),
        [&](int, Rng& rng) { return cube_problem(d, ThetaStarPolicy::UniformBox, plan, rng); },
        MetricKind::Mse,
        [](const Vector& theta, const Problem& p) { return mse(theta, p.theta_star); });
}

RunRecord run_rank_sweep(const ExperimentPlan& plan)
{
    require_study(plan, Study::RankSweep);
    StudyLayout layout;
    for (std::size_t a = 0; a < plan.axis_values.size(); ++a) {
        const int s = plan.axis_values[a];
        const int ai = static_cast<int>(a);
        add_series(layout, ai, ai, s, "SGD", OptimizerKind::sgd(), 0, "mspe_per_rank");
        add_series(layout, ai, ai, s, "FGD(1)", OptimizerKind::fgd(1), 0, "mspe_per_rank");
        add_series(layout, ai, ai, s, "FGD(s)", OptimizerKind::fgd(s), 0, "mspe_per_rank");
    }
    return execute(
        plan, std::move(layout),
        [&](int s, Rng& rng) { return low_rank_problem(plan.d, s, plan, rng); },
        MetricKind::Mspe,
        [](const Vector& theta, const Problem& p) {
            return mspe(theta, p.theta_star, p.sigma.sigma)
                   / static_cast<double>(p.covariates.intrinsic_dim());
        });
}

RunRecord run_step_trace(const ExperimentPlan& plan)
{
    require_study(plan, Study::StepTrace);
    StudyLayout layout;
    for (std::size_t a = 0; a < plan.axis_values.size(); ++a) {
        const int d = plan.axis_values[a];
        const int ai = static_cast<int>(a);
        add_series(layout, ai, ai, d, "SGD", OptimizerKind::sgd(), 0, "mse");
        add_series(layout, ai, ai, d, "FGD(1)", OptimizerKind::fgd(1), 0, "mse");
        add_series(layout, ai, ai, d, "FGD(d)", OptimizerKind::fgd(d), 0, "mse");
        add_series(layout, ai, ai, d, "aFGD(1)", OptimizerKind::afgd(1), 0, "mse");
        add_series(layout, ai, ai, d, "aFGD(d)", OptimizerKind::afgd(d), 0, "mse");
    }
    return execute(
        plan, std::move(layout),
        [&](int d, Rng& rng) { return cube_problem(d, ThetaStarPolicy::UniformBox, plan, rng); },
        MetricKind::Mse,
        [](const Vector& theta, const Problem& p) { return mse(theta, p.theta_star); });
}

RunRecord run_study(const ExperimentPlan& plan)
{
    switch (plan.study) {
    case Study::DimSweep:
        return run_dim_sweep(plan);
    case Study::RepsSweep:
        return run_reps_sweep(plan);
    case Study::RankSweep:
        return run_rank_sweep(plan);
    case Study::StepTrace:
        return run_step_trace(plan);
    }
    throw ConfigError("unknown study");
}

}  // namespace fgd
