#include "fgd/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fgd/errors.hpp"

namespace fgd {

namespace {

constexpr double kAdmissibleSlack = 1e-12;

// Sequential dot product: the summation order never depends on alignment, so
// streaming and dataset-backed runs agree bitwise.
inline double dot(const double* a, const double* b, Eigen::Index n) noexcept
{
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        acc += a[i] * b[i];
    return acc;
}

inline double sign(double u) noexcept { return static_cast<double>((u > 0.0) - (u < 0.0)); }

void check_finite(const double* theta, Eigen::Index n, const char* who)
{
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(theta[i]))
            throw DivergenceError(std::string(who) + ": iterate became non-finite");
    }
}

void sgd_kernel(double* theta, const double* x, Eigen::Index d, double y, double alpha)
{
    const double coef = alpha * (y - dot(x, theta, d));
    for (Eigen::Index i = 0; i < d; ++i)
        theta[i] += coef * x[i];
    check_finite(theta, d, "sgd_step");
}

void fgd_kernel(double* theta, const double* x, Eigen::Index d, double y, double alpha,
                const double* xi)
{
    const double residual = y - dot(x, theta, d);
    const double coef = alpha * residual * dot(x, xi, d);
    for (Eigen::Index i = 0; i < d; ++i)
        theta[i] += coef * xi[i];
    check_finite(theta, d, "fgd_step");
}

void afgd_kernel(double* theta, const double* x, Eigen::Index d, double y, double beta,
                 double x_norm, const double* xi)
{
    const double residual = y - dot(x, theta, d);
    const double coef = beta * residual * x_norm * sign(dot(x, xi, d));
    for (Eigen::Index i = 0; i < d; ++i)
        theta[i] += coef * xi[i];
    check_finite(theta, d, "afgd_step");
}

void require_same_dim(Eigen::Index a, Eigen::Index b, const char* who)
{
    if (a != b)
        throw ConfigError(std::string(who) + ": dimension mismatch");
}

void require_rate(double alpha, const char* who)
{
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw ConfigError(std::string(who) + ": learning rate must be positive and finite");
}

void require_schedule_matches(const Schedule& schedule, const OptimizerKind& optimizer)
{
    if (schedule.mode == ScheduleMode::TheoremForm && schedule.ell != optimizer.inner_updates())
        throw ConfigError("schedule ell = " + std::to_string(schedule.ell)
                          + " does not match optimizer " + optimizer.label());
}

}  // namespace

OptimizerKind OptimizerKind::fgd(int ell)
{
    if (ell < 1)
        throw ConfigError("FGD: ell must be at least 1");
    return {Method::Fgd, ell};
}

OptimizerKind OptimizerKind::afgd(int ell)
{
    if (ell < 1)
        throw ConfigError("aFGD: ell must be at least 1");
    return {Method::Afgd, ell};
}

std::string OptimizerKind::label() const
{
    switch (method) {
    case Method::Sgd:
        return "SGD";
    case Method::Fgd:
        return "FGD(" + std::to_string(ell) + ")";
    case Method::Afgd:
        return "aFGD(" + std::to_string(ell) + ")";
    }
    return "?";
}

Schedule Schedule::theorem_form(double c1, double c2, int ell)
{
    if (!(c1 > 0.0) || !(c2 > 0.0) || !std::isfinite(c1) || !std::isfinite(c2))
        throw ConfigError("schedule: c1 and c2 must be positive and finite");
    if (ell < 1)
        throw ConfigError("schedule: ell must be at least 1");
    Schedule s;
    s.mode = ScheduleMode::TheoremForm;
    s.c1 = c1;
    s.c2 = c2;
    s.ell = ell;
    return s;
}

Schedule Schedule::constant(double alpha, int ell)
{
    if (!(alpha > 0.0) || !std::isfinite(alpha))
        throw ConfigError("schedule: constant alpha must be positive and finite");
    if (ell < 1)
        throw ConfigError("schedule: ell must be at least 1");
    Schedule s;
    s.mode = ScheduleMode::Constant;
    s.alpha = alpha;
    s.ell = ell;
    return s;
}

Schedule Schedule::scaled(double factor) const
{
    if (!(factor > 0.0) || !std::isfinite(factor))
        throw ConfigError("schedule: scale factor must be positive and finite");
    Schedule s = *this;
    if (mode == ScheduleMode::TheoremForm) {
        s.c1 = c1 * factor;
        s.c2 = c2 / factor;
    } else {
        s.alpha = alpha * factor;
    }
    return s;
}

double learning_rate(const Schedule& schedule, long i)
{
    if (i < 1)
        throw ConfigError("learning_rate: index must be at least 1");
    if (schedule.mode == ScheduleMode::Constant)
        return schedule.alpha;
    return schedule.c1 / (schedule.ell * (schedule.c1 * schedule.c2 + static_cast<double>(i)));
}

ScheduleConstants theorem2_constants(const SecondMomentSummary& sigma, double b, int ell)
{
    if (!(sigma.trace > 0.0))
        throw InadmissibleError("theorem2_constants: Sigma has zero trace");
    if (!(sigma.lambda_min_nonzero > 0.0))
        throw InadmissibleError("theorem2_constants: Sigma has no positive eigenvalue");
    if (!(b > 0.0))
        throw InadmissibleError("theorem2_constants: b must be positive");
    if (ell < 1)
        throw ConfigError("theorem2_constants: ell must be at least 1");
    const double lam = sigma.lambda_min_nonzero;
    ScheduleConstants out;
    out.c1 = 2.0 / lam;
    out.c2 = (4.0 * b / lam) * (2.0 * sigma.lambda_max + sigma.trace / ell);
    return out;
}

ScheduleConstants theorem4_constants(const SecondMomentSummary& sigma, double b, int ell)
{
    if (!sigma.full_rank() || !(sigma.lambda_min > 0.0))
        throw InadmissibleError(
            "theorem4_constants: Sigma is rank deficient (lambda_min(Sigma) > 0 required)");
    if (!(b > 0.0))
        throw InadmissibleError("theorem4_constants: b must be positive");
    if (ell < 1)
        throw ConfigError("theorem4_constants: ell must be at least 1");
    const double kappa = *sigma.condition_number;
    ScheduleConstants out;
    out.c1 = std::sqrt(32.0 * std::numbers::pi) / sigma.lambda_min;
    out.c2 = std::sqrt(std::numbers::pi / 2.0) * b
             * std::max(1.0, 4.0 * sigma.dim() * kappa / ell);
    return out;
}

void check_theorem2_admissible(const Schedule& schedule, const SecondMomentSummary& sigma, double b)
{
    if (schedule.mode != ScheduleMode::TheoremForm)
        throw InadmissibleError(
            "MSPE bound requires a learning rate of the form c1/(ell (c1 c2 + i))");
    const ScheduleConstants need = theorem2_constants(sigma, b, schedule.ell);
    const double c2_floor = 0.75 * need.c2;  // 3b/lmin (2 lmax + tr/ell)
    if (schedule.c1 < need.c1 * (1.0 - kAdmissibleSlack))
        throw InadmissibleError("MSPE bound violated: c1 >= 2/lambda_min_nonzero(Sigma) fails (c1 = "
                                + std::to_string(schedule.c1) + ", need "
                                + std::to_string(need.c1) + ")");
    if (schedule.c2 < c2_floor * (1.0 - kAdmissibleSlack))
        throw InadmissibleError(
            "MSPE bound violated: c2 >= 3b/lambda_min_nonzero(Sigma) (2 lambda_max + tr/ell) fails "
            "(c2 = "
            + std::to_string(schedule.c2) + ", need " + std::to_string(c2_floor) + ")");
}

void check_theorem4_admissible(const Schedule& schedule, const SecondMomentSummary& sigma,
                               std::optional<double> b)
{
    if (schedule.mode != ScheduleMode::TheoremForm)
        throw InadmissibleError(
            "aFGD MSE bound requires a learning rate of the form c1/(ell (c1 c2 + i))");
    if (!sigma.full_rank() || !(sigma.lambda_min > 0.0))
        throw InadmissibleError("aFGD MSE bound violated: lambda_min(Sigma) > 0 fails");
    const double c1_floor = std::sqrt(32.0 * std::numbers::pi) / sigma.lambda_min;
    if (schedule.c1 < c1_floor * (1.0 - kAdmissibleSlack))
        throw InadmissibleError("aFGD MSE bound violated: c1 >= sqrt(32 pi)/lambda_min(Sigma) fails");
    if (b) {
        const ScheduleConstants need = theorem4_constants(sigma, *b, schedule.ell);
        if (schedule.c2 < need.c2 * (1.0 - kAdmissibleSlack))
            throw InadmissibleError(
                "aFGD MSE bound violated: c2 >= sqrt(pi/2) b max(1, 4 d kappa(Sigma)/ell) fails");
    }
}

Schedule theorem2_schedule(const SecondMomentSummary& sigma, double b, int ell)
{
    const ScheduleConstants c = theorem2_constants(sigma, b, ell);
    Schedule s = Schedule::theorem_form(c.c1, c.c2, ell);
    // Step-size precondition of the MSPE recursion: alpha_k <= 1/(4 ell b).
    if (learning_rate(s, 1) * ell * b > 0.25 * (1.0 + kAdmissibleSlack))
        throw InadmissibleError("theorem2_schedule: alpha_1 * ell * b <= 1/4 fails");
    return s;
}

Schedule theorem4_schedule(const SecondMomentSummary& sigma, double b, int ell)
{
    const ScheduleConstants c = theorem4_constants(sigma, b, ell);
    return Schedule::theorem_form(c.c1, c.c2, ell);
}

TrajectoryState sgd_step(const TrajectoryState& state, const Vector& x, double y, double alpha)
{
    require_same_dim(state.theta.size(), x.size(), "sgd_step");
    require_rate(alpha, "sgd_step");
    TrajectoryState next = state;
    sgd_kernel(next.theta.data(), x.data(), x.size(), y, alpha);
    ++next.outer_step;
    return next;
}

TrajectoryState fgd_step(const TrajectoryState& state, const Vector& x, double y, double alpha,
                         const Vector& xi)
{
    require_same_dim(state.theta.size(), x.size(), "fgd_step");
    require_same_dim(xi.size(), x.size(), "fgd_step");
    require_rate(alpha, "fgd_step");
    TrajectoryState next = state;
    fgd_kernel(next.theta.data(), x.data(), x.size(), y, alpha, xi.data());
    ++next.inner_step;
    return next;
}

TrajectoryState afgd_step(const TrajectoryState& state, const Vector& x, double y, double beta,
                          const Vector& xi)
{
    require_same_dim(state.theta.size(), x.size(), "afgd_step");
    require_same_dim(xi.size(), x.size(), "afgd_step");
    require_rate(beta, "afgd_step");
    TrajectoryState next = state;
    const double x_norm = std::sqrt(dot(x.data(), x.data(), x.size()));
    afgd_kernel(next.theta.data(), x.data(), x.size(), y, beta, x_norm, xi.data());
    ++next.inner_step;
    return next;
}

void apply_outer_update(Eigen::Ref<Vector> theta, const OptimizerKind& optimizer,
                        const Schedule& schedule, long rate_index,
                        const Eigen::Ref<const Vector>& x, double y, Rng& xi_rng,
                        Eigen::Ref<Vector> xi)
{
    const Eigen::Index d = theta.size();
    const double rate = learning_rate(schedule, rate_index);
    switch (optimizer.method) {
    case Method::Sgd:
        sgd_kernel(theta.data(), x.data(), d, y, rate);
        return;
    case Method::Fgd:
        for (int r = 0; r < optimizer.ell; ++r) {
            xi_rng.fill_normal(xi);
            fgd_kernel(theta.data(), x.data(), d, y, rate, xi.data());
        }
        return;
    case Method::Afgd: {
        const double x_norm = std::sqrt(dot(x.data(), x.data(), d));
        for (int r = 0; r < optimizer.ell; ++r) {
            xi_rng.fill_normal(xi);
            afgd_kernel(theta.data(), x.data(), d, y, rate, x_norm, xi.data());
        }
        return;
    }
    }
}

TrajectoryState run_outer_step(const TrajectoryState& state, const OptimizerKind& optimizer,
                               const Schedule& schedule, const Vector& x, double y, Rng& xi_rng)
{
    if (state.inner_step != 0)
        throw ConfigError("run_outer_step: state must be at the start of an outer step");
    require_same_dim(state.theta.size(), x.size(), "run_outer_step");
    require_schedule_matches(schedule, optimizer);
    TrajectoryState next = state;
    Vector xi(x.size());
    apply_outer_update(next.theta, optimizer, schedule, state.outer_step + 1, x, y, xi_rng, xi);
    ++next.outer_step;
    next.inner_step = 0;
    return next;
}

std::vector<Checkpoint> run_trajectory(const ModelSpec& model, const OptimizerKind& optimizer,
                                       const Schedule& schedule, long n_steps,
                                       std::span<const long> checkpoints, const Vector& theta0,
                                       Rng& data_rng, Rng& xi_rng)
{
    if (n_steps < 0)
        throw ConfigError("run_trajectory: n_steps must be nonnegative");
    require_same_dim(theta0.size(), model.dim(), "run_trajectory");
    require_schedule_matches(schedule, optimizer);
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 0 || checkpoints[i] > n_steps)
            throw ConfigError("run_trajectory: checkpoint outside [0, n_steps]");
        if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
            throw ConfigError("run_trajectory: checkpoints must be strictly increasing");
    }

    std::vector<Checkpoint> out;
    out.reserve(checkpoints.size());
    Vector theta = theta0;
    Vector x(model.dim());
    Vector xi(model.dim());
    std::size_t next = 0;
    for (long k = 0;; ++k) {
        while (next < checkpoints.size() && checkpoints[next] == k)
            out.push_back({k, theta}), ++next;
        if (k == n_steps)
            break;
        const double y = sample_pair(model, data_rng, x);
        apply_outer_update(theta, optimizer, schedule, k + 1, x, y, xi_rng, xi);
    }
    return out;
}

std::vector<Checkpoint> run_trajectory(const ModelSpec& model, const OptimizerKind& optimizer,
                                       const Schedule& schedule, long n_steps,
                                       std::span<const long> checkpoints, const Vector& theta0,
                                       Rng& rng)
{
    Rng data_rng = rng.split();
    Rng xi_rng = rng.split();
    return run_trajectory(model, optimizer, schedule, n_steps, checkpoints, theta0, data_rng,
                          xi_rng);
}

std::vector<EpochCheckpoint> run_epochs(const Dataset& data, const OptimizerKind& optimizer,
                                        const Schedule& schedule, int n_epochs,
                                        const Vector& theta0, Rng& xi_rng)
{
    if (data.size() < 1)
        throw ConfigError("run_epochs: dataset must be non-empty");
    if (n_epochs < 1)
        throw ConfigError("run_epochs: n_epochs must be at least 1");
    require_same_dim(theta0.size(), data.xs.rows(), "run_epochs");
    require_schedule_matches(schedule, optimizer);

    const long n = data.size();
    std::vector<EpochCheckpoint> out;
    out.reserve(static_cast<std::size_t>(n_epochs) + 1);
    out.push_back({0, theta0});
    Vector theta = theta0;
    Vector xi(theta0.size());
    for (int e = 1; e <= n_epochs; ++e) {
        for (long k = 1; k <= n; ++k) {
            const long rate_index = static_cast<long>(e - 1) * n + k;
            apply_outer_update(theta, optimizer, schedule, rate_index, data.xs.col(k - 1),
                               data.ys[k - 1], xi_rng, xi);
        }
        out.push_back({e, theta});
    }
    return out;
}

std::vector<EpochCheckpoint> run_trajectory_epochs(const ModelSpec& model,
                                                   const OptimizerKind& optimizer,
                                                   const Schedule& schedule, long n, int n_epochs,
                                                   const Vector& theta0, Rng& data_rng,
                                                   Rng& xi_rng)
{
    const Dataset data = draw_dataset(model, n, data_rng);
    return run_epochs(data, optimizer, schedule, n_epochs, theta0, xi_rng);
}

}  // namespace fgd
