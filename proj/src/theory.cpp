#include "fgd/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>

#include "fgd/errors.hpp"

namespace fgd {

namespace {

// Running per-entry mean and variance (Welford).
class EntryMoments
{
  public:
    EntryMoments(Eigen::Index rows, Eigen::Index cols)
        : mean_(Matrix::Zero(rows, cols)), m2_(Matrix::Zero(rows, cols))
    {
    }

    void add(const Matrix& value)
    {
        ++n_;
        const Matrix delta = value - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_.array() += delta.array() * (value - mean_).array();
    }

    const Matrix& mean() const { return mean_; }

    Matrix std_error() const
    {
        if (n_ < 2)
            return Matrix::Zero(mean_.rows(), mean_.cols());
        const double n = static_cast<double>(n_);
        return (m2_ / (n - 1.0) / n).cwiseSqrt();
    }

  private:
    long n_ = 0;
    Matrix mean_;
    Matrix m2_;
};

void require_mc(long mc_samples, const char* who)
{
    if (mc_samples < 1)
        throw ConfigError(std::string(who) + ": mc_samples must be at least 1");
}

Vector apply_bias_product(const std::vector<Matrix>& factors, const Vector& initial_error)
{
    Vector e = initial_error;
    for (const Matrix& f : factors)
        e = f * e;
    return e;
}

}  // namespace

Matrix expected_contraction(const CovariateSpec& spec, double alpha, int ell, long mc_samples,
                            Rng& rng)
{
    if (ell < 1)
        throw ConfigError("expected_contraction: ell must be at least 1");
    const int d = spec.dim();
    const Matrix identity = Matrix::Identity(d, d);
    if (ell == 1)
        return identity - alpha * second_moment(spec).sigma;

    require_mc(mc_samples, "expected_contraction");
    Matrix acc = Matrix::Zero(d, d);
    Vector x(d);
    for (long i = 0; i < mc_samples; ++i) {
        sample_covariate(spec, rng, x);
        const double norm2 = x.squaredNorm();
        if (norm2 == 0.0)
            continue;
        const double g = (1.0 - std::pow(1.0 - alpha * norm2, ell)) / norm2;
        acc.selfadjointView<Eigen::Lower>().rankUpdate(x, g);
    }
    Matrix mean = acc.selfadjointView<Eigen::Lower>();
    mean /= static_cast<double>(mc_samples);
    return identity - mean;
}

BiasEstimate bias_vector(const BiasPlan& plan, const Vector& theta0_mean, const Vector& theta_star,
                         Rng& rng)
{
    const int d = plan.covariates.dim();
    if (theta0_mean.size() != d || theta_star.size() != d)
        throw ConfigError("bias_vector: dimension mismatch");
    if (plan.k < 0)
        throw ConfigError("bias_vector: k must be nonnegative");
    if (plan.ell < 1)
        throw ConfigError("bias_vector: ell must be at least 1");

    const Vector initial_error = theta0_mean - theta_star;
    BiasEstimate out;
    out.std_error = Vector::Zero(d);
    if (plan.k == 0) {
        out.bias = initial_error;
        return out;
    }

    if (plan.ell == 1) {
        std::vector<Matrix> factors;
        factors.reserve(static_cast<std::size_t>(plan.k));
        for (long i = 1; i <= plan.k; ++i)
            factors.push_back(
                expected_contraction(plan.covariates, learning_rate(plan.schedule, i), 1, 0, rng));
        out.bias = apply_bias_product(factors, initial_error);
        return out;
    }

    if (plan.mc_samples < kMinBiasMcSamples)
        throw ConfigError("bias_vector: mc_samples must be at least "
                          + std::to_string(kMinBiasMcSamples) + " when ell >= 2");
    const long per_batch = std::max(1L, plan.mc_samples / kBiasBatches);
    EntryMoments batches(d, 1);
    Vector total = Vector::Zero(d);
    for (int b = 0; b < kBiasBatches; ++b) {
        std::vector<Matrix> factors;
        factors.reserve(static_cast<std::size_t>(plan.k));
        for (long i = 1; i <= plan.k; ++i)
            factors.push_back(expected_contraction(
                plan.covariates, learning_rate(plan.schedule, i), plan.ell, per_batch, rng));
        const Vector e = apply_bias_product(factors, initial_error);
        batches.add(e);
        total += e;
    }
    out.bias = total / static_cast<double>(kBiasBatches);
    out.std_error = batches.std_error();
    return out;
}

double theorem2_bound(long k, const Schedule& schedule, double b, const SecondMomentSummary& sigma,
                      double mspe0)
{
    if (k < 0)
        throw ConfigError("theorem2_bound: k must be nonnegative");
    check_theorem2_admissible(schedule, sigma, b);
    const double c = schedule.c1 * schedule.c2;
    const double kd = static_cast<double>(k);
    const double shrink = (1.0 + c) / (kd + 1.0 + c);
    const double noise = 16.0 * b * schedule.c1 * schedule.c1
                         * (sigma.lambda_max + sigma.trace / schedule.ell) * kd
                         / ((kd + 1.0 + c) * (kd + 1.0 + c));
    return shrink * shrink * mspe0 + noise;
}

double theorem4_bound(long k, const Schedule& schedule, const SecondMomentSummary& sigma, int d,
                      double mse0, std::optional<double> b)
{
    if (k < 0)
        throw ConfigError("theorem4_bound: k must be nonnegative");
    if (d != sigma.dim())
        throw ConfigError("theorem4_bound: d does not match Sigma");
    check_theorem4_admissible(schedule, sigma, b);
    const double c = schedule.c1 * schedule.c2;
    const double kd = static_cast<double>(k);
    const double shrink = (1.0 + c) / (kd + 1.0 + c);
    const double noise = 8.0 * schedule.c1 * schedule.c1 * sigma.trace
                         * (2.0 / std::numbers::pi + static_cast<double>(d) / schedule.ell) * kd
                         / ((kd + 1.0 + c) * (kd + 1.0 + c));
    return shrink * shrink * mse0 + noise;
}

BoundReport theorem2_report(std::span<const long> steps, const Schedule& schedule, double b,
                            const SecondMomentSummary& sigma, double mspe0)
{
    BoundReport report;
    report.c1 = schedule.c1;
    report.c2 = schedule.c2;
    report.b = b;
    report.lambda_max = sigma.lambda_max;
    report.lambda_min_nonzero = sigma.lambda_min_nonzero;
    report.trace = sigma.trace;
    report.entries.reserve(steps.size());
    for (long k : steps)
        report.entries.push_back({k, theorem2_bound(k, schedule, b, sigma, mspe0)});
    return report;
}

double OracleResult::max_abs_deviation() const
{
    return (empirical - exact).cwiseAbs().maxCoeff();
}

double OracleResult::max_standardized_deviation() const
{
    double worst = 0.0;
    for (Eigen::Index i = 0; i < exact.rows(); ++i) {
        for (Eigen::Index j = 0; j < exact.cols(); ++j) {
            const double dev = std::abs(empirical(i, j) - exact(i, j));
            if (dev == 0.0)
                continue;
            const double se = std_error(i, j);
            worst = std::max(worst, se > 0.0 ? dev / se : std::numeric_limits<double>::infinity());
        }
    }
    return worst;
}

OracleResult oracle_isserlis(const Matrix& gamma, const Vector& u, long mc_samples, Rng& rng)
{
    require_mc(mc_samples, "oracle_isserlis");
    const Eigen::Index d = gamma.rows();
    if (gamma.cols() != d || u.size() != d)
        throw ConfigError("oracle_isserlis: dimension mismatch");
    Eigen::LLT<Matrix> llt(gamma);
    if (llt.info() != Eigen::Success)
        throw ConfigError("oracle_isserlis: Gamma must be symmetric positive definite");
    const Matrix lower = llt.matrixL();

    EntryMoments moments(d, d);
    Vector xi(d), z(d);
    Matrix draw(d, d);
    for (long i = 0; i < mc_samples; ++i) {
        rng.fill_normal(xi);
        z.noalias() = lower * xi;
        const double p = u.dot(z);
        draw.noalias() = (p * p) * z * z.transpose();
        moments.add(draw);
    }
    const Vector gu = gamma * u;
    OracleResult out;
    out.empirical = moments.mean();
    out.exact = 2.0 * gu * gu.transpose() + u.dot(gu) * gamma;
    out.std_error = moments.std_error();
    return out;
}

OracleResult oracle_sign_moment(const Vector& a, long mc_samples, Rng& rng,
                                std::optional<double> constant)
{
    require_mc(mc_samples, "oracle_sign_moment");
    const double norm = a.norm();
    if (!(norm > 0.0))
        throw ConfigError("oracle_sign_moment: a must be nonzero");
    const Eigen::Index d = a.size();
    EntryMoments moments(d, 1);
    Vector xi(d);
    for (long i = 0; i < mc_samples; ++i) {
        rng.fill_normal(xi);
        const double s = a.dot(xi);
        const double sgn = static_cast<double>((s > 0.0) - (s < 0.0));
        moments.add(norm * sgn * xi);
    }
    OracleResult out;
    out.empirical = moments.mean();
    out.exact = constant.value_or(std::sqrt(2.0 / std::numbers::pi)) * a;
    out.std_error = moments.std_error();
    return out;
}

OracleResult oracle_forward_gradient(const Vector& v, long mc_samples, Rng& rng)
{
    require_mc(mc_samples, "oracle_forward_gradient");
    const Eigen::Index d = v.size();
    Vector acc = Vector::Zero(d);
    Vector xi(d);
    for (long i = 0; i < mc_samples; ++i) {
        rng.fill_normal(xi);
        acc += v.dot(xi) * xi;
    }
    const double n = static_cast<double>(mc_samples);
    OracleResult out;
    out.empirical = acc / n;
    out.exact = v;
    // Cov[(v^T xi) xi] = E[(v^T xi)^2 xi xi^T] - v v^T = v v^T + |v|^2 I.
    out.std_error = ((v.array().square() + v.squaredNorm()) / n).sqrt().matrix();
    return out;
}

OracleResult oracle_noise_correlation(const Vector& x, double alpha, int r, long mc_samples,
                                      Rng& rng, const std::optional<Vector>& theta_start,
                                      const std::optional<Vector>& theta_star)
{
    require_mc(mc_samples, "oracle_noise_correlation");
    if (r < 0)
        throw ConfigError("oracle_noise_correlation: r must be nonnegative");
    const double xx = x.squaredNorm();
    if (!(alpha > 0.0) || alpha * xx > 0.75)
        throw InadmissibleError("oracle_noise_correlation: alpha x^T x <= 3/4 fails");
    const Eigen::Index d = x.size();
    const Vector start = theta_start.value_or(Vector::Zero(d));
    const Vector target = theta_star.value_or(Vector::Zero(d));
    if (start.size() != d || target.size() != d)
        throw ConfigError("oracle_noise_correlation: dimension mismatch");
    const double signal = x.dot(target);

    EntryMoments moments(1, 1);
    Vector xi(d);
    Matrix value(1, 1);
    for (long i = 0; i < mc_samples; ++i) {
        const double eps = rng.normal();
        TrajectoryState state{start, 0, 0};
        for (int step = 0; step < r; ++step) {
            rng.fill_normal(xi);
            state = fgd_step(state, x, signal + eps, alpha, xi);
        }
        value(0, 0) = eps * x.dot(state.theta);
        moments.add(value);
    }
    OracleResult out;
    out.empirical = moments.mean();
    out.exact = Matrix::Constant(1, 1, 1.0 - std::pow(1.0 - alpha * xx, r));
    out.std_error = moments.std_error();
    return out;
}

OracleResult oracle_bias(const BiasPlan& plan, const Vector& theta0, const Vector& theta_star,
                         long trajectories, Rng& rng)
{
    require_mc(trajectories, "oracle_bias");
    const int d = plan.covariates.dim();
    const ModelSpec model(plan.covariates, theta_star);
    const OptimizerKind optimizer = OptimizerKind::fgd(plan.ell);
    Schedule schedule = plan.schedule;
    if (schedule.mode == ScheduleMode::TheoremForm)
        schedule.ell = plan.ell;

    EntryMoments moments(d, 1);
    Vector theta(d), x(d), xi(d);
    for (long t = 0; t < trajectories; ++t) {
        theta = theta0;
        for (long k = 1; k <= plan.k; ++k) {
            const double y = sample_pair(model, rng, x);
            apply_outer_update(theta, optimizer, schedule, k, x, y, rng, xi);
        }
        moments.add(theta);
    }
    const BiasEstimate predicted = bias_vector(plan, theta0, theta_star, rng);

    OracleResult out;
    out.empirical = moments.mean();
    out.exact = predicted.bias + theta_star;
    out.std_error = (moments.std_error().array().square() + predicted.std_error.array().square())
                        .sqrt()
                        .matrix();
    return out;
}

}  // namespace fgd
