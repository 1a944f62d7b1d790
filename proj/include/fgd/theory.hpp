#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fgd/linmodel.hpp"
#include "fgd/optim.hpp"

namespace fgd {

/// Inputs for the bias product prod_i E[(I - alpha_i X X^T)^ell].
struct BiasPlan
{
    Schedule schedule;
    int ell = 1;
    long k = 0;
    CovariateSpec covariates;
    /// Draws per factor when ell >= 2 (no closed form then).
    long mc_samples = 100000;
};

/// Monte-Carlo estimate with a per-component standard error.
struct BiasEstimate
{
    Vector bias;
    Vector std_error;
};

inline constexpr long kMinBiasMcSamples = 10000;
inline constexpr int kBiasBatches = 10;

/*!
 * E[(I - alpha X X^T)^ell] for X from `spec`.
 *
 * ell = 1 returns I - alpha Sigma exactly. Otherwise averages the rank-one
 * closed form (I - alpha x x^T)^ell = I - ((1 - (1 - alpha |x|^2)^ell) / |x|^2) x x^T
 * over `mc_samples` draws.
 */
Matrix expected_contraction(const CovariateSpec& spec, double alpha, int ell, long mc_samples,
                            Rng& rng);

/*!
 * E[theta_{k,ell}] - theta_star = (prod_{i=1}^k E[(I - alpha_i X X^T)^ell]) (E[theta_0] - theta_star),
 * factors applied in order i = 1..k. For ell >= 2 the product is recomputed on
 * kBiasBatches independent batches to report a standard error; for ell = 1 the
 * result is exact and the standard error is zero.
 */
BiasEstimate bias_vector(const BiasPlan& plan, const Vector& theta0_mean, const Vector& theta_star,
                         Rng& rng);

/// MSPE upper bound for FGD(ell) after k samples:
/// ((1 + c1 c2) / (k + 1 + c1 c2))^2 mspe0 + 16 b c1^2 (lmax + tr / ell) k / (k + 1 + c1 c2)^2.
/// Throws InadmissibleError unless the schedule satisfies the bound's assumptions.
double theorem2_bound(long k, const Schedule& schedule, double b, const SecondMomentSummary& sigma,
                      double mspe0);

/// MSE upper bound for aFGD(ell):
/// ((1 + c1 c2) / (k + 1 + c1 c2))^2 mse0 + 8 c1^2 tr (2/pi + d/ell) k / (k + 1 + c1 c2)^2.
/// Requires full-rank Sigma; the c2 condition is checked only when `b` is given.
double theorem4_bound(long k, const Schedule& schedule, const SecondMomentSummary& sigma, int d,
                      double mse0, std::optional<double> b = std::nullopt);

struct BoundReport
{
    struct Entry
    {
        long step = 0;
        double bound = 0.0;
    };
    std::vector<Entry> entries;
    double c1 = 0.0;
    double c2 = 0.0;
    double b = 0.0;
    double lambda_max = 0.0;
    double lambda_min_nonzero = 0.0;
    double trace = 0.0;
};

BoundReport theorem2_report(std::span<const long> steps, const Schedule& schedule, double b,
                            const SecondMomentSummary& sigma, double mspe0);

/// Empirical vs closed-form value of a moment identity; vectors are d x 1,
/// scalars 1 x 1. Standard errors are per entry.
struct OracleResult
{
    Matrix empirical;
    Matrix exact;
    Matrix std_error;

    double max_abs_deviation() const;
    /// max_ij |empirical - exact| / std_error (0/0 counts as 0).
    double max_standardized_deviation() const;
};

/// E[(u^T z)^2 z z^T] = 2 G u u^T G + (u^T G u) G for z ~ N(0, G), G SPD.
OracleResult oracle_isserlis(const Matrix& gamma, const Vector& u, long mc_samples, Rng& rng);

/// |a| E[sign(a^T xi) xi] = sqrt(2/pi) a for xi ~ N(0, I).
/// `constant` replaces sqrt(2/pi) in the exact side (mutation testing only).
OracleResult oracle_sign_moment(const Vector& a, long mc_samples, Rng& rng,
                                std::optional<double> constant = std::nullopt);

/// E[(v^T xi) xi] = v; standard errors from the exact covariance v v^T + |v|^2 I.
OracleResult oracle_forward_gradient(const Vector& v, long mc_samples, Rng& rng);

/*!
 * x^T E[eps theta_{k,r} | x] = 1 - (1 - alpha x^T x)^r.
 *
 * Each replicate starts from `theta_start`, draws eps ~ N(0, 1), sets
 * y = x^T theta_star + eps and runs r FGD updates with rate alpha and fresh xi.
 * Throws InadmissibleError unless alpha x^T x <= 3/4.
 */
OracleResult oracle_noise_correlation(const Vector& x, double alpha, int r, long mc_samples,
                                      Rng& rng, const std::optional<Vector>& theta_start = {},
                                      const std::optional<Vector>& theta_star = {});

/// Empirical mean of theta_{k,ell} over independent FGD(ell) trajectories against
/// bias_vector + theta_star (Theorem-1 check). std_error combines both MC errors.
OracleResult oracle_bias(const BiasPlan& plan, const Vector& theta0, const Vector& theta_star,
                         long trajectories, Rng& rng);

}  // namespace fgd
