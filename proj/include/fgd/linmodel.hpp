#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "fgd/random.hpp"

namespace fgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class CovariateKind { FullCube, LowRank };

/*!
 * Distribution of the input vectors X.
 *
 * FullCube: iid coordinates uniform on [-h, h]^d.
 * LowRank:  X = U Z with U a d x s matrix of full column rank and Z uniform on
 *           [-h, h]^s.
 *
 * With the default half-width sqrt(3) every uniform coordinate has unit
 * variance.
 */
class CovariateSpec
{
  public:
    static constexpr double kUnitVarianceHalfWidth = 1.7320508075688772;  // sqrt(3)

    static CovariateSpec full_cube(int d, double half_width = kUnitVarianceHalfWidth);
    static CovariateSpec low_rank(Matrix embed, double half_width = kUnitVarianceHalfWidth);

    CovariateKind kind() const noexcept { return kind_; }
    int dim() const noexcept { return d_; }
    int intrinsic_dim() const noexcept { return s_; }
    double half_width() const noexcept { return half_width_; }
    /// Embedding U; empty for FullCube.
    const Matrix& embed() const noexcept { return embed_; }

    /// Analytic almost-sure bound on ||X||^2.
    double norm_bound() const;

  private:
    CovariateSpec() = default;

    CovariateKind kind_ = CovariateKind::FullCube;
    int d_ = 0;
    int s_ = 0;
    double half_width_ = kUnitVarianceHalfWidth;
    Matrix embed_;
};

/// Linear model Y = X^T theta_star + noise_std * N(0, 1).
class ModelSpec
{
  public:
    ModelSpec(CovariateSpec covariates, Vector theta_star, double noise_std = 1.0);

    const CovariateSpec& covariates() const noexcept { return covariates_; }
    const Vector& theta_star() const noexcept { return theta_star_; }
    double noise_std() const noexcept { return noise_std_; }
    /// b, derived from the covariate spec (never configured separately).
    double b_bound() const noexcept { return b_bound_; }
    int dim() const noexcept { return covariates_.dim(); }

  private:
    CovariateSpec covariates_;
    Vector theta_star_;
    double noise_std_;
    double b_bound_;
};

/// Second-moment matrix Sigma = E[X X^T] together with its spectral summary.
struct SecondMomentSummary
{
    Matrix sigma;
    double lambda_max = 0.0;
    /// Smallest eigenvalue (may be 0 up to rounding).
    double lambda_min = 0.0;
    double lambda_min_nonzero = 0.0;
    double trace = 0.0;
    int rank = 0;
    /// lambda_max / lambda_min; set only when Sigma has full rank.
    std::optional<double> condition_number;

    int dim() const noexcept { return static_cast<int>(sigma.rows()); }
    bool full_rank() const noexcept { return rank == dim(); }
    /// Intrinsic dimension tr(Sigma) / lambda_max(Sigma).
    double effective_rank() const noexcept { return trace / lambda_max; }
};

/// Relative eigenvalue threshold for counting rank (times lambda_max).
inline constexpr double kRankTolerance = 1e-9;

/// Spectral summary of a symmetric PSD matrix. Throws NumericalError if the
/// eigensolver fails, the matrix is not symmetric/PSD, or it is identically 0.
SecondMomentSummary summarize_second_moment(const Matrix& sigma);

struct Sample
{
    Vector x;
    double y = 0.0;
};

Vector sample_covariate(const CovariateSpec& spec, Rng& rng);
/// In-place variant; `out` must have length d.
void sample_covariate(const CovariateSpec& spec, Rng& rng, Eigen::Ref<Vector> out);

Sample sample_pair(const ModelSpec& model, Rng& rng);
/// Draws x into `x` and returns y.
double sample_pair(const ModelSpec& model, Rng& rng, Eigen::Ref<Vector> x);

/// Analytic Sigma: (h^2/3) I for the cube, (h^2/3) U U^T for low rank.
SecondMomentSummary second_moment(const CovariateSpec& spec);

/// Empirical average of x x^T over n_samples draws.
SecondMomentSummary estimate_second_moment(const CovariateSpec& spec, long n_samples, Rng& rng);

enum class ThetaStarPolicy {
    /// Uniform on [-10, 10]^d.
    UniformBox,
    /// Uniform box draw rescaled to unit Euclidean norm.
    Normalized,
};

Vector draw_theta_star(int d, ThetaStarPolicy policy, Rng& rng);

/// d x s matrix with iid standard-normal entries.
Matrix draw_embedding(int d, int s, Rng& rng);

/// Fixed dataset of n pairs; column k of xs is the k-th input.
struct Dataset
{
    Matrix xs;  // d x n
    Vector ys;  // n

    long size() const noexcept { return ys.size(); }
};

Dataset draw_dataset(const ModelSpec& model, long n, Rng& rng);

}  // namespace fgd
