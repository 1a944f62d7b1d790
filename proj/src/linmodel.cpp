#include "fgd/linmodel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "fgd/errors.hpp"

namespace fgd {

CovariateSpec CovariateSpec::full_cube(int d, double half_width)
{
    if (d < 1)
        throw ConfigError("covariates: dimension d must be positive, got " + std::to_string(d));
    if (!(half_width > 0.0) || !std::isfinite(half_width))
        throw ConfigError("covariates: half_width must be positive and finite");
    CovariateSpec spec;
    spec.kind_ = CovariateKind::FullCube;
    spec.d_ = d;
    spec.s_ = d;
    spec.half_width_ = half_width;
    return spec;
}

CovariateSpec CovariateSpec::low_rank(Matrix embed, double half_width)
{
    if (embed.rows() < 1 || embed.cols() < 1)
        throw ConfigError("covariates: embedding U must be non-empty");
    if (embed.cols() > embed.rows())
        throw ConfigError("covariates: intrinsic dimension s exceeds ambient dimension d");
    if (!(half_width > 0.0) || !std::isfinite(half_width))
        throw ConfigError("covariates: half_width must be positive and finite");
    if (!embed.allFinite())
        throw ConfigError("covariates: embedding U has non-finite entries");
    Eigen::ColPivHouseholderQR<Matrix> qr(embed);
    if (qr.rank() != embed.cols())
        throw ConfigError("covariates: embedding U must have full column rank");

    CovariateSpec spec;
    spec.kind_ = CovariateKind::LowRank;
    spec.d_ = static_cast<int>(embed.rows());
    spec.s_ = static_cast<int>(embed.cols());
    spec.half_width_ = half_width;
    spec.embed_ = std::move(embed);
    return spec;
}

double CovariateSpec::norm_bound() const
{
    const double h2 = half_width_ * half_width_;
    if (kind_ == CovariateKind::FullCube)
        return d_ * h2;
    // ||U z||^2 <= ||U||^2 ||z||^2 <= ||U||^2 h^2 s
    Eigen::JacobiSVD<Matrix> svd(embed_);
    const double spectral = svd.singularValues()(0);
    return spectral * spectral * h2 * s_;
}

ModelSpec::ModelSpec(CovariateSpec covariates, Vector theta_star, double noise_std)
    : covariates_(std::move(covariates)),
      theta_star_(std::move(theta_star)),
      noise_std_(noise_std),
      b_bound_(covariates_.norm_bound())
{
    if (theta_star_.size() != covariates_.dim())
        throw ConfigError("model: theta_star has length " + std::to_string(theta_star_.size())
                          + " but d = " + std::to_string(covariates_.dim()));
    if (!theta_star_.allFinite())
        throw ConfigError("model: theta_star has non-finite entries");
    if (!(noise_std_ >= 0.0) || !std::isfinite(noise_std_))
        throw ConfigError("model: noise_std must be finite and nonnegative");
}

SecondMomentSummary summarize_second_moment(const Matrix& sigma)
{
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
        throw NumericalError("second moment: matrix must be square and non-empty");
    if (!sigma.allFinite())
        throw NumericalError("second moment: matrix has non-finite entries");
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw NumericalError("second moment: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success)
        throw NumericalError("second moment: eigendecomposition failed (ill-conditioned input)");
    const Vector& ev = eig.eigenvalues();  // ascending
    if (ev(0) < -1e-10 * scale)
        throw NumericalError("second moment: matrix is not positive semi-definite");

    SecondMomentSummary out;
    out.sigma = sigma;
    out.lambda_max = ev(ev.size() - 1);
    out.lambda_min = std::max(0.0, ev(0));
    out.trace = ev.sum();
    if (!(out.lambda_max > 0.0))
        throw NumericalError("second moment: matrix is zero");

    const double cutoff = kRankTolerance * out.lambda_max;
    out.rank = 0;
    out.lambda_min_nonzero = out.lambda_max;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) > cutoff) {
            ++out.rank;
            out.lambda_min_nonzero = std::min(out.lambda_min_nonzero, ev(i));
        }
    }
    if (out.full_rank())
        out.condition_number = out.lambda_max / out.lambda_min;
    return out;
}

void sample_covariate(const CovariateSpec& spec, Rng& rng, Eigen::Ref<Vector> out)
{
    const double h = spec.half_width();
    if (spec.kind() == CovariateKind::FullCube) {
        for (Eigen::Index i = 0; i < out.size(); ++i)
            out[i] = rng.uniform(-h, h);
        return;
    }
    Vector z(spec.intrinsic_dim());
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z[i] = rng.uniform(-h, h);
    // Plain loops keep the arithmetic independent of the destination's alignment.
    const Matrix& u = spec.embed();
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < z.size(); ++j)
            acc += u(i, j) * z[j];
        out[i] = acc;
    }
}

Vector sample_covariate(const CovariateSpec& spec, Rng& rng)
{
    Vector x(spec.dim());
    sample_covariate(spec, rng, x);
    return x;
}

double sample_pair(const ModelSpec& model, Rng& rng, Eigen::Ref<Vector> x)
{
    sample_covariate(model.covariates(), rng, x);
    const double noise = rng.normal();
    const Vector& theta = model.theta_star();
    double signal = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i)
        signal += x[i] * theta[i];
    return signal + model.noise_std() * noise;
}

Sample sample_pair(const ModelSpec& model, Rng& rng)
{
    Sample s;
    s.x.resize(model.dim());
    s.y = sample_pair(model, rng, s.x);
    return s;
}

SecondMomentSummary second_moment(const CovariateSpec& spec)
{
    // sqrt(3)^2 rounds below 3 in double; the unit-variance cube is exactly I.
    const double h = spec.half_width();
    const double var = h == CovariateSpec::kUnitVarianceHalfWidth ? 1.0 : h * h / 3.0;
    if (spec.kind() == CovariateKind::FullCube)
        return summarize_second_moment(var * Matrix::Identity(spec.dim(), spec.dim()));
    Matrix sigma = var * (spec.embed() * spec.embed().transpose());
    // Symmetrize exactly; the product is symmetric only up to rounding.
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    return summarize_second_moment(sigma);
}

SecondMomentSummary estimate_second_moment(const CovariateSpec& spec, long n_samples, Rng& rng)
{
    if (n_samples < 1)
        throw ConfigError("estimate_second_moment: n_samples must be at least 1");
    const int d = spec.dim();
    Matrix acc = Matrix::Zero(d, d);
    Vector x(d);
    for (long i = 0; i < n_samples; ++i) {
        sample_covariate(spec, rng, x);
        acc.selfadjointView<Eigen::Lower>().rankUpdate(x);
    }
    Matrix sigma = acc.selfadjointView<Eigen::Lower>();
    sigma /= static_cast<double>(n_samples);
    return summarize_second_moment(sigma);
}

Vector draw_theta_star(int d, ThetaStarPolicy policy, Rng& rng)
{
    if (d < 1)
        throw ConfigError("theta_star: dimension must be positive");
    Vector theta(d);
    for (int i = 0; i < d; ++i)
        theta[i] = rng.uniform(-10.0, 10.0);
    if (policy == ThetaStarPolicy::Normalized)
        theta /= theta.norm();
    return theta;
}

Matrix draw_embedding(int d, int s, Rng& rng)
{
    if (d < 1 || s < 1 || s > d)
        throw ConfigError("embedding: need 1 <= s <= d");
    Matrix u(d, s);
    for (int j = 0; j < s; ++j)
        for (int i = 0; i < d; ++i)
            u(i, j) = rng.normal();
    return u;
}

Dataset draw_dataset(const ModelSpec& model, long n, Rng& rng)
{
    if (n < 1)
        throw ConfigError("dataset: size must be at least 1");
    Dataset data;
    data.xs.resize(model.dim(), n);
    data.ys.resize(n);
    for (long k = 0; k < n; ++k)
        data.ys[k] = sample_pair(model, rng, data.xs.col(k));
    return data;
}

}  // namespace fgd
