#include "fgd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fgd/errors.hpp"

namespace fgd {

std::string_view metric_name(MetricKind kind)
{
    return kind == MetricKind::Mse ? "mse" : "mspe";
}

double mse(const Vector& theta, const Vector& theta_star)
{
    if (theta.size() != theta_star.size())
        throw ConfigError("mse: length mismatch");
    return (theta - theta_star).squaredNorm();
}

double mspe(const Vector& theta, const Vector& theta_star, const Matrix& sigma)
{
    if (theta.size() != theta_star.size() || sigma.rows() != theta.size()
        || sigma.cols() != theta.size())
        throw ConfigError("mspe: dimension mismatch");
    const Vector e = theta - theta_star;
    return std::max(0.0, e.dot(sigma * e));
}

double empirical_mspe(const Vector& theta, const Vector& theta_star, const CovariateSpec& spec,
                      long n_samples, Rng& rng)
{
    if (n_samples < 1)
        throw ConfigError("empirical_mspe: n_samples must be at least 1");
    const Vector e = theta_star - theta;
    Vector x(spec.dim());
    double acc = 0.0;
    for (long i = 0; i < n_samples; ++i) {
        sample_covariate(spec, rng, x);
        const double p = x.dot(e);
        acc += p * p;
    }
    return acc / static_cast<double>(n_samples);
}

MetricSeries aggregate(MetricKind metric, std::span<const RepSeries> reps)
{
    if (reps.empty())
        throw ConfigError("aggregate: need at least one repetition");
    const std::vector<long>& grid = reps.front().steps;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] <= grid[i - 1])
            throw ConfigError("aggregate: steps must be strictly increasing");
    }
    for (const RepSeries& r : reps) {
        if (r.steps != grid || r.values.size() != grid.size())
            throw ConfigError("aggregate: repetitions do not share a checkpoint grid");
    }

    const int n = static_cast<int>(reps.size());
    MetricSeries out;
    out.metric = metric;
    out.points.reserve(grid.size());
    std::vector<double> column(reps.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        for (std::size_t r = 0; r < reps.size(); ++r)
            column[r] = reps[r].values[j];
        // Summing in sorted order makes the result independent of repetition order.
        std::sort(column.begin(), column.end());
        // Shifting by the smallest value keeps the mean of equal values exact.
        const double shift = column.front();
        double sum = 0.0;
        for (double v : column)
            sum += v - shift;
        const double mean = shift + sum / n;
        double ss = 0.0;
        for (double v : column)
            ss += (v - mean) * (v - mean);
        const double sd = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        out.points.push_back({grid[j], mean, sd, n});
    }
    return out;
}

LogBand log_band(double mean, double std)
{
    if (!(mean > 0.0))
        throw ConfigError("log_band: mean must be positive");
    return {std::log10(mean), std / (mean * std::numbers::ln10)};
}

double loglog_slope(const MetricSeries& series, long first_step, long last_step)
{
    std::vector<double> lx, ly;
    for (const MetricPoint& p : series.points) {
        if (p.step < first_step || p.step > last_step)
            continue;
        if (!(p.mean > 0.0) || p.step <= 0)
            throw ConfigError("loglog_slope: steps and means must be positive");
        lx.push_back(std::log10(static_cast<double>(p.step)));
        ly.push_back(std::log10(p.mean));
    }
    if (lx.size() < 3)
        throw ConfigError("loglog_slope: need at least 3 checkpoints in the window");
    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i)
        mx += lx[i], my += ly[i];
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace fgd
