#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "fgd/linmodel.hpp"

namespace fgd {

enum class MetricKind { Mse, Mspe };

std::string_view metric_name(MetricKind kind);

/// ||theta - theta_star||^2.
double mse(const Vector& theta, const Vector& theta_star);

/// (theta - theta_star)^T Sigma (theta - theta_star), Sigma analytic.
double mspe(const Vector& theta, const Vector& theta_star, const Matrix& sigma);

/// Held-out estimate: mean of (x^T (theta_star - theta))^2 over n fresh inputs.
double empirical_mspe(const Vector& theta, const Vector& theta_star, const CovariateSpec& spec,
                      long n_samples, Rng& rng);

/// Values of one repetition on a checkpoint grid.
struct RepSeries
{
    std::vector<long> steps;
    std::vector<double> values;
};

struct MetricPoint
{
    long step = 0;
    double mean = 0.0;
    /// Sample standard deviation, n - 1 denominator; 0 for a single repetition.
    double std = 0.0;
    int reps = 0;
};

struct MetricSeries
{
    MetricKind metric = MetricKind::Mse;
    std::vector<MetricPoint> points;
};

/// Cross-repetition mean and std per checkpoint. Every repetition must share the
/// same strictly increasing grid (ConfigError otherwise). The result does not
/// depend on the order of the repetitions.
MetricSeries aggregate(MetricKind metric, std::span<const RepSeries> reps);

/// Error band for log-log plots: log10(mean) +- std / (mean ln 10).
struct LogBand
{
    double center = 0.0;
    double halfwidth = 0.0;
};

LogBand log_band(double mean, double std);

/// Least-squares slope of log10(mean) against log10(step) over the points with
/// step in [first_step, last_step]. Needs at least 3 points, all positive.
double loglog_slope(const MetricSeries& series, long first_step, long last_step);

}  // namespace fgd
