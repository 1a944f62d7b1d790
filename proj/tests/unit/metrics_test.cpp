#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/QR>

#include "fgd/errors.hpp"
#include "fgd/metrics.hpp"
#include "support.hpp"

using namespace fgd;

namespace {

MetricSeries power_law(double c, double p, const std::vector<long>& steps)
{
    MetricSeries s;
    for (long k : steps)
        s.points.push_back({k, c * std::pow(static_cast<double>(k), p), 0.0, 1});
    return s;
}

}  // namespace

TEST_CASE("mse")
{
    const Vector theta = Vector::LinSpaced(4, -1.0, 2.0);
    CHECK(mse(theta, theta) == 0.0);
    Vector a(2), b(2);
    a << 4, 6;
    b << 1, 2;
    CHECK(mse(a, b) == 25.0);
    CHECK_THROWS_AS(mse(a, theta), ConfigError);
}

TEST_CASE("property: mse is invariant to a shared permutation")
{
    Rng rng(1);
    for (int t = 0; t < 100; ++t) {
        const int d = test::random_int(rng, 1, 20);
        const Vector a = rng.normal_vector(d);
        const Vector b = rng.normal_vector(d);
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(d);
        perm.setIdentity();
        std::shuffle(perm.indices().data(), perm.indices().data() + d, rng);
        REQUIRE(mse(perm * a, perm * b) == doctest::Approx(mse(a, b)).epsilon(1e-14));
    }
}

TEST_CASE("mspe")
{
    Rng rng(2);
    SUBCASE("identity form is mse")
    {
        for (int t = 0; t < 10; ++t) {
            const int d = test::random_int(rng, 1, 8);
            const Vector a = rng.normal_vector(d), b = rng.normal_vector(d);
            CHECK(mspe(a, b, Matrix::Identity(d, d)) == doctest::Approx(mse(a, b)).epsilon(1e-14));
        }
    }
    SUBCASE("null direction is invisible")
    {
        Matrix sigma = Matrix::Zero(2, 2);
        sigma(0, 0) = 4.0;
        CHECK(mspe(Vector::Ones(2), Vector::Zero(2), sigma) == 4.0);
    }
    SUBCASE("errors orthogonal to span(U) are not seen")
    {
        for (int t = 0; t < 10; ++t) {
            const int d = test::random_int(rng, 2, 8);
            const int s = test::random_int(rng, 1, d - 1);
            const Matrix u = test::random_matrix(d, s, rng);
            const Matrix q = Eigen::HouseholderQR<Matrix>(u).householderQ();
            const Vector orth = q.rightCols(d - s) * rng.normal_vector(d - s);
            const Vector star = rng.normal_vector(d);
            const double scale = (u * u.transpose()).norm() * orth.squaredNorm();
            CHECK(std::abs(mspe(star + orth, star, u * u.transpose())) <= 1e-12 * scale);
        }
    }
    CHECK_THROWS_AS(mspe(Vector::Zero(2), Vector::Zero(2), Matrix::Identity(3, 3)), ConfigError);
}

TEST_CASE("property: mspe lies between the extreme eigenvalues times mse")
{
    Rng rng(3);
    for (int t = 0; t < 200; ++t) {
        const int d = test::random_int(rng, 1, 10);
        const SecondMomentSummary s = summarize_second_moment(test::random_spd(d, rng, 0.05));
        const Vector a = rng.normal_vector(d), b = rng.normal_vector(d);
        const double m = mse(a, b);
        const double p = mspe(a, b, s.sigma);
        REQUIRE(p >= s.lambda_min * m * (1.0 - 1e-12));
        REQUIRE(p <= s.lambda_max * m * (1.0 + 1e-12));
    }
}

TEST_CASE("empirical mspe approaches the quadratic form")
{
    Rng rng(4);
    const CovariateSpec spec = CovariateSpec::full_cube(3);
    Vector a(3);
    a << 1, -2, 0.5;
    const double exact = mspe(a, Vector::Zero(3), second_moment(spec).sigma);
    CHECK(empirical_mspe(a, Vector::Zero(3), spec, 1000000, rng) == doctest::Approx(exact).epsilon(0.01));
}

TEST_CASE("aggregate")
{
    SUBCASE("identical values")
    {
        const std::vector<RepSeries> reps(4, RepSeries{{1, 2}, {0.7, 0.3}});
        const MetricSeries s = aggregate(MetricKind::Mse, reps);
        CHECK(s.points[0].std == 0.0);
        CHECK(s.points[1].mean == doctest::Approx(0.3).epsilon(1e-15));
        CHECK(s.points[1].reps == 4);
    }
    SUBCASE("two-point sample")
    {
        const std::vector<RepSeries> reps{{{5}, {1.0}}, {{5}, {3.0}}};
        const MetricSeries s = aggregate(MetricKind::Mspe, reps);
        CHECK(s.metric == MetricKind::Mspe);
        CHECK(s.points[0].mean == 2.0);
        CHECK(s.points[0].std == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    }
    SUBCASE("single repetition")
    {
        const std::vector<RepSeries> reps{{{1, 10}, {4.0, 2.0}}};
        const MetricSeries s = aggregate(MetricKind::Mse, reps);
        CHECK(s.points[0].std == 0.0);
        CHECK(s.points[0].reps == 1);
    }
    SUBCASE("bad grids")
    {
        const std::vector<RepSeries> mismatched{{{1, 2}, {1.0, 1.0}}, {{1, 3}, {1.0, 1.0}}};
        CHECK_THROWS_AS(aggregate(MetricKind::Mse, mismatched), ConfigError);
        const std::vector<RepSeries> unsorted{{{2, 1}, {1.0, 1.0}}};
        CHECK_THROWS_AS(aggregate(MetricKind::Mse, unsorted), ConfigError);
        CHECK_THROWS_AS(aggregate(MetricKind::Mse, std::vector<RepSeries>{}), ConfigError);
    }
}

TEST_CASE("property: aggregate ignores repetition order")
{
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        const int n = test::random_int(rng, 1, 12);
        const std::vector<long> grid{1, 10, 100};
        std::vector<RepSeries> reps;
        for (int r = 0; r < n; ++r)
            reps.push_back({grid, {rng.uniform(0, 10), std::exp(rng.normal()), rng.uniform()}});
        std::vector<RepSeries> shuffled = reps;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const MetricSeries a = aggregate(MetricKind::Mse, reps);
        const MetricSeries b = aggregate(MetricKind::Mse, shuffled);
        for (std::size_t j = 0; j < grid.size(); ++j) {
            REQUIRE(a.points[j].mean == b.points[j].mean);
            REQUIRE(a.points[j].std == b.points[j].std);
            REQUIRE(a.points[j].std >= 0.0);
        }
    }
}

TEST_CASE("log band")
{
    CHECK(log_band(1.0, std::numbers::ln10).halfwidth == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(log_band(3.0, 0.0).halfwidth == 0.0);
    const LogBand b = log_band(100.0, 10.0);
    CHECK(b.center == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(b.halfwidth == doctest::Approx(0.04343).epsilon(1e-4));
    CHECK_THROWS_AS(log_band(0.0, 1.0), ConfigError);
    CHECK_THROWS_AS(log_band(-1.0, 1.0), ConfigError);
}

TEST_CASE("property: log band width does not depend on the scale of the values")
{
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        const int n = test::random_int(rng, 2, 10);
        const double c = std::exp(rng.uniform(-5, 5));
        std::vector<RepSeries> reps, scaled;
        for (int r = 0; r < n; ++r) {
            const double v = std::exp(rng.normal());
            reps.push_back({{1}, {v}});
            scaled.push_back({{1}, {c * v}});
        }
        const MetricPoint p = aggregate(MetricKind::Mse, reps).points[0];
        const MetricPoint q = aggregate(MetricKind::Mse, scaled).points[0];
        REQUIRE(log_band(q.mean, q.std).halfwidth
                == doctest::Approx(log_band(p.mean, p.std).halfwidth).epsilon(1e-12));
    }
}

TEST_CASE("log-log slope")
{
    const std::vector<long> steps{1, 3, 10, 30, 100, 300, 1000};
    CHECK(std::abs(loglog_slope(power_law(7.0, -1.0, steps), 1, 1000) + 1.0) <= 1e-10);
    CHECK(std::abs(loglog_slope(power_law(0.2, -2.0, steps), 1, 1000) + 2.0) <= 1e-10);
    CHECK(std::abs(loglog_slope(power_law(4.0, 0.0, steps), 1, 1000)) <= 1e-12);
    CHECK(std::abs(loglog_slope(power_law(1.0, -0.5, steps), 10, 300) + 0.5) <= 1e-10);
    CHECK_THROWS_AS(loglog_slope(power_law(1.0, -1.0, steps), 10, 30), ConfigError);
    MetricSeries bad = power_law(1.0, -1.0, steps);
    bad.points[2].mean = 0.0;
    CHECK_THROWS_AS(loglog_slope(bad, 1, 1000), ConfigError);
}

TEST_CASE("metric names")
{
    CHECK(metric_name(MetricKind::Mse) == "mse");
    CHECK(metric_name(MetricKind::Mspe) == "mspe");
}
