#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fgd/errors.hpp"
#include "fgd/metrics.hpp"
#include "fgd/theory.hpp"
#include "support.hpp"

using namespace fgd;

namespace {

Vector vec(std::initializer_list<double> values)
{
    Vector v(static_cast<Eigen::Index>(values.size()));
    Eigen::Index i = 0;
    for (double x : values)
        v(i++) = x;
    return v;
}

// Long-double evaluation of the MSPE bound, written from the formula.
long double mspe_bound_ref(long k, long double c1, long double c2, long double b, long double lmax,
                           long double tr, int ell, long double mspe0)
{
    const long double c = c1 * c2;
    const long double first = (1 + c) / (k + 1 + c);
    return first * first * mspe0 + 16 * b * c1 * c1 * (lmax + tr / ell) * k / ((k + 1 + c) * (k + 1 + c));
}

long double mse_bound_ref(long k, long double c1, long double c2, long double tr, int d, int ell,
                          long double mse0)
{
    const long double pi = 3.141592653589793238462643383279502884L;
    const long double denom = k + 1 + c1 * c2;
    const long double lead = (1 + c1 * c2) * (1 + c1 * c2) / (denom * denom);
    const long double tail = 8 * c1 * c1 * tr * (2 / pi + static_cast<long double>(d) / ell);
    return lead * mse0 + tail * k / (denom * denom);
}

}  // namespace

TEST_CASE("bias with ell = 1 is the deterministic contraction")
{
    const BiasPlan plan{Schedule::constant(0.1), 1, 1, CovariateSpec::full_cube(2), 0};
    Rng rng(1);
    const BiasEstimate est = bias_vector(plan, vec({1, 0}), Vector::Zero(2), rng);
    CHECK(est.bias(0) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(est.bias(1) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(est.std_error.isZero());
}

TEST_CASE("bias after zero steps is the initial error")
{
    Rng rng(2);
    const BiasPlan plan{Schedule::constant(0.1), 3, 0, CovariateSpec::full_cube(2), 0};
    const BiasEstimate est = bias_vector(plan, vec({0.5, 2}), vec({-1, 1}), rng);
    CHECK(est.bias == vec({1.5, 1}));
}

TEST_CASE("bias with ell = 2 against a brute-force matrix average")
{
    const CovariateSpec spec = CovariateSpec::full_cube(2);
    const double alpha = 0.1;
    Rng rng(3);
    const long n = 1000000;
    double sum0 = 0.0, sq0 = 0.0, sum1 = 0.0, sq1 = 0.0;
    for (long i = 0; i < n; ++i) {
        const Vector x = sample_covariate(spec, rng);
        const Matrix m = Matrix::Identity(2, 2) - alpha * x * x.transpose();
        const Vector col = (m * m).col(0);
        sum0 += col(0);
        sq0 += col(0) * col(0);
        sum1 += col(1);
        sq1 += col(1) * col(1);
    }
    const double mean0 = sum0 / n, mean1 = sum1 / n;
    const double se0 = std::sqrt((sq0 / n - mean0 * mean0) / n);
    const double se1 = std::sqrt((sq1 / n - mean1 * mean1) / n);

    const BiasPlan plan{Schedule::constant(alpha, 2), 2, 1, spec, 1000000};
    const BiasEstimate est = bias_vector(plan, vec({1, 0}), Vector::Zero(2), rng);
    CHECK(std::abs(est.bias(0) - mean0) <= 3.0 * std::hypot(se0, est.std_error(0)));
    CHECK(std::abs(est.bias(1) - mean1) <= 3.0 * std::hypot(se1, est.std_error(1)));

    // E[(I - a x x^T)^2] e1 = (1 - 2a + a^2 (E x^4 + 1)) e1 with E x^4 = 9/5
    const double exact = 1.0 - 2.0 * alpha + alpha * alpha * (9.0 / 5.0 + 1.0);
    CHECK(std::abs(mean0 - exact) <= 3.0 * se0);
    CHECK(std::abs(est.bias(0) - exact) <= 3.0 * est.std_error(0));
}

TEST_CASE("bias needs enough draws when ell >= 2")
{
    Rng rng(4);
    const BiasPlan plan{Schedule::constant(0.1, 2), 2, 3, CovariateSpec::full_cube(2), 100};
    CHECK_THROWS_AS(bias_vector(plan, Vector::Zero(2), Vector::Ones(2), rng), ConfigError);
}

TEST_CASE("property: ell = 1 bias is the product of I - alpha_i Sigma")
{
    Rng rng(5);
    for (int t = 0; t < 100; ++t) {
        const int d = test::random_int(rng, 1, 6);
        const CovariateSpec spec = t % 2 == 0
                                       ? CovariateSpec::full_cube(d, rng.uniform(0.5, 2.0))
                                       : CovariateSpec::low_rank(test::random_matrix(d, test::random_int(rng, 1, d), rng));
        const Matrix sigma = second_moment(spec).sigma;
        const Schedule sched = Schedule::theorem_form(rng.uniform(1, 5), rng.uniform(5, 50), 1);
        const long k = test::random_int(rng, 0, 40);
        const Vector theta0 = rng.normal_vector(d);
        const Vector star = rng.normal_vector(d);
        const BiasEstimate est = bias_vector({sched, 1, k, spec, 0}, theta0, star, rng);
        Vector e = theta0 - star;
        for (long i = 1; i <= k; ++i) {
            const Matrix f = Matrix::Identity(d, d) - learning_rate(sched, i) * sigma;
            e = f * e;
        }
        REQUIRE(est.bias == e);
    }
}

TEST_CASE("property: bias prediction matches simulated trajectories")
{
    Rng rng(6);
    int worst_instance = -1;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int d = test::random_int(rng, 1, 3);
        const int ell = test::random_int(rng, 1, 3);
        const long k = test::random_int(rng, 1, 10);
        const CovariateSpec spec = CovariateSpec::full_cube(d);
        const SecondMomentSummary s = second_moment(spec);
        const BiasPlan plan{theorem2_schedule(s, spec.norm_bound(), ell), ell, k, spec, 20000};
        const Vector star = draw_theta_star(d, ThetaStarPolicy::UniformBox, rng);
        const OracleResult r = oracle_bias(plan, Vector::Zero(d), star, 10000, rng);
        const double z = r.max_standardized_deviation();
        if (z > worst) {
            worst = z;
            worst_instance = t;
        }
    }
    INFO("instance " << worst_instance);
    CHECK(worst <= 4.0);
}

TEST_CASE("MSPE bound")
{
    const SecondMomentSummary s = second_moment(CovariateSpec::full_cube(1));
    const Schedule sched = Schedule::theorem_form(2.0, 36.0, 1);
    SUBCASE("k = 0 is the initial error")
    {
        CHECK(theorem2_bound(0, sched, 3.0, s, 1.7) == 1.7);
    }
    SUBCASE("d = 1, b = 3, k = 100")
    {
        const double v = theorem2_bound(100, sched, 3.0, s, 1.0);
        const double ref = static_cast<double>(mspe_bound_ref(100, 2, 36, 3, 1, 1, 1, 1));
        CHECK(v == doctest::Approx(ref).epsilon(1e-14));
        CHECK(v == doctest::Approx(1.46110).epsilon(1e-5));
        CHECK(std::abs(v - 1.4608) <= 1e-3);
    }
    SUBCASE("nonincreasing in ell")
    {
        const SecondMomentSummary s4 = second_moment(CovariateSpec::full_cube(4));
        const double b = 12.0;
        const ScheduleConstants c = theorem2_constants(s4, b, 1);
        double prev = INFINITY;
        for (int ell = 1; ell <= 64; ell *= 2) {
            const double v = theorem2_bound(500, Schedule::theorem_form(c.c1, c.c2, ell), b, s4, 5.0);
            CHECK(v <= prev);
            prev = v;
        }
    }
    SUBCASE("inadmissible constants")
    {
        CHECK_THROWS_AS(theorem2_bound(10, Schedule::theorem_form(1.0, 36.0, 1), 3.0, s, 1.0),
                        InadmissibleError);
        CHECK_THROWS_AS(theorem2_bound(10, Schedule::constant(0.01), 3.0, s, 1.0), InadmissibleError);
    }
    SUBCASE("report")
    {
        const std::vector<long> steps{0, 10, 100};
        const BoundReport r = theorem2_report(steps, sched, 3.0, s, 1.0);
        REQUIRE(r.entries.size() == 3);
        CHECK(r.entries[2].bound == theorem2_bound(100, sched, 3.0, s, 1.0));
        CHECK(r.c2 == 36.0);
        CHECK(r.trace == 1.0);
    }
}

TEST_CASE("MSE bound")
{
    const SecondMomentSummary s = second_moment(CovariateSpec::full_cube(2));
    const double c1 = std::sqrt(32.0 * std::numbers::pi);
    const Schedule sched = Schedule::theorem_form(c1, 10.0, 2);
    CHECK(theorem4_bound(0, sched, s, 2, 4.0) == 4.0);
    const double v = theorem4_bound(50, sched, s, 2, 4.0);
    CHECK(v == doctest::Approx(static_cast<double>(mse_bound_ref(50, c1, 10, 2, 2, 2, 4))).epsilon(1e-14));

    // noise coefficient tends to 8 c1^2 tr(Sigma) 2/pi as ell grows
    const double limit = 8.0 * c1 * c1 * 2.0 * 2.0 / std::numbers::pi;
    const long k = 1000;
    const double denom = (k + 1.0 + c1 * 10.0) * (k + 1.0 + c1 * 10.0);
    const double coef = (theorem4_bound(k, Schedule::theorem_form(c1, 10.0, 1 << 20), s, 2, 0.0)) * denom / k;
    CHECK(coef == doctest::Approx(limit).epsilon(1e-5));

    Matrix u(3, 2);
    u << 1, 0, 0, 1, 0, 0;
    const SecondMomentSummary low = second_moment(CovariateSpec::low_rank(u));
    CHECK_THROWS_AS(theorem4_bound(5, Schedule::theorem_form(100.0, 10.0, 1), low, 3, 1.0),
                    InadmissibleError);
    CHECK_THROWS_AS(theorem4_bound(5, sched, s, 3, 1.0), ConfigError);
}

TEST_CASE("property: MSPE bound dominates simulated runs")
{
    Rng rng(7);
    for (int t = 0; t < 8; ++t) {
        const int d = test::random_int(rng, 1, 4);
        const int ell = test::random_int(rng, 1, 3);
        const CovariateSpec spec = t % 2 == 0
                                       ? CovariateSpec::full_cube(d)
                                       : CovariateSpec::low_rank(test::random_matrix(d, test::random_int(rng, 1, d), rng));
        const SecondMomentSummary s = second_moment(spec);
        const double b = spec.norm_bound();
        const ScheduleConstants c = theorem2_constants(s, b, ell);
        const double grow = rng.uniform(1.0, 3.0);
        const Schedule sched = Schedule::theorem_form(c.c1 * grow, c.c2, ell);
        const ModelSpec model(spec, draw_theta_star(d, ThetaStarPolicy::UniformBox, rng));
        const long n = 3000;
        const std::vector<long> grid{0, 1, 2, 5, 10, 30, 100, 300, 1000, 3000};
        const int reps = 50;
        std::vector<RepSeries> runs;
        for (int r = 0; r < reps; ++r) {
            Rng data(rng()), xi(rng());
            const auto path = run_trajectory(model, OptimizerKind::fgd(ell), sched, n, grid,
                                             Vector::Zero(d), data, xi);
            RepSeries series;
            for (const Checkpoint& cp : path) {
                series.steps.push_back(cp.step);
                series.values.push_back(mspe(cp.theta, model.theta_star(), s.sigma));
            }
            runs.push_back(std::move(series));
        }
        const MetricSeries agg = aggregate(MetricKind::Mspe, runs);
        const double mspe0 = mspe(Vector::Zero(d), model.theta_star(), s.sigma);
        for (const MetricPoint& p : agg.points) {
            const double bound = theorem2_bound(p.step, sched, b, s, mspe0);
            INFO("instance " << t << " step " << p.step);
            REQUIRE(p.mean <= bound * (1.0 + 1e-12) + 3.0 * p.std / std::sqrt(static_cast<double>(reps)));
        }
    }
}

TEST_CASE("Isserlis oracle")
{
    Rng rng(8);
    SUBCASE("standard normal, u = e1")
    {
        const OracleResult r = oracle_isserlis(Matrix::Identity(3, 3), vec({1, 0, 0}), 1000, rng);
        Matrix expected = Matrix::Identity(3, 3);
        expected(0, 0) = 3.0;
        CHECK(r.exact == expected);
    }
    SUBCASE("u = 0")
    {
        const OracleResult r = oracle_isserlis(test::random_spd(3, rng), Vector::Zero(3), 1000, rng);
        CHECK(r.exact.isZero(0.0));
        CHECK(r.empirical.isZero(0.0));
    }
    SUBCASE("diag(1, 4), u = (1, 1)")
    {
        const Matrix gamma = vec({1, 4}).asDiagonal();
        const OracleResult r = oracle_isserlis(gamma, vec({1, 1}), 10000000, rng);
        Eigen::Index i, j;
        r.std_error.maxCoeff(&i, &j);
        CHECK(r.max_abs_deviation() <= 5.0 * r.std_error(i, j));
        Matrix expected(2, 2);
        expected << 2 + 5, 8, 8, 32 + 20;
        CHECK((r.exact - expected).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK_THROWS_AS(oracle_isserlis(-Matrix::Identity(2, 2), vec({1, 0}), 10, rng), ConfigError);
}

TEST_CASE("sign moment oracle")
{
    SUBCASE("a = e1")
    {
        Rng rng(9);
        const OracleResult r = oracle_sign_moment(vec({1, 0}), 1000, rng);
        CHECK(r.exact(0) == doctest::Approx(0.79788).epsilon(1e-5));
        CHECK(r.exact(1) == 0.0);
    }
    SUBCASE("scale invariance")
    {
        Rng a(10), b(10);
        const OracleResult r1 = oracle_sign_moment(vec({0.3, -1.2}), 5000, a);
        const OracleResult r5 = oracle_sign_moment(vec({1.5, -6.0}), 5000, b);
        CHECK(((5.0 * r1.empirical) - r5.empirical).cwiseAbs().maxCoeff() <= 1e-12);
    }
    SUBCASE("a = (3, 4) at 1e7 draws")
    {
        Rng rng(11);
        const OracleResult r = oracle_sign_moment(vec({3, 4}), 10000000, rng);
        CHECK(r.max_abs_deviation() <= 5.0 * 5.0 * std::sqrt(1e-7) * 3.0);
        CHECK(r.max_standardized_deviation() <= 5.0);
    }
    Rng rng(12);
    CHECK_THROWS_AS(oracle_sign_moment(Vector::Zero(3), 10, rng), ConfigError);
}

TEST_CASE("forward gradient oracle")
{
    Rng rng(13);
    for (int t = 0; t < 5; ++t) {
        const Vector v = rng.normal_vector(test::random_int(rng, 1, 6));
        const OracleResult r = oracle_forward_gradient(v, 200000, rng);
        CHECK(r.exact == v);
        CHECK(r.max_standardized_deviation() <= 5.0);
    }
}

TEST_CASE("noise correlation oracle")
{
    Rng rng(14);
    SUBCASE("r = 0")
    {
        const OracleResult r = oracle_noise_correlation(vec({1, 0.5}), 0.2, 0, 1000, rng);
        CHECK(r.exact(0, 0) == 0.0);
        CHECK(r.empirical(0, 0) == 0.0);
    }
    SUBCASE("alpha x^T x = 0.5, r = 2")
    {
        const OracleResult r = oracle_noise_correlation(vec({1, 1}), 0.25, 2, 400000, rng);
        CHECK(r.exact(0, 0) == 0.75);
        CHECK(r.max_standardized_deviation() <= 5.0);
    }
    SUBCASE("closed form never exceeds min(1, 2 alpha r x^T x)")
    {
        for (int t = 0; t < 200; ++t) {
            const Vector x = rng.normal_vector(test::random_int(rng, 1, 5));
            const double alpha = rng.uniform(0.0, 0.75) / x.squaredNorm();
            const int r = test::random_int(rng, 0, 30);
            const double exact = oracle_noise_correlation(x, alpha, r, 1, rng).exact(0, 0);
            REQUIRE(exact <= std::min(1.0, 2.0 * alpha * r * x.squaredNorm()) + 1e-15);
        }
    }
    CHECK_THROWS_AS(oracle_noise_correlation(vec({1, 1}), 0.5, 2, 100, rng), InadmissibleError);
}

TEST_CASE("oracle deviations shrink with more draws")
{
    // Average the max deviation over a few independent runs at each size.
    auto mean_dev = [](auto&& run, long mc) {
        double total = 0.0;
        for (std::uint64_t s = 0; s < 6; ++s) {
            Rng rng(1000 + s);
            total += run(mc, rng).max_abs_deviation();
        }
        return total / 6.0;
    };
    const Matrix gamma = vec({1, 2, 0.5}).asDiagonal();
    const auto isserlis = [&](long mc, Rng& rng) { return oracle_isserlis(gamma, vec({1, -1, 0.5}), mc, rng); };
    const auto sign = [](long mc, Rng& rng) { return oracle_sign_moment(vec({1, 2, -1}), mc, rng); };
    const auto forward = [](long mc, Rng& rng) { return oracle_forward_gradient(vec({0.5, -1, 2}), mc, rng); };
    const auto noise = [](long mc, Rng& rng) { return oracle_noise_correlation(vec({1, 1}), 0.2, 3, mc, rng); };

    CHECK(mean_dev(isserlis, 1000) >= 3.0 * mean_dev(isserlis, 100000));
    CHECK(mean_dev(sign, 1000) >= 3.0 * mean_dev(sign, 100000));
    CHECK(mean_dev(forward, 1000) >= 3.0 * mean_dev(forward, 100000));
    CHECK(mean_dev(noise, 1000) >= 3.0 * mean_dev(noise, 100000));
}
