#include "ekflab/diagnostics.hpp"

#include "ekflab/scenarios.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

using namespace ekflab;

namespace {

Vector vec1(double a) {
    Vector v(1);
    v(0) = a;
    return v;
}

}  // namespace

TEST_CASE("covariance_bounds") {
    SUBCASE("constant identity covariance") {
        const FilterRun run = test::constant_covariance_run(Matrix::Identity(2, 2), 10, 0.1);
        const auto [m1, m5] = covariance_bounds(run);
        CHECK(m1 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m5 == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("scalar Riccati relaxation from P0 = 3") {
        FilterConfig cfg;
        cfg.G = Matrix::Identity(1, 1);
        cfg.xhat0 = vec1(0.0);
        cfg.P0 = Matrix::Constant(1, 1, 3.0);
        cfg.form = FilterForm::covariance;
        cfg.integrator.dt = 1e-3;
        cfg.integrator.t_end = 10.0;
        const FilterRun run =
            kalman_reference(Matrix::Zero(1, 1), Matrix::Identity(1, 1), vec1(0.0), cfg);
        REQUIRE(run.status == RunStatus::completed);
        const auto [m1, m5] = covariance_bounds(run);
        CHECK(m1 == doctest::Approx(3.0).epsilon(1e-9));  // P decays from 3
        CHECK(m5 == doctest::Approx(1.0).epsilon(1e-6));  // Q grows from 1/3 toward 1
        // supremum property
        for (const auto& P : run.P) {
            CHECK(m1 >= P(0, 0) - 1e-15);
            CHECK(m5 >= 1.0 / P(0, 0) - 1e-15);
        }
    }
    SUBCASE("rejects an empty run") {
        CHECK_THROWS_AS(covariance_bounds(FilterRun{}), std::invalid_argument);
    }
}

TEST_CASE("convergence_radius formula") {
    CHECK(convergence_radius(1, 1, 1, 1) == 0.5);
    CHECK(convergence_radius(4, 1, 1, 1) == doctest::Approx(1.0 / 256.0).epsilon(1e-14));
    CHECK(convergence_radius(1, 2, 1, 1) == doctest::Approx(1.0 / 8.0).epsilon(1e-14));

    SUBCASE("monotonicity") {
        const double base = convergence_radius(1, 1, 1, 1);
        CHECK(convergence_radius(2, 1, 1, 1) < base);
        CHECK(convergence_radius(1, 2, 1, 1) < base);
        CHECK(convergence_radius(1, 1, 2, 1) > base);
        CHECK(convergence_radius(1, 1, 1, 2) < base);
    }
    SUBCASE("rejects nonpositive arguments") {
        CHECK_THROWS_AS(convergence_radius(0, 1, 1, 1), std::invalid_argument);
        CHECK_THROWS_AS(convergence_radius(1, -1, 1, 1), std::invalid_argument);
        CHECK_THROWS_AS(convergence_radius(1, 1, 0, 1), std::invalid_argument);
        CHECK_THROWS_AS(convergence_radius(1, 1, 1, 0), std::invalid_argument);
    }
}

TEST_CASE("lyapunov_decay") {
    SUBCASE("pure exponential enters immediately with slope -2") {
        std::vector<double> times, V;
        for (int k = 0; k <= 1000; ++k) {
            const double t = 0.01 * k;
            times.push_back(t);
            V.push_back(std::exp(-2.0 * t));
        }
        const auto [entry, rate] = lyapunov_decay(times, V, 10.0);
        REQUIRE(entry.has_value());
        CHECK(*entry == 0.0);
        REQUIRE(rate.has_value());
        CHECK(std::abs(*rate + 2.0) <= 1e-6);
    }
    SUBCASE("constant V above the threshold never enters") {
        const double radius = 0.5;
        std::vector<double> times, V;
        for (int k = 0; k <= 100; ++k) {
            times.push_back(0.1 * k);
            V.push_back(4.0 * radius * radius);
        }
        const auto [entry, rate] = lyapunov_decay(times, V, radius);
        CHECK(!entry.has_value());
        CHECK(!rate.has_value());
    }
    SUBCASE("exact zeros after entry leave the rate unfitted") {
        std::vector<double> times = {0.0, 1.0, 2.0};
        std::vector<double> V = {0.0, 0.0, 0.0};
        const auto [entry, rate] = lyapunov_decay(times, V, 1.0);
        REQUIRE(entry.has_value());
        CHECK(*entry == 0.0);
        CHECK(!rate.has_value());
    }
}

TEST_CASE("kernel_obstruction") {
    Matrix C(1, 2);
    C << 1, 0;
    SUBCASE("positive a2 is caught with witness e2") {
        Matrix A(2, 2);
        A << 0, 1, 1, 1;
        const auto res = kernel_obstruction(A, C);
        REQUIRE(res.obstructed);
        CHECK(res.value == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(res.witness.norm() - 1.0) <= 1e-12);
        CHECK(std::abs(std::abs(res.witness(1)) - 1.0) <= 1e-12);
        CHECK(std::abs(res.witness(0)) <= 1e-12);
    }
    SUBCASE("negative restricted quadratic form is inconclusive") {
        Matrix A(2, 2);
        A << 0, 1, 1, -3;
        CHECK(!kernel_obstruction(A, C).obstructed);
    }
    SUBCASE("full-rank output has no kernel to test") {
        Matrix A(2, 2);
        A << 5, 0, 0, 5;
        CHECK(!kernel_obstruction(A, Matrix::Identity(2, 2)).obstructed);
    }
    SUBCASE("rejects a zero C") {
        CHECK_THROWS_AS(kernel_obstruction(Matrix::Identity(2, 2), Matrix::Zero(1, 2)),
                        std::invalid_argument);
    }
}

TEST_CASE("detectability_certificate") {
    Matrix C(1, 2);
    C << 1, 0;
    SUBCASE("already uniformly negative") {
        CHECK(detectability_certificate(-2.0 * Matrix::Identity(2, 2), C, Matrix::Zero(2, 1), 1.0));
    }
    SUBCASE("certifying gain for a stabilizable pair") {
        Matrix A(2, 2);
        A << 0, 1, -1, -3;
        Matrix Lambda(2, 1);
        Lambda << -3, 3;
        // sym(A + Lambda C) = [[-3, 1.5], [1.5, -3]], eigenvalues -1.5 and -4.5
        CHECK(detectability_certificate(A, C, Lambda, 1.0));
        CHECK(detectability_certificate(A, C, Lambda, 1.4));
        CHECK(!detectability_certificate(A, C, Lambda, 1.6));
    }
    SUBCASE("obstruction implies failure for every gain") {
        Matrix A(2, 2);
        A << 0, 1, 1, 1;
        REQUIRE(kernel_obstruction(A, C).obstructed);
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> entry(-10.0, 10.0);
        std::uniform_real_distribution<double> logalpha(-3.0, 1.0);
        for (int k = 0; k < 1000; ++k) {
            Matrix Lambda(2, 1);
            Lambda << entry(rng), entry(rng);
            const double alpha = std::pow(10.0, logalpha(rng));
            CHECK(!detectability_certificate(A, C, Lambda, alpha));
        }
    }
    SUBCASE("argument validation") {
        CHECK_THROWS_AS(detectability_certificate(Matrix::Identity(2, 2), C, Matrix::Zero(1, 1), 1.0),
                        std::invalid_argument);
        CHECK_THROWS_AS(detectability_certificate(Matrix::Identity(2, 2), C, Matrix::Zero(2, 1), 0.0),
                        std::invalid_argument);
    }
}

TEST_CASE("verdict classification") {
    SampleSeries s;
    s.times = {0.0, 1.0, 2.0};
    SUBCASE("contraction to the floor is converged") {
        s.error_norm = {1.0, 1e-3, 1e-9};
        s.V = {1, 1e-6, 1e-18};
        s.eigmin_P = {1, 1, 1};
        s.eigmax_P = {1, 1, 1};
        CHECK(classify(s) == Verdict::converged);
    }
    SUBCASE("blowup past 1e6 is diverged") {
        s.error_norm = {1.0, 1e7, 1e7};
        s.V = {1, 1, 1};
        s.eigmin_P = {1, 1, 1};
        s.eigmax_P = {1, 1, 1};
        CHECK(classify(s) == Verdict::diverged);
    }
    SUBCASE("no contraction over the horizon is diverged") {
        s.error_norm = {1.75, 1.9, 2.0};
        s.V = {1, 1, 1};
        s.eigmin_P = {1, 1, 1};
        s.eigmax_P = {1, 1, 1};
        CHECK(classify(s) == Verdict::diverged);
    }
    SUBCASE("partial contraction stays undetermined") {
        s.error_norm = {1.0, 0.6, 0.4};
        s.V = {1, 1, 1};
        s.eigmin_P = {1, 1, 1};
        s.eigmax_P = {1, 1, 1};
        CHECK(classify(s) == Verdict::undetermined);
    }
    SUBCASE("a nonfinite abort is diverged") {
        s.error_norm = {1.0, 2.0, 3.0};
        s.V = {1, 1, 1};
        s.eigmin_P = {1, 1, 1};
        s.eigmax_P = {1, 1, 1};
        s.status = RunStatus::aborted_nonfinite;
        CHECK(classify(s) == Verdict::diverged);
    }
}

TEST_CASE("diagnose assembles the full report") {
    FilterConfig cfg;
    cfg.G = Matrix::Identity(1, 1);
    cfg.xhat0 = vec1(2.0);
    cfg.P0 = Matrix::Identity(1, 1);
    cfg.form = FilterForm::both;
    cfg.integrator.dt = 1e-3;
    cfg.integrator.t_end = 20.0;
    const FilterRun run =
        kalman_reference(Matrix::Zero(1, 1), Matrix::Identity(1, 1), vec1(0.0), cfg);
    REQUIRE(run.status == RunStatus::completed);

    SUBCASE("with a positive L") {
        const DiagnosticsReport rep = diagnose(run, 1.0, 1.0);
        CHECK(rep.m1_hat > 0.0);
        CHECK(rep.m5_hat > 0.0);
        CHECK(rep.radius > 0.0);
        CHECK(std::isfinite(rep.radius));
        CHECK(rep.verdict == Verdict::converged);
        REQUIRE(rep.entry_time.has_value());
        REQUIRE(rep.decay_rate.has_value());
        CHECK(*rep.decay_rate < 0.0);
    }
    SUBCASE("L = 0 reads as an unconstrained radius") {
        const DiagnosticsReport rep = diagnose(run, 0.0, 1.0);
        CHECK(std::isinf(rep.radius));
        REQUIRE(rep.entry_time.has_value());
        CHECK(*rep.entry_time == 0.0);
    }
    SUBCASE("series round trip matches the run-level report") {
        const DiagnosticsReport a = diagnose(run, 1.0, 1.0);
        const DiagnosticsReport b = diagnose_series(series_from_run(run), 1.0, 1.0);
        CHECK(a.m1_hat == doctest::Approx(b.m1_hat).epsilon(1e-9));
        CHECK(a.m5_hat == doctest::Approx(b.m5_hat).epsilon(1e-6));
        CHECK(a.verdict == b.verdict);
    }
}
