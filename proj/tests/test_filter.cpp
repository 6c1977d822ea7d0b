#include "ekflab/filter.hpp"

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

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

IntegratorSettings integ(double dt, double t_end, int stride = 10) {
    IntegratorSettings s;
    s.method = StepMethod::rk4_fixed;
    s.dt = dt;
    s.t_end = t_end;
    s.sample_stride = stride;
    return s;
}

FilterConfig scalar_config(double xhat0, double P0, double dt, double t_end) {
    FilterConfig c;
    c.G = Matrix::Identity(1, 1);
    c.xhat0 = vec1(xhat0);
    c.P0 = Matrix::Constant(1, 1, P0);
    c.form = FilterForm::covariance;
    c.integrator = integ(dt, t_end);
    return c;
}

Matrix random_spd(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    Matrix R(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) R(i, j) = dist(rng);
    return R * R.transpose() + n * Matrix::Identity(n, n);
}

}  // namespace

TEST_CASE("riccati_rhs term by term") {
    SUBCASE("only Gamma survives") {
        CHECK(riccati_rhs(Matrix::Zero(2, 2), Matrix::Zero(1, 2), Matrix::Identity(2, 2),
                          Matrix::Identity(2, 2)) == Matrix::Identity(2, 2));
    }
    SUBCASE("pure quadratic term") {
        Matrix C(1, 2);
        C << 1, 0;
        Matrix expected(2, 2);
        expected << -1, 0, 0, 0;
        CHECK(riccati_rhs(Matrix::Zero(2, 2), C, Matrix::Identity(2, 2), Matrix::Zero(2, 2)) ==
              expected);
    }
    SUBCASE("all four terms") {
        Matrix A(2, 2), C(1, 2), expected(2, 2);
        A << 0, 1, 0, 0;
        C << 1, 0;
        expected << 0, 1, 1, 1;
        CHECK(riccati_rhs(A, C, Matrix::Identity(2, 2), Matrix::Identity(2, 2)) == expected);
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(riccati_rhs(Matrix::Zero(2, 2), Matrix::Zero(1, 3),
                                    Matrix::Identity(2, 2), Matrix::Identity(2, 2)),
                        std::invalid_argument);
    }
}

TEST_CASE("information_rhs") {
    SUBCASE("pure quadratic decay") {
        CHECK(information_rhs(Matrix::Zero(2, 2), Matrix::Zero(1, 2), Matrix::Identity(2, 2),
                              Matrix::Identity(2, 2)) == -Matrix::Identity(2, 2));
    }
    SUBCASE("only the output term survives at Q = 0") {
        Matrix C(1, 2);
        C << 1, 0;
        CHECK(information_rhs(Matrix::Zero(2, 2), C, Matrix::Zero(2, 2),
                              Matrix::Identity(2, 2)) == C.transpose() * C);
    }
    SUBCASE("matches -P^{-1} Pdot P^{-1} on random SPD matrices") {
        std::mt19937_64 rng(12345);
        std::normal_distribution<double> dist;
        for (int trial = 0; trial < 20; ++trial) {
            const int n = 3;
            Matrix A(n, n), C(1, n);
            for (int i = 0; i < n; ++i) {
                C(0, i) = dist(rng);
                for (int j = 0; j < n; ++j) A(i, j) = dist(rng);
            }
            const Matrix P = random_spd(n, rng);
            const Matrix Gamma = random_spd(n, rng);
            const Matrix Pinv = P.inverse();
            const Matrix lhs = information_rhs(A, C, Pinv, Gamma);
            const Matrix rhs = -Pinv * riccati_rhs(A, C, P, Gamma) * Pinv;
            CHECK((lhs - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm()));
        }
    }
}

TEST_CASE("simulate_truth") {
    SUBCASE("Krener-Duarte equilibrium at 1 is held to 1e-9 over [0,50]") {
        const System sys = krener_duarte();
        const TruthRun tr = simulate_truth(sys, vec1(1.0), InputSignal::zero(0), integ(1e-3, 50.0));
        REQUIRE(tr.outcome.ok());
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            CHECK(std::abs(tr.x[k](0) - 1.0) <= 1e-9);
            CHECK(std::abs(tr.y[k](0) - 0.5) <= 1e-9);
        }
    }
    SUBCASE("unstable equilibrium at 0 is preserved by an exact zero") {
        const System sys = krener_duarte();
        const TruthRun tr = simulate_truth(sys, vec1(0.0), InputSignal::zero(0), integ(1e-3, 50.0));
        REQUIRE(tr.outcome.ok());
        for (const auto& x : tr.x) CHECK(x(0) == 0.0);
    }
    SUBCASE("double integrator drifts linearly") {
        const System sys = linear_observable(0.0, 0.0);
        const TruthRun tr = simulate_truth(sys, vec2(0.0, 1.0), InputSignal::zero(0), integ(1e-3, 10.0));
        REQUIRE(tr.outcome.ok());
        for (std::size_t k = 0; k < tr.times.size(); ++k) {
            CHECK(std::abs(tr.x[k](0) - tr.times[k]) <= 1e-9);
            CHECK(tr.x[k](1) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("nonfinite blowup is reported with the failure time") {
        const System sys = krener_duarte();
        const TruthRun tr = simulate_truth(sys, vec1(1e200), InputSignal::zero(0), integ(1e-3, 1.0));
        CHECK(tr.outcome.status == IntegrationStatus::nonfinite_state);
        CHECK(!tr.outcome.message.empty());
    }
}

TEST_CASE("run_ekf on the linear double integrator converges") {
    const System sys = linear_observable(0.0, 0.0);
    FilterConfig cfg;
    cfg.G = Matrix::Identity(2, 2);
    cfg.xhat0 = vec2(0.0, 0.0);
    cfg.P0 = Matrix::Identity(2, 2);
    cfg.form = FilterForm::covariance;
    cfg.integrator = integ(1e-3, 50.0);
    const FilterRun run = run_ekf(sys, vec2(1.0, 0.0), InputSignal::zero(0), cfg);
    REQUIRE(run.status == RunStatus::completed);
    CHECK(run.error_norm.back() <= 1e-6 * run.error_norm.front());

    // the independently coded discrete-time Kalman filter confirms the
    // contraction threshold
    Matrix A(2, 2), C(1, 2);
    A << 0, 1, 0, 0;
    C << 1, 0;
    const auto oracle = test::discrete_kalman_oracle(A, C, Matrix::Identity(2, 2), vec2(1.0, 0.0),
                                                     vec2(0.0, 0.0), Matrix::Identity(2, 2), 1e-4,
                                                     50.0);
    CHECK(oracle.final_error <= 1e-6 * oracle.initial_error);
}

TEST_CASE("run_ekf reproduces the Krener-Duarte trap") {
    const System sys = krener_duarte();
    SUBCASE("estimate started at -0.75 never rises above -1/2") {
        const FilterRun run =
            run_ekf(sys, vec1(1.0), InputSignal::zero(0), scalar_config(-0.75, 1.0, 1e-3, 50.0));
        REQUIRE(run.status == RunStatus::completed);
        for (const auto& xh : run.xhat) CHECK(xh(0) <= -0.5);
        for (double e : run.error_norm) CHECK(e >= 1.0);
    }
    SUBCASE("exact start stays exact") {
        const FilterRun run =
            run_ekf(sys, vec1(1.0), InputSignal::zero(0), scalar_config(1.0, 1.0, 1e-3, 50.0));
        REQUIRE(run.status == RunStatus::completed);
        for (double e : run.error_norm) CHECK(e <= 1e-9);
    }
}

TEST_CASE("krener-duarte innovation fixed point") {
    // with xhat = -1/2 and y = 1/2 the innovation vanishes, so the
    // estimate obeys the raw drift: f(-1/2) = -3/8
    const System sys = krener_duarte();
    const Vector u0(0);
    CHECK(sys.output(vec1(-0.5), u0)(0) == 0.5);
    CHECK(sys.drift(vec1(-0.5), u0)(0) == -0.375);
}

TEST_CASE("kalman_reference") {
    SUBCASE("scalar Riccati equilibrium P = 1 is stationary") {
        const Matrix A = Matrix::Zero(1, 1);
        const Matrix C = Matrix::Identity(1, 1);
        const FilterRun run = kalman_reference(A, C, vec1(0.0), scalar_config(0.0, 1.0, 1e-3, 10.0));
        REQUIRE(run.status == RunStatus::completed);
        for (const auto& P : run.P) CHECK(std::abs(P(0, 0) - 1.0) <= 1e-12);
    }
    SUBCASE("scalar Riccati from P0 = 3 follows coth(t + atanh(1/3)) down to 1") {
        const Matrix A = Matrix::Zero(1, 1);
        const Matrix C = Matrix::Identity(1, 1);
        const FilterRun run = kalman_reference(A, C, vec1(0.0), scalar_config(0.0, 3.0, 1e-3, 10.0));
        REQUIRE(run.status == RunStatus::completed);
        const double c = 0.5 * std::log(2.0);  // arcoth(3)
        for (std::size_t k = 0; k < run.size(); ++k) {
            const double want = 1.0 / std::tanh(run.times[k] + c);
            CHECK(std::abs(run.P[k](0, 0) - want) <= 1e-9);
            if (k > 0) CHECK(run.P[k](0, 0) <= run.P[k - 1](0, 0));
        }
        CHECK(std::abs(run.P.back()(0, 0) - 1.0) <= 1e-6);
    }
    SUBCASE("agrees samplewise with run_ekf on linear systems") {
        for (const double a : {0.0, 1.0}) {  // double integrator and the a2 > 0 system
            const System sys = linear_observable(a, a);
            Matrix A(2, 2), C(1, 2);
            A << 0, 1, a, a;
            C << 1, 0;
            FilterConfig cfg;
            cfg.G = Matrix::Identity(2, 2);
            cfg.xhat0 = vec2(-1.0, -1.0);
            cfg.P0 = Matrix::Identity(2, 2);
            cfg.form = FilterForm::covariance;
            cfg.integrator = integ(1e-3, 10.0);
            const FilterRun ekf = run_ekf(sys, vec2(0.0, 0.0), InputSignal::zero(0), cfg);
            const FilterRun ref = kalman_reference(A, C, vec2(0.0, 0.0), cfg);
            REQUIRE(ekf.size() == ref.size());
            for (std::size_t k = 0; k < ekf.size(); ++k) {
                CHECK((ekf.xhat[k] - ref.xhat[k]).cwiseAbs().maxCoeff() <= 1e-10);
                CHECK((ekf.x[k] - ref.x[k]).cwiseAbs().maxCoeff() <= 1e-10);
                CHECK((ekf.P[k] - ref.P[k]).cwiseAbs().maxCoeff() <= 1e-10);
            }
        }
    }
}

TEST_CASE("stored covariances stay symmetric and consistent") {
    const System sys = sine_chain();
    FilterConfig cfg;
    cfg.G = Matrix::Identity(2, 2);
    cfg.xhat0 = vec2(0.0, 0.0);
    cfg.P0 = Matrix::Identity(2, 2);
    cfg.form = FilterForm::both;
    cfg.integrator = integ(1e-3, 10.0);
    const FilterRun run = run_ekf(sys, vec2(0.3, -0.2), InputSignal::zero(0), cfg);
    REQUIRE(run.status == RunStatus::completed);
    REQUIRE(run.has_P());
    REQUIRE(run.has_Q());
    const Matrix I = Matrix::Identity(2, 2);
    for (std::size_t k = 0; k < run.size(); ++k) {
        CHECK((run.P[k] - run.P[k].transpose()).norm() <= 1e-9 * std::max(1.0, run.P[k].norm()));
        CHECK((run.Q[k] - run.Q[k].transpose()).norm() <= 1e-9 * std::max(1.0, run.Q[k].norm()));
        CHECK((run.Q[k] * run.P[k] - I).norm() <= 1e-6);
    }
}

TEST_CASE("filter run bookkeeping invariants") {
    const System sys = linear_observable(0.0, 0.0);
    FilterConfig cfg;
    cfg.G = Matrix::Identity(2, 2);
    cfg.xhat0 = vec2(0.0, 0.0);
    cfg.P0 = Matrix::Identity(2, 2);
    cfg.form = FilterForm::both;
    cfg.integrator = integ(1e-3, 2.0, 7);
    const FilterRun run = run_ekf(sys, vec2(1.0, 0.0), InputSignal::zero(0), cfg);
    REQUIRE(run.status == RunStatus::completed);
    CHECK(run.times.front() == 0.0);
    CHECK(run.times.back() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(run.x.size() == run.size());
    CHECK(run.y.size() == run.size());
    CHECK(run.xhat.size() == run.size());
    CHECK(run.innovation.size() == run.size());
    CHECK(run.P.size() == run.size());
    CHECK(run.Q.size() == run.size());
    CHECK(run.error_norm.size() == run.size());
    CHECK(run.V.size() == run.size());
    for (std::size_t k = 1; k < run.size(); ++k) CHECK(run.times[k] > run.times[k - 1]);
    for (std::size_t k = 0; k < run.size(); ++k)
        CHECK(run.error_norm[k] == (run.x[k] - run.xhat[k]).norm());
}

TEST_CASE("information-only form tracks the covariance form") {
    const System sys = sine_chain();
    FilterConfig cov;
    cov.G = Matrix::Identity(2, 2);
    cov.xhat0 = vec2(0.0, 0.0);
    cov.P0 = Matrix::Identity(2, 2);
    cov.form = FilterForm::covariance;
    cov.integrator = integ(1e-3, 5.0);
    FilterConfig info = cov;
    info.form = FilterForm::information;
    const FilterRun a = run_ekf(sys, vec2(0.3, -0.2), InputSignal::zero(0), cov);
    const FilterRun b = run_ekf(sys, vec2(0.3, -0.2), InputSignal::zero(0), info);
    REQUIRE(a.status == RunStatus::completed);
    REQUIRE(b.status == RunStatus::completed);
    CHECK(a.has_P());
    CHECK(!a.has_Q());
    CHECK(!b.has_P());
    CHECK(b.has_Q());
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        CHECK((a.xhat[k] - b.xhat[k]).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("adaptive integrator agrees with the fixed-step one") {
    const System sys = sine_chain();
    FilterConfig fixed;
    fixed.G = Matrix::Identity(2, 2);
    fixed.xhat0 = vec2(0.0, 0.0);
    fixed.P0 = Matrix::Identity(2, 2);
    fixed.form = FilterForm::covariance;
    fixed.integrator = integ(1e-3, 5.0);
    FilterConfig adaptive = fixed;
    adaptive.integrator.method = StepMethod::rk45_adaptive;
    adaptive.integrator.dt = 1e-3;
    adaptive.integrator.abs_tol = 1e-10;
    adaptive.integrator.rel_tol = 1e-10;
    const FilterRun a = run_ekf(sys, vec2(0.3, -0.2), InputSignal::zero(0), fixed);
    const FilterRun b = run_ekf(sys, vec2(0.3, -0.2), InputSignal::zero(0), adaptive);
    REQUIRE(a.status == RunStatus::completed);
    REQUIRE(b.status == RunStatus::completed);
    CHECK(b.times.back() == doctest::Approx(5.0).epsilon(1e-12));
    CHECK((a.xhat.back() - b.xhat.back()).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("step halving leaves the final error in place") {
    const System sys = linear_observable(0.0, 0.0);
    FilterConfig cfg;
    cfg.G = Matrix::Identity(2, 2);
    cfg.xhat0 = vec2(0.0, 0.0);
    cfg.P0 = Matrix::Identity(2, 2);
    cfg.form = FilterForm::covariance;
    cfg.integrator = integ(1e-3, 5.0);
    const FilterRun a = run_ekf(sys, vec2(1.0, 0.0), InputSignal::zero(0), cfg);
    cfg.integrator.dt = 5e-4;
    const FilterRun b = run_ekf(sys, vec2(1.0, 0.0), InputSignal::zero(0), cfg);
    const double e1 = a.error_norm.back(), e2 = b.error_norm.back();
    CHECK(std::abs(e1 - e2) <= 1e-6 * std::max({1.0, e1, a.error_norm.front()}));
}

TEST_CASE("filter config validation") {
    const System sys = linear_observable(0.0, 0.0);
    FilterConfig good;
    good.G = Matrix::Identity(2, 2);
    good.xhat0 = vec2(0.0, 0.0);
    good.P0 = Matrix::Identity(2, 2);
    good.integrator = integ(1e-3, 1.0);

    SUBCASE("P0 must be positive definite") {
        FilterConfig c = good;
        c.P0 = -Matrix::Identity(2, 2);
        CHECK_THROWS_AS(run_ekf(sys, vec2(0, 0), InputSignal::zero(0), c), std::invalid_argument);
    }
    SUBCASE("P0 must be symmetric") {
        FilterConfig c = good;
        c.P0 << 1, 0.5, 0, 1;
        CHECK_THROWS_AS(run_ekf(sys, vec2(0, 0), InputSignal::zero(0), c), std::invalid_argument);
    }
    SUBCASE("information form needs an invertible G") {
        FilterConfig c = good;
        c.form = FilterForm::information;
        c.G = Matrix::Zero(2, 2);
        CHECK_THROWS_AS(run_ekf(sys, vec2(0, 0), InputSignal::zero(0), c), std::invalid_argument);
        c.G = Matrix::Identity(2, 2);
        c.G(1, 1) = 1e-15;
        CHECK_THROWS_AS(run_ekf(sys, vec2(0, 0), InputSignal::zero(0), c), std::invalid_argument);
    }
    SUBCASE("information form needs a square G") {
        FilterConfig c = good;
        c.form = FilterForm::both;
        c.G = Matrix::Identity(2, 2).leftCols(1);
        CHECK_THROWS_AS(run_ekf(sys, vec2(0, 0), InputSignal::zero(0), c), std::invalid_argument);
    }
    SUBCASE("dimension mismatches") {
        FilterConfig c = good;
        c.xhat0 = vec1(0.0);
        CHECK_THROWS_AS(run_ekf(sys, vec2(0, 0), InputSignal::zero(0), c), std::invalid_argument);
        CHECK_THROWS_AS(run_ekf(sys, vec1(0.0), InputSignal::zero(0), good), std::invalid_argument);
        CHECK_THROWS_AS(run_ekf(sys, vec2(0, 0), InputSignal::zero(3), good), std::invalid_argument);
    }
    SUBCASE("integrator settings are checked") {
        FilterConfig c = good;
        c.integrator.dt = 0.0;
        CHECK_THROWS_AS(run_ekf(sys, vec2(0, 0), InputSignal::zero(0), c), std::invalid_argument);
        c = good;
        c.integrator.t_end = -1.0;
        CHECK_THROWS_AS(run_ekf(sys, vec2(0, 0), InputSignal::zero(0), c), std::invalid_argument);
    }
}
