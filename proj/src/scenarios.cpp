#include "ekflab/scenarios.hpp"

#include <cmath>
#include <stdexcept>

namespace ekflab {

std::string to_string(Expectation e) {
    switch (e) {
        case Expectation::converge: return "converge";
        case Expectation::diverge: return "diverge";
        case Expectation::none: return "none";
    }
    return "none";
}

System krener_duarte() {
    System sys;
    sys.state_dim = 1;
    sys.input_dim = 0;
    sys.output_dim = 1;
    sys.drift = [](const Vector& x, const Vector&) -> Vector {
        Vector f(1);
        f(0) = x(0) * (1.0 - x(0) * x(0));
        return f;
    };
    sys.output = [](const Vector& x, const Vector&) -> Vector {
        Vector h(1);
        h(0) = x(0) * x(0) - x(0) / 2.0;
        return h;
    };
    sys.drift_jacobian = [](const Vector& x, const Vector&) -> Matrix {
        Matrix J(1, 1);
        J(0, 0) = 1.0 - 3.0 * x(0) * x(0);
        return J;
    };
    sys.output_jacobian = [](const Vector& x, const Vector&) -> Matrix {
        Matrix J(1, 1);
        J(0, 0) = 2.0 * x(0) - 0.5;
        return J;
    };
    return sys;
}

System linear_observable(double a1, double a2) {
    Matrix F(2, 2);
    F << 0.0, 0.0, a1, a2;  // Jacobian of fbar: row 2 is (a1, a2)
    StateFn fbar = [a1, a2](const Vector& x, const Vector&) -> Vector {
        Vector f(2);
        f(0) = 0.0;
        f(1) = a1 * x(0) + a2 * x(1);
        return f;
    };
    InputOnlyFn hbar = [](const Vector&) -> Vector { return Vector::Zero(1); };
    JacobianFn fbar_jac = [F](const Vector&, const Vector&) -> Matrix { return F; };
    // declared bounds: any upper bound is valid; fbar is linear so its
    // second derivative vanishes
    const double lip = 1.0 + std::hypot(a1, a2);
    return make_canonical_system({2}, fbar, hbar, lip, 1.0, 0, fbar_jac);
}

System sine_chain() {
    StateFn fbar = [](const Vector& x, const Vector&) -> Vector {
        Vector f(2);
        f(0) = 0.0;
        f(1) = std::sin(x(0));
        return f;
    };
    InputOnlyFn hbar = [](const Vector&) -> Vector { return Vector::Zero(1); };
    JacobianFn fbar_jac = [](const Vector& x, const Vector&) -> Matrix {
        Matrix J = Matrix::Zero(2, 2);
        J(1, 0) = std::cos(x(0));
        return J;
    };
    return make_canonical_system({2}, fbar, hbar, 1.0, 1.0, 0, fbar_jac);
}

System make_system(const std::string& name) {
    if (name == "krener-duarte") return krener_duarte();
    if (name == "linear-observable-1-1") return linear_observable(1.0, 1.0);
    if (name == "linear-observable-0-0") return linear_observable(0.0, 0.0);
    if (name == "sine-chain") return sine_chain();
    throw std::invalid_argument("unknown system: " + name);
}

std::vector<std::string> system_names() {
    return {"krener-duarte", "linear-observable-1-1", "linear-observable-0-0", "sine-chain"};
}

namespace {

IntegratorSettings default_integrator() {
    IntegratorSettings s;
    s.method = StepMethod::rk4_fixed;
    s.dt = 1e-3;
    s.t_end = 50.0;
    s.sample_stride = 10;
    return s;
}

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

ScenarioConfig kd_base(const std::string& name, double xhat0, Expectation expected) {
    ScenarioConfig c;
    c.name = name;
    c.system = "krener-duarte";
    c.truth_x0 = vec1(1.0);
    c.xhat0 = vec1(xhat0);
    c.P0 = Matrix::Identity(1, 1);
    c.G = Matrix::Identity(1, 1);
    c.u = InputSignal::zero(0);
    c.form = FilterForm::both;
    c.integrator = default_integrator();
    c.expected = expected;
    // |h''| = 2 and |f''(x)| = 6|x| <= 12 over the [-2,2] hull of these runs
    c.diag_L = 12.0;
    return c;
}

std::vector<ScenarioConfig> build_catalog() {
    std::vector<ScenarioConfig> cat;

    cat.push_back(kd_base("kd-diverge", -0.75, Expectation::diverge));
    cat.push_back(kd_base("kd-converge", 0.9, Expectation::converge));

    {
        ScenarioConfig c;
        c.name = "linear-a2-positive";
        c.system = "linear-observable-1-1";
        c.truth_x0 = vec2(0.0, 0.0);
        c.xhat0 = vec2(-1.0, -1.0);  // initial error (1, 1)
        c.P0 = Matrix::Identity(2, 2);
        c.G = Matrix::Identity(2, 2);
        c.u = InputSignal::zero(0);
        c.form = FilterForm::both;
        c.integrator = default_integrator();
        c.expected = Expectation::converge;
        c.diag_L = 1.0;
        cat.push_back(c);
    }
    {
        ScenarioConfig c;
        c.name = "double-integrator";
        c.system = "linear-observable-0-0";
        c.truth_x0 = vec2(1.0, 0.0);
        c.xhat0 = vec2(0.0, 0.0);
        c.P0 = Matrix::Identity(2, 2);
        c.G = Matrix::Identity(2, 2);
        c.u = InputSignal::zero(0);
        c.form = FilterForm::both;
        c.integrator = default_integrator();
        c.expected = Expectation::converge;
        c.diag_L = 1.0;
        cat.push_back(c);
    }
    {
        ScenarioConfig c;
        c.name = "sine-chain-small-error";
        c.system = "sine-chain";
        c.truth_x0 = vec2(0.3, -0.2);
        c.xhat0 = vec2(0.0, 0.0);
        c.P0 = Matrix::Identity(2, 2);
        c.G = Matrix::Identity(2, 2);
        c.u = InputSignal::zero(0);
        c.form = FilterForm::both;
        c.integrator = default_integrator();
        c.expected = Expectation::converge;
        c.diag_L = 1.0;
        cat.push_back(c);
    }
    {
        ScenarioConfig c;
        c.name = "sine-chain-exact-start";
        c.system = "sine-chain";
        c.truth_x0 = vec2(0.3, -0.2);
        c.xhat0 = vec2(0.3, -0.2);
        c.P0 = Matrix::Identity(2, 2);
        c.G = Matrix::Identity(2, 2);
        c.u = InputSignal::zero(0);
        c.form = FilterForm::both;
        c.integrator = default_integrator();
        c.expected = Expectation::converge;
        c.diag_L = 1.0;
        cat.push_back(c);
    }
    return cat;
}

}  // namespace

const std::vector<ScenarioConfig>& scenario_catalog() {
    static const std::vector<ScenarioConfig> cat = build_catalog();
    return cat;
}

const ScenarioConfig* find_scenario(const std::string& name) {
    for (const auto& c : scenario_catalog())
        if (c.name == name) return &c;
    return nullptr;
}

std::vector<std::string> scenario_names() {
    std::vector<std::string> names;
    for (const auto& c : scenario_catalog()) names.push_back(c.name);
    return names;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
    const System sys = make_system(config.system);

    FilterConfig fc;
    fc.G = config.G;
    fc.xhat0 = config.xhat0;
    fc.P0 = config.P0;
    fc.form = config.form;
    fc.integrator = config.integrator;

    ScenarioResult res;
    res.run = run_ekf(sys, config.truth_x0, config.u, fc);

    const Matrix Gamma = config.G * config.G.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(Gamma, Eigen::EigenvaluesOnly);
    const double m7 = es.eigenvalues().minCoeff();

    res.report = diagnose(res.run, config.diag_L, m7);

    switch (config.expected) {
        case Expectation::converge:
            res.expected_match = res.report.verdict == Verdict::converged;
            break;
        case Expectation::diverge:
            res.expected_match = res.report.verdict == Verdict::diverged;
            break;
        case Expectation::none:
            res.expected_match = true;
            break;
    }
    return res;
}

}  // namespace ekflab
