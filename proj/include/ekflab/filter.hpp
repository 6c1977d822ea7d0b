#pragma once

#include "ekflab/integrate.hpp"
#include "ekflab/obsform.hpp"
#include "ekflab/types.hpp"

#include <string>
#include <vector>

namespace ekflab {

enum class FilterForm { covariance, information, both };

struct FilterConfig {
    Matrix G;       // n x l designer noise gain, Gamma = G*G'
    Vector xhat0;   // initial estimate
    Matrix P0;      // initial covariance, symmetric positive definite
    FilterForm form = FilterForm::covariance;
    IntegratorSettings integrator;
};

enum class RunStatus { completed, aborted_nonfinite, aborted_covariance, aborted_step_underflow };

/// Time-sampled joint trajectory of truth, estimate and covariance /
/// information state. All sequences share length; P/Q are populated
/// according to the configured form. V = xtilde' Q xtilde, computed from
/// the integrated Q when present and from P^{-1} otherwise.
struct FilterRun {
    std::vector<double> times;
    std::vector<Vector> x, y, xhat, innovation;
    std::vector<Matrix> P, Q;
    std::vector<double> error_norm, V;

    RunStatus status = RunStatus::completed;
    double t_stop = 0.0;
    std::string message;
    double max_error_norm = 0.0;

    bool has_P() const { return !P.empty(); }
    bool has_Q() const { return !Q.empty(); }
    std::size_t size() const { return times.size(); }
};

struct TruthRun {
    std::vector<double> times;
    std::vector<Vector> x, y;
    IntegrationOutcome outcome;
};

/// Open-loop solution of xdot = f(x,u), y = h(x,u); deterministic.
TruthRun simulate_truth(const System& system, const Vector& x0, const InputSignal& u,
                        const IntegratorSettings& integrator);

/// Pdot = A P + P A' + Gamma - P C' C P, symmetrized.
Matrix riccati_rhs(const Matrix& A, const Matrix& C, const Matrix& P, const Matrix& Gamma);

/// Qdot = -A' Q - Q A - Q Gamma Q + C' C, symmetrized.
Matrix information_rhs(const Matrix& A, const Matrix& C, const Matrix& Q, const Matrix& Gamma);

/// Integrates truth, estimate and covariance (and/or information matrix)
/// jointly as one augmented ODE. The output fed to the filter is the
/// concurrently integrated truth output; A, C are Jacobians at the
/// estimate. Throws std::invalid_argument on inconsistent dimensions or an
/// invalid config; integration failures are recorded in the run status.
FilterRun run_ekf(const System& system, const Vector& truth_x0, const InputSignal& u,
                  const FilterConfig& config);

/// Kalman filter for the time-invariant linear system xdot = A x, y = C x,
/// with its own right-hand-side assembly. Reference path for linear
/// scenarios.
FilterRun kalman_reference(const Matrix& A, const Matrix& C, const Vector& truth_x0,
                           const FilterConfig& config);

}  // namespace ekflab
