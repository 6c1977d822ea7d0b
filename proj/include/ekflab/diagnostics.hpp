#pragma once

#include "ekflab/filter.hpp"
#include "ekflab/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ekflab {

enum class Verdict { converged, diverged, undetermined };

std::string to_string(Verdict v);

/// Empirical convergence certificate for one completed run.
struct DiagnosticsReport {
    double m1_hat = 0.0;  // sup over samples of lambda_max(P)
    double m5_hat = 0.0;  // sup over samples of lambda_max(Q)
    double m7 = 0.0;      // lambda_min(Gamma)
    double L = 0.0;       // second-derivative bound used in the radius
    double radius = 0.0;  // m7 / (2 m1^{7/2} m5^2 L); +inf when L == 0
    std::optional<double> entry_time;
    std::optional<double> decay_rate;
    Verdict verdict = Verdict::undetermined;
    double initial_error = 0.0;
    double final_error = 0.0;
    double max_error = 0.0;
    RunStatus run_status = RunStatus::completed;

    std::string text() const;
};

/// Sample series sufficient to diagnose a run; the on-disk trajectory CSV
/// carries exactly these columns, so stored runs can be re-diagnosed.
struct SampleSeries {
    std::vector<double> times, error_norm, V, eigmin_P, eigmax_P;
    RunStatus status = RunStatus::completed;
};

SampleSeries series_from_run(const FilterRun& run);

/// (m1_hat, m5_hat): suprema over stored samples of the largest
/// eigenvalues of P and Q (Q from inversion when not integrated).
std::pair<double, double> covariance_bounds(const FilterRun& run);

/// m7 / (2 * m1^{7/2} * m5^2 * L). All arguments must be positive.
double convergence_radius(double m1, double m5, double m7, double L);

/// entry_time: first sample with sqrt(V) < radius; decay_rate: slope of
/// the least-squares line through (t, log V) from entry to the end,
/// discarding samples with V < 1e-300. Either may be absent.
std::pair<std::optional<double>, std::optional<double>> lyapunov_decay(
    const std::vector<double>& times, const std::vector<double>& V, double radius);

std::pair<std::optional<double>, std::optional<double>> lyapunov_decay(const FilterRun& run,
                                                                       double radius);

struct KernelObstruction {
    bool obstructed = false;
    Vector witness;      // unit vector in ker(C), valid when obstructed
    double value = 0.0;  // witness' * sym(A) * witness
};

/// Necessary-condition test for uniform detectability: if the symmetric
/// part of A restricted to ker(C) has a nonnegative eigenvalue, no output
/// injection can make sym(A + Lambda C) negative definite. Inconclusive
/// otherwise (obstructed == false).
KernelObstruction kernel_obstruction(const Matrix& A, const Matrix& C);

/// True iff lambda_max(sym(A + Lambda*C)) <= -alpha; certifies uniform
/// detectability for constant-Jacobian systems with constant Lambda.
bool detectability_certificate(const Matrix& A, const Matrix& C, const Matrix& Lambda,
                               double alpha);

/// Finite-horizon verdict. Converged: final error <= 1e-6 * max(1, initial
/// error). Diverged: nonfinite state, error above 1e6, or no contraction
/// over the horizon (final error >= initial error / 2).
Verdict classify(const SampleSeries& s);

DiagnosticsReport diagnose_series(const SampleSeries& s, double L, double m7);

DiagnosticsReport diagnose(const FilterRun& run, double L, double m7);

}  // namespace ekflab
