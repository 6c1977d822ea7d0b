#include "ekflab/diagnostics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ekflab {

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::converged: return "converged";
        case Verdict::diverged: return "diverged";
        case Verdict::undetermined: return "undetermined";
    }
    return "undetermined";
}

namespace {

double lambda_max(const Matrix& M) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double lambda_min(const Matrix& M) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(M, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

}  // namespace

SampleSeries series_from_run(const FilterRun& run) {
    SampleSeries s;
    s.times = run.times;
    s.error_norm = run.error_norm;
    s.V = run.V;
    s.status = run.status;
    s.eigmin_P.reserve(run.size());
    s.eigmax_P.reserve(run.size());
    for (std::size_t k = 0; k < run.size(); ++k) {
        if (run.has_P()) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(run.P[k], Eigen::EigenvaluesOnly);
            s.eigmin_P.push_back(es.eigenvalues().minCoeff());
            s.eigmax_P.push_back(es.eigenvalues().maxCoeff());
        } else {
            // P = Q^{-1}: eigenvalues are reciprocals
            Eigen::SelfAdjointEigenSolver<Matrix> es(run.Q[k], Eigen::EigenvaluesOnly);
            s.eigmin_P.push_back(1.0 / es.eigenvalues().maxCoeff());
            s.eigmax_P.push_back(1.0 / es.eigenvalues().minCoeff());
        }
    }
    return s;
}

std::pair<double, double> covariance_bounds(const FilterRun& run) {
    if (run.size() == 0) throw std::invalid_argument("covariance_bounds: empty run");
    double m1 = 0.0, m5 = 0.0;
    for (std::size_t k = 0; k < run.size(); ++k) {
        if (run.has_P()) {
            m1 = std::max(m1, lambda_max(run.P[k]));
        } else {
            m1 = std::max(m1, 1.0 / lambda_min(run.Q[k]));
        }
        if (run.has_Q()) {
            m5 = std::max(m5, lambda_max(run.Q[k]));
        } else {
            m5 = std::max(m5, 1.0 / lambda_min(run.P[k]));
        }
    }
    return {m1, m5};
}

double convergence_radius(double m1, double m5, double m7, double L) {
    if (!(m1 > 0.0) || !(m5 > 0.0) || !(m7 > 0.0) || !(L > 0.0))
        throw std::invalid_argument("convergence_radius: arguments must be positive");
    return m7 / (2.0 * std::pow(m1, 3.5) * m5 * m5 * L);
}

std::pair<std::optional<double>, std::optional<double>> lyapunov_decay(
    const std::vector<double>& times, const std::vector<double>& V, double radius) {
    if (times.size() != V.size()) throw std::invalid_argument("lyapunov_decay: length mismatch");
    std::optional<double> entry_time, decay_rate;
    std::size_t entry_k = times.size();
    for (std::size_t k = 0; k < V.size(); ++k) {
        if (std::sqrt(std::max(V[k], 0.0)) < radius) {
            entry_time = times[k];
            entry_k = k;
            break;
        }
    }
    if (!entry_time) return {entry_time, decay_rate};

    // least squares on (t, log V), skipping the floating-point floor
    double st = 0, sl = 0, stt = 0, stl = 0;
    std::size_t count = 0;
    for (std::size_t k = entry_k; k < V.size(); ++k) {
        if (V[k] < 1e-300) continue;
        const double t = times[k];
        const double lv = std::log(V[k]);
        st += t;
        sl += lv;
        stt += t * t;
        stl += t * lv;
        ++count;
    }
    if (count >= 2) {
        const double denom = count * stt - st * st;
        if (denom > 0) decay_rate = (count * stl - st * sl) / denom;
    }
    return {entry_time, decay_rate};
}

std::pair<std::optional<double>, std::optional<double>> lyapunov_decay(const FilterRun& run,
                                                                       double radius) {
    return lyapunov_decay(run.times, run.V, radius);
}

KernelObstruction kernel_obstruction(const Matrix& A, const Matrix& C) {
    const auto n = A.rows();
    if (A.cols() != n || C.cols() != n)
        throw std::invalid_argument("kernel_obstruction: dimension mismatch");
    if (C.norm() == 0.0) throw std::invalid_argument("kernel_obstruction: C must be nonzero");

    KernelObstruction res;
    Eigen::JacobiSVD<Matrix> svd(C, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double tol = std::numeric_limits<double>::epsilon() * sv(0) * std::max(C.rows(), C.cols());
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol) ++rank;
    const Eigen::Index kdim = n - rank;
    if (kdim == 0) return res;  // full-rank output: nothing to test

    const Matrix K = svd.matrixV().rightCols(kdim);  // orthonormal basis of ker(C)
    const Matrix symA = (A + A.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(K.transpose() * symA * K);
    const Eigen::Index top = kdim - 1;  // eigenvalues ascending
    const double lam = es.eigenvalues()(top);
    if (lam >= 0.0) {
        res.obstructed = true;
        res.value = lam;
        res.witness = K * es.eigenvectors().col(top);
        res.witness.normalize();
    }
    return res;
}

bool detectability_certificate(const Matrix& A, const Matrix& C, const Matrix& Lambda,
                               double alpha) {
    const auto n = A.rows();
    if (A.cols() != n || C.cols() != n || Lambda.rows() != n || Lambda.cols() != C.rows())
        throw std::invalid_argument("detectability_certificate: dimension mismatch");
    if (!(alpha > 0.0)) throw std::invalid_argument("detectability_certificate: alpha must be positive");
    const Matrix M = A + Lambda * C;
    return lambda_max((M + M.transpose()) / 2.0) <= -alpha;
}

Verdict classify(const SampleSeries& s) {
    if (s.times.empty()) return Verdict::undetermined;
    if (s.status == RunStatus::aborted_nonfinite) return Verdict::diverged;
    double max_err = 0.0;
    for (double e : s.error_norm) max_err = std::max(max_err, e);
    if (max_err > 1e6) return Verdict::diverged;
    if (s.status != RunStatus::completed) return Verdict::undetermined;
    const double e0 = s.error_norm.front();
    const double eT = s.error_norm.back();
    if (eT <= 1e-6 * std::max(1.0, e0)) return Verdict::converged;
    if (eT >= 0.5 * e0) return Verdict::diverged;
    return Verdict::undetermined;
}

DiagnosticsReport diagnose_series(const SampleSeries& s, double L, double m7) {
    if (s.times.empty()) throw std::invalid_argument("diagnose: empty series");
    if (L < 0.0) throw std::invalid_argument("diagnose: L must be nonnegative");
    if (!(m7 > 0.0)) throw std::invalid_argument("diagnose: m7 must be positive");

    DiagnosticsReport rep;
    rep.L = L;
    rep.m7 = m7;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        rep.m1_hat = std::max(rep.m1_hat, s.eigmax_P[k]);
        rep.m5_hat = std::max(rep.m5_hat, 1.0 / s.eigmin_P[k]);
        rep.max_error = std::max(rep.max_error, s.error_norm[k]);
    }
    rep.radius = (L > 0.0) ? convergence_radius(rep.m1_hat, rep.m5_hat, m7, L)
                           : std::numeric_limits<double>::infinity();
    std::tie(rep.entry_time, rep.decay_rate) = lyapunov_decay(s.times, s.V, rep.radius);
    rep.verdict = classify(s);
    rep.initial_error = s.error_norm.front();
    rep.final_error = s.error_norm.back();
    rep.run_status = s.status;
    return rep;
}

DiagnosticsReport diagnose(const FilterRun& run, double L, double m7) {
    if (run.size() == 0) throw std::invalid_argument("diagnose: empty run");
    SampleSeries s;
    s.times = run.times;
    s.error_norm = run.error_norm;
    s.V = run.V;
    s.status = run.status;

    DiagnosticsReport rep;
    rep.L = L;
    if (!(m7 > 0.0)) throw std::invalid_argument("diagnose: m7 must be positive");
    rep.m7 = m7;
    std::tie(rep.m1_hat, rep.m5_hat) = covariance_bounds(run);
    for (double e : run.error_norm) rep.max_error = std::max(rep.max_error, e);
    rep.radius = (L > 0.0) ? convergence_radius(rep.m1_hat, rep.m5_hat, m7, L)
                           : std::numeric_limits<double>::infinity();
    std::tie(rep.entry_time, rep.decay_rate) = lyapunov_decay(run, rep.radius);
    rep.verdict = classify(s);
    rep.initial_error = run.error_norm.front();
    rep.final_error = run.error_norm.back();
    rep.run_status = run.status;
    return rep;
}

std::string DiagnosticsReport::text() const {
    std::ostringstream os;
    os << "verdict:       " << to_string(verdict) << "\n";
    os << "m1_hat:        " << m1_hat << "\n";
    os << "m5_hat:        " << m5_hat << "\n";
    os << "m7:            " << m7 << "\n";
    os << "L:             " << L << "\n";
    os << "radius:        " << radius << "\n";
    if (entry_time)
        os << "entry_time:    " << *entry_time << "\n";
    else
        os << "entry_time:    (never)\n";
    if (decay_rate)
        os << "decay_rate:    " << *decay_rate << "\n";
    else
        os << "decay_rate:    (not fitted)\n";
    os << "initial_error: " << initial_error << "\n";
    os << "final_error:   " << final_error << "\n";
    os << "max_error:     " << max_error << "\n";
    return os.str();
}

}  // namespace ekflab
