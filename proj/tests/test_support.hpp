#pragma once

// Test-only oracles, kept independent of the implementation paths they
// check.

#include "ekflab/filter.hpp"
#include "ekflab/obsform.hpp"

#include <Eigen/Dense>

#include <vector>

namespace ekflab::test {

inline Matrix kron(const Matrix& A, const Matrix& B) {
    Matrix K(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j)
            K.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    return K;
}

// Solves (-Abar - (theta/2) I)' S + S (-Abar - (theta/2) I) = -Cbar'Cbar
// as a dense n^2 x n^2 linear system in vec(S).
inline Matrix lyapunov_solve_kronecker(const std::vector<int>& blocks, double theta) {
    auto [Abar, Cbar] = build_block_matrices(blocks);
    const Eigen::Index n = Abar.rows();
    const Matrix M = -Abar - (theta / 2.0) * Matrix::Identity(n, n);
    const Matrix I = Matrix::Identity(n, n);
    // vec(M'S) = (I (x) M') vec(S); vec(S M) = (M' (x) I) vec(S)
    const Matrix K = kron(I, M.transpose()) + kron(M.transpose(), I);
    const Matrix rhs_mat = -Cbar.transpose() * Cbar;
    const Vector rhs = Eigen::Map<const Vector>(rhs_mat.data(), n * n);
    const Vector s = Eigen::FullPivLU<Matrix>(K).solve(rhs);
    return Eigen::Map<const Matrix>(s.data(), n, n);
}

struct DiscreteKfResult {
    double initial_error = 0.0;
    double final_error = 0.0;
};

// Discrete-time Kalman filter on the Euler-discretized linear system
// x+ = (I + A dt) x, measured through C with noise intensity I (so the
// per-sample covariance is I/dt). Used only to confirm convergence
// thresholds for linear scenarios.
inline DiscreteKfResult discrete_kalman_oracle(const Matrix& A, const Matrix& C,
                                               const Matrix& Gamma, const Vector& x0,
                                               const Vector& xhat0, const Matrix& P0, double dt,
                                               double t_end) {
    const Eigen::Index n = A.rows();
    const Eigen::Index p = C.rows();
    const Matrix F = Matrix::Identity(n, n) + dt * A;
    const Matrix Qd = dt * Gamma;
    const Matrix Rd = Matrix::Identity(p, p) / dt;

    Vector x = x0, xhat = xhat0;
    Matrix P = P0;
    DiscreteKfResult res;
    res.initial_error = (x - xhat).norm();
    const long steps = static_cast<long>(t_end / dt);
    for (long k = 0; k < steps; ++k) {
        x = F * x;
        xhat = F * xhat;
        P = F * P * F.transpose() + Qd;
        const Vector y = C * x;
        const Matrix S = C * P * C.transpose() + Rd;
        const Matrix K = P * C.transpose() * S.ldlt().solve(Matrix::Identity(p, p));
        xhat += K * (y - C * xhat);
        P = (Matrix::Identity(n, n) - K * C) * P;
        P = (P + P.transpose()) / 2.0;
    }
    res.final_error = (x - xhat).norm();
    return res;
}

// Minimal coherent run with constant covariance, zero states.
inline FilterRun constant_covariance_run(const Matrix& P, int samples, double dt) {
    const Eigen::Index n = P.rows();
    FilterRun run;
    for (int k = 0; k < samples; ++k) {
        run.times.push_back(k * dt);
        run.x.push_back(Vector::Zero(n));
        run.y.push_back(Vector::Zero(1));
        run.xhat.push_back(Vector::Zero(n));
        run.innovation.push_back(Vector::Zero(1));
        run.P.push_back(P);
        run.error_norm.push_back(0.0);
        run.V.push_back(0.0);
    }
    return run;
}

}  // namespace ekflab::test
