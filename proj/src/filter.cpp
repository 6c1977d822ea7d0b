#include "ekflab/filter.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace ekflab {

namespace {

void require(bool cond, const char* what) {
    if (!cond) throw std::invalid_argument(what);
}

void check_spd(const Matrix& M, const char* name) {
    require(M.rows() == M.cols(), "matrix must be square");
    const double asym = (M - M.transpose()).norm();
    require(asym <= 1e-9 * std::max(1.0, M.norm()), "matrix must be symmetric");
    Eigen::LLT<Matrix> llt((M + M.transpose()) / 2.0);
    if (llt.info() != Eigen::Success) {
        throw std::invalid_argument(std::string(name) + " must be positive definite");
    }
}

void check_config(const FilterConfig& cfg, int n) {
    require(cfg.xhat0.size() == n, "xhat0 dimension mismatch");
    require(cfg.P0.rows() == n && cfg.P0.cols() == n, "P0 dimension mismatch");
    check_spd(cfg.P0, "P0");
    require(cfg.G.rows() == n, "G must have n rows");
    cfg.integrator.validate();
    if (cfg.form != FilterForm::covariance) {
        // information form needs an invertible G; numerical rank is the
        // testable surrogate
        require(cfg.G.cols() == n, "information form requires square G");
        Eigen::JacobiSVD<Matrix> svd(cfg.G);
        const auto& sv = svd.singularValues();
        require(sv(0) > 0.0 && sv(sv.size() - 1) >= 1e-10 * sv(0),
                "information form requires invertible G");
    }
}

// Shared sampling/bookkeeping for the joint truth + filter integration.
struct FilterLoop {
    int n, p;
    FilterForm form;
    FilterRun run;

    const Vector* y_flat = nullptr;

    bool store_P() const { return form != FilterForm::information; }
    bool store_Q() const { return form != FilterForm::covariance; }

    Eigen::Map<const Vector> x_of(const Vector& y) const {
        return Eigen::Map<const Vector>(y.data(), n);
    }
    Eigen::Map<const Vector> xhat_of(const Vector& y) const {
        return Eigen::Map<const Vector>(y.data() + n, n);
    }
    Eigen::Map<const Matrix> P_of(const Vector& y) const {
        return Eigen::Map<const Matrix>(y.data() + 2 * n, n, n);
    }
    Eigen::Map<const Matrix> Q_of(const Vector& y) const {
        const int base = store_P() ? 2 * n + n * n : 2 * n;
        return Eigen::Map<const Matrix>(y.data() + base, n, n);
    }

    void symmetrize(Vector& y) const {
        auto sym_block = [&](double* ptr) {
            Eigen::Map<Matrix> M(ptr, n, n);
            M = ((M + M.transpose()) / 2.0).eval();
        };
        if (store_P()) sym_block(y.data() + 2 * n);
        if (store_Q()) sym_block(y.data() + (store_P() ? 2 * n + n * n : 2 * n));
    }

    // Returns false (aborting the run) when a covariance factorization fails.
    bool sample(double t, const Vector& y, const Vector& y_out, const Vector& innov) {
        const Vector x = x_of(y);
        const Vector xh = xhat_of(y);
        const Vector xt = x - xh;

        Matrix Pm, Qm;
        Eigen::LLT<Matrix> lltP, lltQ;
        if (store_P()) {
            Pm = P_of(y);
            lltP.compute(Pm);
            if (lltP.info() != Eigen::Success) {
                run.status = RunStatus::aborted_covariance;
                run.t_stop = t;
                run.message = "P lost positive definiteness at t = " + std::to_string(t);
                return false;
            }
        }
        if (store_Q()) {
            Qm = Q_of(y);
            lltQ.compute(Qm);
            if (lltQ.info() != Eigen::Success) {
                run.status = RunStatus::aborted_covariance;
                run.t_stop = t;
                run.message = "Q lost positive definiteness at t = " + std::to_string(t);
                return false;
            }
        }

        double V;
        if (store_Q()) {
            V = xt.dot(Qm * xt);
        } else {
            V = xt.dot(lltP.solve(xt));
        }

        run.times.push_back(t);
        run.x.push_back(x);
        run.y.push_back(y_out);
        run.xhat.push_back(xh);
        run.innovation.push_back(innov);
        if (store_P()) run.P.push_back(std::move(Pm));
        if (store_Q()) run.Q.push_back(std::move(Qm));
        const double err = xt.norm();
        run.error_norm.push_back(err);
        run.max_error_norm = std::max(run.max_error_norm, err);
        run.V.push_back(V);
        return true;
    }

    void finish(const IntegrationOutcome& outcome) {
        run.t_stop = outcome.t_stop;
        switch (outcome.status) {
            case IntegrationStatus::completed:
                run.status = RunStatus::completed;
                break;
            case IntegrationStatus::nonfinite_state:
                run.status = RunStatus::aborted_nonfinite;
                run.message = outcome.message;
                break;
            case IntegrationStatus::step_underflow:
                run.status = RunStatus::aborted_step_underflow;
                run.message = outcome.message;
                break;
            case IntegrationStatus::callback_abort:
                break;  // status/message already set by sample()
        }
    }
};

}  // namespace

TruthRun simulate_truth(const System& system, const Vector& x0, const InputSignal& u,
                        const IntegratorSettings& integrator) {
    require(x0.size() == system.state_dim, "x0 dimension mismatch");
    require(u.dim() == system.input_dim, "input signal dimension mismatch");

    TruthRun out;
    OdeRhs rhs = [&](double t, const Vector& y, Vector& dydt) { dydt = system.drift(y, u(t)); };
    SampleFn on_sample = [&](double t, const Vector& y) {
        out.times.push_back(t);
        out.x.push_back(y);
        out.y.push_back(system.output(y, u(t)));
        return true;
    };
    out.outcome = integrate(rhs, x0, integrator, nullptr, on_sample);
    return out;
}

Matrix riccati_rhs(const Matrix& A, const Matrix& C, const Matrix& P, const Matrix& Gamma) {
    const auto n = A.rows();
    require(A.cols() == n && P.rows() == n && P.cols() == n && Gamma.rows() == n &&
                Gamma.cols() == n && C.cols() == n,
            "riccati_rhs: dimension mismatch");
    const Matrix CP = C * P;
    Matrix R = A * P + P * A.transpose() + Gamma - CP.transpose() * CP;
    return (R + R.transpose()) / 2.0;
}

Matrix information_rhs(const Matrix& A, const Matrix& C, const Matrix& Q, const Matrix& Gamma) {
    const auto n = A.rows();
    require(A.cols() == n && Q.rows() == n && Q.cols() == n && Gamma.rows() == n &&
                Gamma.cols() == n && C.cols() == n,
            "information_rhs: dimension mismatch");
    Matrix R = -A.transpose() * Q - Q * A - Q * Gamma * Q + C.transpose() * C;
    return (R + R.transpose()) / 2.0;
}

FilterRun run_ekf(const System& system, const Vector& truth_x0, const InputSignal& u,
                  const FilterConfig& config) {
    const int n = system.state_dim;
    const int p = system.output_dim;
    require(truth_x0.size() == n, "truth_x0 dimension mismatch");
    require(u.dim() == system.input_dim, "input signal dimension mismatch");
    check_config(config, n);

    const Matrix Gamma = config.G * config.G.transpose();

    FilterLoop loop;
    loop.n = n;
    loop.p = p;
    loop.form = config.form;

    const bool wantP = loop.store_P();
    const bool wantQ = loop.store_Q();
    const int dim = 2 * n + (wantP ? n * n : 0) + (wantQ ? n * n : 0);

    Vector y0(dim);
    y0.segment(0, n) = truth_x0;
    y0.segment(n, n) = config.xhat0;
    const Matrix P0s = (config.P0 + config.P0.transpose()) / 2.0;
    int base = 2 * n;
    if (wantP) {
        Eigen::Map<Matrix>(y0.data() + base, n, n) = P0s;
        base += n * n;
    }
    if (wantQ) {
        // Q(0) = P0^{-1}, from the Cholesky factor of P0
        Eigen::LLT<Matrix> llt(P0s);
        Matrix Q0 = llt.solve(Matrix::Identity(n, n));
        Eigen::Map<Matrix>(y0.data() + base, n, n) = (Q0 + Q0.transpose()) / 2.0;
    }

    // scratch shared across RHS evaluations
    Vector fx(n), fh(n), innov(p), w(n);
    Matrix A(n, n), C(p, n);

    OdeRhs rhs = [&](double t, const Vector& y, Vector& dydt) {
        dydt.resize(dim);
        const Vector ut = u(t);
        const auto x = loop.x_of(y);
        const auto xh = loop.xhat_of(y);

        fx = system.drift(x, ut);
        innov = system.output(x, ut) - system.output(xh, ut);
        fh = system.drift(xh, ut);
        A = system.drift_jacobian(xh, ut);
        C = system.output_jacobian(xh, ut);
        w = C.transpose() * innov;

        dydt.segment(0, n) = fx;
        if (wantP) {
            const auto P = loop.P_of(y);
            dydt.segment(n, n) = fh + P * w;
            Eigen::Map<Matrix>(dydt.data() + 2 * n, n, n) = riccati_rhs(A, C, P, Gamma);
        } else {
            const auto Q = loop.Q_of(y);
            dydt.segment(n, n) = fh + Q.ldlt().solve(w);
        }
        if (wantQ) {
            const auto Q = loop.Q_of(y);
            const int qbase = wantP ? 2 * n + n * n : 2 * n;
            Eigen::Map<Matrix>(dydt.data() + qbase, n, n) = information_rhs(A, C, Q, Gamma);
        }
    };

    PostStepFn post = [&](double, Vector& y) { loop.symmetrize(y); };

    SampleFn on_sample = [&](double t, const Vector& y) {
        const Vector ut = u(t);
        const auto x = loop.x_of(y);
        const auto xh = loop.xhat_of(y);
        const Vector y_out = system.output(x, ut);
        const Vector innov_s = y_out - system.output(xh, ut);
        return loop.sample(t, y, y_out, innov_s);
    };

    loop.finish(integrate(rhs, y0, config.integrator, post, on_sample));
    return loop.run;
}

FilterRun kalman_reference(const Matrix& A, const Matrix& C, const Vector& truth_x0,
                           const FilterConfig& config) {
    const int n = static_cast<int>(A.rows());
    const int p = static_cast<int>(C.rows());
    require(A.cols() == n && C.cols() == n, "kalman_reference: dimension mismatch");
    require(truth_x0.size() == n, "truth_x0 dimension mismatch");
    check_config(config, n);

    const Matrix Gamma = config.G * config.G.transpose();
    const Matrix CtC = C.transpose() * C;

    FilterLoop loop;
    loop.n = n;
    loop.p = p;
    loop.form = config.form;

    const bool wantP = loop.store_P();
    const bool wantQ = loop.store_Q();
    const int dim = 2 * n + (wantP ? n * n : 0) + (wantQ ? n * n : 0);

    Vector y0(dim);
    y0.segment(0, n) = truth_x0;
    y0.segment(n, n) = config.xhat0;
    const Matrix P0s = (config.P0 + config.P0.transpose()) / 2.0;
    int base = 2 * n;
    if (wantP) {
        Eigen::Map<Matrix>(y0.data() + base, n, n) = P0s;
        base += n * n;
    }
    if (wantQ) {
        Eigen::LLT<Matrix> llt(P0s);
        Matrix Q0 = llt.solve(Matrix::Identity(n, n));
        Eigen::Map<Matrix>(y0.data() + base, n, n) = (Q0 + Q0.transpose()) / 2.0;
    }

    Vector innov(p), w(n);

    OdeRhs rhs = [&](double, const Vector& y, Vector& dydt) {
        dydt.resize(dim);
        const auto x = loop.x_of(y);
        const auto xh = loop.xhat_of(y);
        innov = C * x - C * xh;
        w = C.transpose() * innov;
        dydt.segment(0, n) = A * x;
        if (wantP) {
            const auto P = loop.P_of(y);
            dydt.segment(n, n) = A * xh + P * w;
            Matrix R = A * P + P * A.transpose() + Gamma - P * CtC * P;
            Eigen::Map<Matrix>(dydt.data() + 2 * n, n, n) = (R + R.transpose()) / 2.0;
        } else {
            const auto Q = loop.Q_of(y);
            dydt.segment(n, n) = A * xh + Q.ldlt().solve(w);
        }
        if (wantQ) {
            const auto Q = loop.Q_of(y);
            const int qbase = wantP ? 2 * n + n * n : 2 * n;
            Matrix R = -A.transpose() * Q - Q * A - Q * Gamma * Q + CtC;
            Eigen::Map<Matrix>(dydt.data() + qbase, n, n) = (R + R.transpose()) / 2.0;
        }
    };

    PostStepFn post = [&](double, Vector& y) { loop.symmetrize(y); };

    SampleFn on_sample = [&](double t, const Vector& y) {
        const Vector y_out = C * loop.x_of(y);
        const Vector innov_s = y_out - C * loop.xhat_of(y);
        return loop.sample(t, y, y_out, innov_s);
    };

    loop.finish(integrate(rhs, y0, config.integrator, post, on_sample));
    return loop.run;
}

}  // namespace ekflab
