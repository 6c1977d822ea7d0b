#include "ekflab/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ekflab {

void IntegratorSettings::validate() const {
    if (!(dt > 0.0)) throw std::invalid_argument("integrator: dt must be positive");
    if (!(t_end > 0.0)) throw std::invalid_argument("integrator: t_end must be positive");
    if (sample_stride < 1) throw std::invalid_argument("integrator: sample_stride must be >= 1");
    if (method == StepMethod::rk45_adaptive && (!(abs_tol > 0.0) || !(rel_tol > 0.0)))
        throw std::invalid_argument("integrator: adaptive tolerances must be positive");
}

namespace {

struct Rk4Work {
    Vector k1, k2, k3, k4, tmp;
};

void rk4_step(const OdeRhs& rhs, double t, double h, Vector& y, Rk4Work& w) {
    rhs(t, y, w.k1);
    w.tmp = y + 0.5 * h * w.k1;
    rhs(t + 0.5 * h, w.tmp, w.k2);
    w.tmp = y + 0.5 * h * w.k2;
    rhs(t + 0.5 * h, w.tmp, w.k3);
    w.tmp = y + h * w.k3;
    rhs(t + h, w.tmp, w.k4);
    y += (h / 6.0) * (w.k1 + 2.0 * w.k2 + 2.0 * w.k3 + w.k4);
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct DopriWork {
    Vector k1, k2, k3, k4, k5, k6, k7, tmp, ynew, err;
};

// Returns the scaled error norm of one trial step; ynew holds the 5th-order result.
double dopri_step(const OdeRhs& rhs, double t, double h, const Vector& y, DopriWork& w,
                  double abs_tol, double rel_tol, bool have_k1) {
    if (!have_k1) rhs(t, y, w.k1);
    w.tmp = y + h * (a21 * w.k1);
    rhs(t + c2 * h, w.tmp, w.k2);
    w.tmp = y + h * (a31 * w.k1 + a32 * w.k2);
    rhs(t + c3 * h, w.tmp, w.k3);
    w.tmp = y + h * (a41 * w.k1 + a42 * w.k2 + a43 * w.k3);
    rhs(t + c4 * h, w.tmp, w.k4);
    w.tmp = y + h * (a51 * w.k1 + a52 * w.k2 + a53 * w.k3 + a54 * w.k4);
    rhs(t + c5 * h, w.tmp, w.k5);
    w.tmp = y + h * (a61 * w.k1 + a62 * w.k2 + a63 * w.k3 + a64 * w.k4 + a65 * w.k5);
    rhs(t + h, w.tmp, w.k6);
    w.ynew = y + h * (b1 * w.k1 + b3 * w.k3 + b4 * w.k4 + b5 * w.k5 + b6 * w.k6);
    rhs(t + h, w.ynew, w.k7);
    w.err = h * (e1 * w.k1 + e3 * w.k3 + e4 * w.k4 + e5 * w.k5 + e6 * w.k6 + e7 * w.k7);

    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double sc = abs_tol + rel_tol * std::max(std::abs(y(i)), std::abs(w.ynew(i)));
        const double q = w.err(i) / sc;
        acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
}

}  // namespace

IntegrationOutcome integrate(const OdeRhs& rhs, Vector y, const IntegratorSettings& settings,
                             const PostStepFn& post_step, const SampleFn& on_sample) {
    settings.validate();
    IntegrationOutcome out;

    if (!y.allFinite()) {
        out.status = IntegrationStatus::nonfinite_state;
        out.message = "nonfinite initial state";
        return out;
    }
    if (on_sample && !on_sample(0.0, y)) {
        out.status = IntegrationStatus::callback_abort;
        return out;
    }

    long accepted = 0;
    bool sampled_last = true;  // t = 0 just sampled

    auto after_step = [&](double t_now) -> bool {
        if (post_step) post_step(t_now, y);
        if (!y.allFinite()) {
            out.status = IntegrationStatus::nonfinite_state;
            out.t_stop = t_now;
            out.message = "state became nonfinite at t = " + std::to_string(t_now);
            return false;
        }
        ++accepted;
        sampled_last = false;
        if (accepted % settings.sample_stride == 0) {
            sampled_last = true;
            if (on_sample && !on_sample(t_now, y)) {
                out.status = IntegrationStatus::callback_abort;
                out.t_stop = t_now;
                return false;
            }
        }
        return true;
    };

    if (settings.method == StepMethod::rk4_fixed) {
        Rk4Work w;
        const long n_full = static_cast<long>(settings.t_end / settings.dt);
        double t = 0.0;
        for (long k = 0; k < n_full; ++k) {
            rk4_step(rhs, t, settings.dt, y, w);
            t = settings.dt * static_cast<double>(k + 1);
            if (!after_step(t)) return out;
        }
        const double rem = settings.t_end - t;
        if (rem > 1e-12 * settings.t_end) {
            rk4_step(rhs, t, rem, y, w);
            t = settings.t_end;
            if (!after_step(t)) return out;
        }
        if (!sampled_last && on_sample && !on_sample(t, y)) {
            out.status = IntegrationStatus::callback_abort;
            out.t_stop = t;
            return out;
        }
        out.t_stop = t;
        return out;
    }

    // rk45_adaptive
    DopriWork w;
    rhs(0.0, y, w.k1);
    bool have_k1 = true;
    double t = 0.0;
    double h = std::min(settings.dt, settings.t_end);
    const double h_min = 1e-14 * settings.t_end;
    while (t < settings.t_end) {
        if (h < h_min) {
            out.status = IntegrationStatus::step_underflow;
            out.t_stop = t;
            out.message = "step size underflow at t = " + std::to_string(t);
            return out;
        }
        const bool clipped = t + h >= settings.t_end;
        if (clipped) h = settings.t_end - t;
        const double errn = dopri_step(rhs, t, h, y, w, settings.abs_tol, settings.rel_tol, have_k1);
        if (!w.ynew.allFinite() || !std::isfinite(errn)) {
            out.status = IntegrationStatus::nonfinite_state;
            out.t_stop = t;
            out.message = "state became nonfinite at t = " + std::to_string(t);
            return out;
        }
        if (errn <= 1.0) {
            t = clipped ? settings.t_end : t + h;
            y = w.ynew;
            w.k1 = w.k7;  // FSAL
            have_k1 = true;
            if (post_step) {
                // the hook may modify y, invalidating the FSAL derivative
                post_step(t, y);
                have_k1 = false;
            }
            if (!y.allFinite()) {
                out.status = IntegrationStatus::nonfinite_state;
                out.t_stop = t;
                out.message = "state became nonfinite at t = " + std::to_string(t);
                return out;
            }
            ++accepted;
            sampled_last = false;
            if (accepted % settings.sample_stride == 0) {
                sampled_last = true;
                if (on_sample && !on_sample(t, y)) {
                    out.status = IntegrationStatus::callback_abort;
                    out.t_stop = t;
                    return out;
                }
            }
            if (have_k1 == false && t < settings.t_end) {
                rhs(t, y, w.k1);
                have_k1 = true;
            }
        }
        const double grow = 0.9 * std::pow(std::max(errn, 1e-10), -0.2);
        h *= std::clamp(grow, 0.2, 5.0);
    }
    if (!sampled_last && on_sample && !on_sample(t, y)) {
        out.status = IntegrationStatus::callback_abort;
        out.t_stop = t;
        return out;
    }
    out.t_stop = t;
    return out;
}

}  // namespace ekflab
