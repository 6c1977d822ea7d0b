#pragma once

#include "ekflab/types.hpp"

#include <string>

namespace ekflab {

enum class StepMethod { rk4_fixed, rk45_adaptive };

struct IntegratorSettings {
    StepMethod method = StepMethod::rk4_fixed;
    double dt = 1e-3;  // fixed step, or initial step for the adaptive method
    double abs_tol = 1e-8;
    double rel_tol = 1e-8;
    double t_end = 50.0;
    int sample_stride = 10;

    void validate() const;
};

enum class IntegrationStatus { completed, nonfinite_state, step_underflow, callback_abort };

struct IntegrationOutcome {
    IntegrationStatus status = IntegrationStatus::completed;
    double t_stop = 0.0;
    std::string message;

    bool ok() const { return status == IntegrationStatus::completed; }
};

using OdeRhs = std::function<void(double t, const Vector& y, Vector& dydt)>;
using PostStepFn = std::function<void(double t, Vector& y)>;
// Return false to abort the run (the caller records why).
using SampleFn = std::function<bool(double t, const Vector& y)>;

/// Drives the ODE y' = rhs(t, y) from t = 0 to settings.t_end.
/// post_step runs after every accepted step; on_sample fires at t = 0,
/// after every sample_stride-th accepted step, and at t_end.
IntegrationOutcome integrate(const OdeRhs& rhs, Vector y0, const IntegratorSettings& settings,
                             const PostStepFn& post_step, const SampleFn& on_sample);

}  // namespace ekflab
