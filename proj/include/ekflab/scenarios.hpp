#pragma once

#include "ekflab/diagnostics.hpp"
#include "ekflab/filter.hpp"
#include "ekflab/obsform.hpp"

#include <string>
#include <vector>

namespace ekflab {

/// Scalar system xdot = x(1 - x^2), y = x^2 - x/2 with analytic Jacobians.
/// Observable but not uniformly observable; not in canonical form.
System krener_duarte();

/// Two-state linear system xdot = [[0,1],[a1,a2]] x, y = [1 0] x, declared
/// in observable form with blocks (2).
System linear_observable(double a1, double a2);

/// Blocks (2), fbar = (0, sin(x_11)), hbar = 0; canonical with both
/// declared constants equal to 1.
System sine_chain();

enum class Expectation { converge, diverge, none };

std::string to_string(Expectation e);

/// Declarative experiment description; defaults come from the catalog and
/// may be overridden field by field.
struct ScenarioConfig {
    std::string name;
    std::string system;  // catalog system name
    Vector truth_x0;
    Vector xhat0;
    Matrix P0;
    Matrix G;
    InputSignal u = InputSignal::zero(0);
    FilterForm form = FilterForm::both;
    IntegratorSettings integrator;
    Expectation expected = Expectation::none;
    double diag_L = 0.0;  // second-derivative bound fed to the radius formula
};

/// Systems addressable from configs. Throws on unknown names.
System make_system(const std::string& name);
std::vector<std::string> system_names();

const std::vector<ScenarioConfig>& scenario_catalog();
const ScenarioConfig* find_scenario(const std::string& name);
std::vector<std::string> scenario_names();

struct ScenarioResult {
    FilterRun run;
    DiagnosticsReport report;
    bool expected_match = true;  // true when expected == none
};

/// Executes the filter and diagnostics for one config and compares the
/// verdict against the declared expectation.
ScenarioResult run_scenario(const ScenarioConfig& config);

}  // namespace ekflab
