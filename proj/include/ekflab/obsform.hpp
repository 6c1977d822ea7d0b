#pragma once

#include "ekflab/types.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ekflab {

using StateFn = std::function<Vector(const Vector& x, const Vector& u)>;
using OutputFn = std::function<Vector(const Vector& x, const Vector& u)>;
using JacobianFn = std::function<Matrix(const Vector& x, const Vector& u)>;
using InputOnlyFn = std::function<Vector(const Vector& u)>;

/// Block data of a system declared in observable form: chain lengths
/// (l_1 <= ... <= l_p summing to n), the declared Lipschitz and
/// second-derivative bounds, and the nonlinear parts fbar/hbar with
/// drift(x,u) = Abar*x + fbar(x,u) and output(x,u) = Cbar*x + hbar(u).
struct CanonicalStructure {
    std::vector<int> block_lengths;
    double lipschitz_L = 0.0;
    double second_derivative_L = 0.0;
    StateFn fbar;
    InputOnlyFn hbar;
};

/// A controlled dynamical system xdot = drift(x,u), y = output(x,u) with
/// Jacobians. Immutable after construction; safe to share across runs.
struct System {
    int state_dim = 0;
    int input_dim = 0;
    int output_dim = 0;
    StateFn drift;
    OutputFn output;
    JacobianFn drift_jacobian;   // d drift / dx, n x n
    JacobianFn output_jacobian;  // d output / dx, p x n
    std::optional<CanonicalStructure> canonical;
};

/// Start offset of each block in the flat state vector.
std::vector<int> block_offsets(const std::vector<int>& block_lengths);

/// Throws std::invalid_argument unless the lengths are nonempty, positive
/// and nondecreasing.
void check_block_lengths(const std::vector<int>& block_lengths);

/// The pair (Abar, Cbar): Abar is block-diagonal with shift blocks (ones
/// on the superdiagonal), Cbar is block-diagonal with 1 x l_i rows
/// (1, 0, ..., 0).
std::pair<Matrix, Matrix> build_block_matrices(const std::vector<int>& block_lengths);

/// Central-difference Jacobian of fn with per-coordinate step
/// base_step * max(1, |x_i|).
Matrix central_difference_jacobian(const StateFn& fn, const Vector& x, const Vector& u,
                                   double base_step = 1e-6);

/// Assembles a System in observable form: drift = Abar*x + fbar(x,u),
/// output = Cbar*x + hbar(u). The drift Jacobian is Abar + d fbar/dx,
/// by central differences unless an analytic fbar_jacobian is supplied.
System make_canonical_system(std::vector<int> block_lengths, StateFn fbar, InputOnlyFn hbar,
                             double lipschitz_L, double second_derivative_L, int input_dim = 0,
                             JacobianFn fbar_jacobian = nullptr);

struct SamplePoint {
    Vector x;
    Vector u;
};

/// Names a forbidden dependency: component (block, row) of fbar varies
/// with coordinate (dep_block, dep_pos), dep_pos > row. Indices 1-based.
struct StructureViolation {
    int block = 0;
    int row = 0;
    int dep_block = 0;
    int dep_pos = 0;
    int sample = -1;
    double value = 0.0;
};

struct ValidationReport {
    bool pass = false;
    double forbidden_partial_max = 0.0;
    std::optional<StructureViolation> violation;
    double lipschitz_quotient = 0.0;
    double second_derivative_quotient = 0.0;
    double declared_lipschitz = 0.0;
    double declared_second_derivative = 0.0;
    int sample_count = 0;
    Vector box_lo, box_hi;  // coordinate hull of the sampled states

    std::string summary() const;
};

/// Checks the declared observable-form structure empirically over the
/// samples: (a) forbidden partials of fbar vanish to tol, (b) the
/// componentwise Lipschitz quotient stays within the declared constant,
/// (c) the second-derivative quadratic form stays within its declared
/// bound. Requires system.canonical.
ValidationReport validate_structure(const System& system, const std::vector<SamplePoint>& samples,
                                    double tol);

/// Halton points in [lo, hi]^state_dim with u = 0 (deterministic coverage).
std::vector<SamplePoint> halton_box_samples(int state_dim, int input_dim, double lo, double hi,
                                            int count);

/// Max relative deviation between the system's Jacobians and independent
/// central differences with step 1e-5 * max(1, |x_i|) over the samples.
double jacobian_consistency_error(const System& system, const std::vector<SamplePoint>& samples);

}  // namespace ekflab
