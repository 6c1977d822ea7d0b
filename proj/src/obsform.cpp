#include "ekflab/obsform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ekflab {

void check_block_lengths(const std::vector<int>& block_lengths) {
    if (block_lengths.empty())
        throw std::invalid_argument("block_lengths must be nonempty");
    for (int l : block_lengths)
        if (l < 1) throw std::invalid_argument("block_lengths must be positive");
    if (!std::is_sorted(block_lengths.begin(), block_lengths.end()))
        throw std::invalid_argument("block_lengths must be nondecreasing");
}

std::vector<int> block_offsets(const std::vector<int>& block_lengths) {
    std::vector<int> off(block_lengths.size(), 0);
    for (std::size_t i = 1; i < block_lengths.size(); ++i)
        off[i] = off[i - 1] + block_lengths[i - 1];
    return off;
}

std::pair<Matrix, Matrix> build_block_matrices(const std::vector<int>& block_lengths) {
    check_block_lengths(block_lengths);
    const int p = static_cast<int>(block_lengths.size());
    const int n = std::accumulate(block_lengths.begin(), block_lengths.end(), 0);
    Matrix Abar = Matrix::Zero(n, n);
    Matrix Cbar = Matrix::Zero(p, n);
    const auto off = block_offsets(block_lengths);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j + 1 < block_lengths[i]; ++j)
            Abar(off[i] + j, off[i] + j + 1) = 1.0;
        Cbar(i, off[i]) = 1.0;
    }
    return {Abar, Cbar};
}

Matrix central_difference_jacobian(const StateFn& fn, const Vector& x, const Vector& u,
                                   double base_step) {
    const int n = static_cast<int>(x.size());
    Vector xp = x, xm = x;
    Vector f0 = fn(x, u);
    Matrix J(f0.size(), n);
    for (int i = 0; i < n; ++i) {
        const double h = base_step * std::max(1.0, std::abs(x(i)));
        xp(i) = x(i) + h;
        xm(i) = x(i) - h;
        J.col(i) = (fn(xp, u) - fn(xm, u)) / (2.0 * h);
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return J;
}

System make_canonical_system(std::vector<int> block_lengths, StateFn fbar, InputOnlyFn hbar,
                             double lipschitz_L, double second_derivative_L, int input_dim,
                             JacobianFn fbar_jacobian) {
    check_block_lengths(block_lengths);
    if (!fbar || !hbar) throw std::invalid_argument("fbar and hbar must be callable");
    if (lipschitz_L <= 0.0 || second_derivative_L <= 0.0)
        throw std::invalid_argument("declared Lipschitz constants must be positive");
    if (input_dim < 0) throw std::invalid_argument("input_dim must be nonnegative");

    auto [Abar, Cbar] = build_block_matrices(block_lengths);
    const int n = static_cast<int>(Abar.rows());
    const int p = static_cast<int>(Cbar.rows());

    System sys;
    sys.state_dim = n;
    sys.input_dim = input_dim;
    sys.output_dim = p;
    sys.drift = [Abar = Abar, fbar](const Vector& x, const Vector& u) -> Vector {
        return Abar * x + fbar(x, u);
    };
    sys.output = [Cbar = Cbar, hbar](const Vector& x, const Vector& u) -> Vector {
        return Cbar * x + hbar(u);
    };
    if (fbar_jacobian) {
        sys.drift_jacobian = [Abar = Abar, fbar_jacobian](const Vector& x, const Vector& u) -> Matrix {
            return Abar + fbar_jacobian(x, u);
        };
    } else {
        sys.drift_jacobian = [Abar = Abar, fbar](const Vector& x, const Vector& u) -> Matrix {
            return Abar + central_difference_jacobian(fbar, x, u);
        };
    }
    sys.output_jacobian = [Cbar = Cbar](const Vector&, const Vector&) -> Matrix { return Cbar; };

    CanonicalStructure cs;
    cs.block_lengths = std::move(block_lengths);
    cs.lipschitz_L = lipschitz_L;
    cs.second_derivative_L = second_derivative_L;
    cs.fbar = std::move(fbar);
    cs.hbar = std::move(hbar);
    sys.canonical = std::move(cs);
    return sys;
}

std::string ValidationReport::summary() const {
    std::ostringstream os;
    os << (pass ? "PASS" : "FAIL");
    os << ": forbidden-partial max " << forbidden_partial_max;
    if (violation) {
        os << " [violation at fbar(" << violation->block << "," << violation->row << ") vs x("
           << violation->dep_block << "," << violation->dep_pos << "), sample " << violation->sample
           << ", value " << violation->value << "]";
    }
    os << ", Lipschitz quotient " << lipschitz_quotient << " (declared " << declared_lipschitz
       << "), second-derivative quotient " << second_derivative_quotient << " (declared "
       << declared_second_derivative << "), " << sample_count << " samples";
    if (box_lo.size() > 0) {
        os << " in [" << box_lo.minCoeff() << ", " << box_hi.maxCoeff() << "]^" << box_lo.size();
    }
    return os.str();
}

namespace {

// Zeroes all coordinates x_{qk} with k > depth (1-based chain position).
Vector restrict_to_depth(const Vector& v, const std::vector<int>& blocks,
                         const std::vector<int>& off, int depth) {
    Vector r = Vector::Zero(v.size());
    for (std::size_t q = 0; q < blocks.size(); ++q) {
        const int keep = std::min(depth, blocks[q]);
        for (int k = 0; k < keep; ++k) r(off[q] + k) = v(off[q] + k);
    }
    return r;
}

double halton_radical_inverse(int index, int base) {
    double f = 1.0, r = 0.0;
    while (index > 0) {
        f /= base;
        r += f * (index % base);
        index /= base;
    }
    return r;
}

constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

}  // namespace

std::vector<SamplePoint> halton_box_samples(int state_dim, int input_dim, double lo, double hi,
                                            int count) {
    if (state_dim < 1 || state_dim > 12)
        throw std::invalid_argument("halton_box_samples: state_dim must be in [1,12]");
    if (hi <= lo) throw std::invalid_argument("halton_box_samples: empty box");
    std::vector<SamplePoint> pts;
    pts.reserve(count);
    for (int k = 1; k <= count; ++k) {
        Vector x(state_dim);
        for (int d = 0; d < state_dim; ++d)
            x(d) = lo + (hi - lo) * halton_radical_inverse(k, kPrimes[d]);
        pts.push_back({std::move(x), Vector::Zero(input_dim)});
    }
    return pts;
}

ValidationReport validate_structure(const System& system, const std::vector<SamplePoint>& samples,
                                    double tol) {
    if (!system.canonical)
        throw std::invalid_argument("validate_structure: system has no canonical structure");
    if (samples.empty()) throw std::invalid_argument("validate_structure: samples must be nonempty");

    const CanonicalStructure& cs = *system.canonical;
    const auto& blocks = cs.block_lengths;
    const auto off = block_offsets(blocks);
    const int n = system.state_dim;
    const int p = static_cast<int>(blocks.size());

    ValidationReport rep;
    rep.declared_lipschitz = cs.lipschitz_L;
    rep.declared_second_derivative = cs.second_derivative_L;
    rep.sample_count = static_cast<int>(samples.size());
    rep.box_lo = samples.front().x;
    rep.box_hi = samples.front().x;
    for (const auto& s : samples) {
        rep.box_lo = rep.box_lo.cwiseMin(s.x);
        rep.box_hi = rep.box_hi.cwiseMax(s.x);
    }

    // (a) forbidden partials d fbar_{ir} / d x_{jk}, k > r
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const Matrix J = central_difference_jacobian(cs.fbar, samples[s].x, samples[s].u);
        for (int i = 0; i < p; ++i) {
            for (int r = 0; r < blocks[i]; ++r) {
                for (int j = 0; j < p; ++j) {
                    for (int k = r + 1; k < blocks[j]; ++k) {
                        const double v = std::abs(J(off[i] + r, off[j] + k));
                        if (v > rep.forbidden_partial_max) {
                            rep.forbidden_partial_max = v;
                            if (v > tol) {
                                StructureViolation viol;
                                viol.block = i + 1;
                                viol.row = r + 1;
                                viol.dep_block = j + 1;
                                viol.dep_pos = k + 1;
                                viol.sample = static_cast<int>(s);
                                viol.value = v;
                                rep.violation = viol;
                            }
                        }
                    }
                }
            }
        }
    }

    // (b) componentwise Lipschitz quotient over all sample pairs; the
    // denominator is the difference restricted to the coordinates the
    // component is allowed to depend on.
    std::vector<Vector> fvals(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s)
        fvals[s] = cs.fbar(samples[s].x, samples[s].u);
    for (std::size_t a = 0; a < samples.size(); ++a) {
        for (std::size_t b = a + 1; b < samples.size(); ++b) {
            if ((samples[a].u - samples[b].u).norm() > 0) continue;  // condition on equal input
            const Vector dx = samples[a].x - samples[b].x;
            for (int i = 0; i < p; ++i) {
                for (int r = 0; r < blocks[i]; ++r) {
                    const double denom =
                        restrict_to_depth(dx, blocks, off, r + 1).norm();
                    if (denom < 1e-12) continue;
                    const double numer = std::abs(fvals[a](off[i] + r) - fvals[b](off[i] + r));
                    rep.lipschitz_quotient = std::max(rep.lipschitz_quotient, numer / denom);
                }
            }
        }
    }

    // (c) second-derivative quadratic form |H(fbar)[xi,xi]| / |xi|^2 by
    // second central differences along deterministic unit directions.
    const double h2 = 1e-4;
    int dir_index = 1;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        for (int rep_dir = 0; rep_dir < 5; ++rep_dir, ++dir_index) {
            Vector xi(n);
            for (int d = 0; d < n; ++d)
                xi(d) = 2.0 * halton_radical_inverse(dir_index, kPrimes[d]) - 1.0;
            const double nx = xi.norm();
            if (nx < 1e-8) continue;
            xi /= nx;
            const double h = h2 * std::max(1.0, samples[s].x.cwiseAbs().maxCoeff());
            const Vector quad = (cs.fbar(samples[s].x + h * xi, samples[s].u) - 2.0 * fvals[s] +
                                 cs.fbar(samples[s].x - h * xi, samples[s].u)) /
                                (h * h);
            rep.second_derivative_quotient =
                std::max(rep.second_derivative_quotient, quad.norm());
        }
    }

    rep.pass = rep.forbidden_partial_max <= tol && rep.lipschitz_quotient <= cs.lipschitz_L &&
               rep.second_derivative_quotient <= cs.second_derivative_L;
    return rep;
}

double jacobian_consistency_error(const System& system, const std::vector<SamplePoint>& samples) {
    double worst = 0.0;
    for (const auto& s : samples) {
        const Matrix Jd = system.drift_jacobian(s.x, s.u);
        const Matrix Jd_fd = central_difference_jacobian(system.drift, s.x, s.u, 1e-5);
        const Matrix Jo = system.output_jacobian(s.x, s.u);
        const Matrix Jo_fd = central_difference_jacobian(system.output, s.x, s.u, 1e-5);
        const double ed = (Jd - Jd_fd).cwiseAbs().maxCoeff() /
                          std::max(1.0, Jd.cwiseAbs().maxCoeff());
        const double eo = (Jo - Jo_fd).cwiseAbs().maxCoeff() /
                          std::max(1.0, Jo.cwiseAbs().maxCoeff());
        worst = std::max({worst, ed, eo});
    }
    return worst;
}

}  // namespace ekflab
