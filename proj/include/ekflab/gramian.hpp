#pragma once

#include "ekflab/types.hpp"

#include <cstdint>
#include <vector>

namespace ekflab {

/// High-gain Gramian S(theta) and its inverse T(theta) for one block layout.
struct GramianPair {
    double theta = 0.0;
    std::vector<int> block_lengths;
    Matrix S;
    Matrix T;
};

/// Exact binomial coefficient; n limited to 24 (block lengths up to 12).
std::int64_t binomial_exact(int n, int k);

/// S(theta): block-diagonal, within-block entries
/// S_{j,sigma} = (-1)^{j+sigma} * binom(j+sigma-2, j-1) / theta^{j+sigma-1}
/// (1-based chain positions). Solves Abar'S + S Abar - Cbar'Cbar = -theta S.
Matrix s_matrix(const std::vector<int>& block_lengths, double theta);

/// T(theta) = S(theta)^{-1}: block-diagonal, within-block entries
/// T_{j,sigma} = theta^{j+sigma-1} * sum_k binom(k-1,j-1)*binom(k-1,sigma-1).
/// The theta = 1 inverse is integer-exact (det S(1) = 1 per block), so the
/// entrywise theta-scaling law holds to the last bit.
Matrix t_matrix(const std::vector<int>& block_lengths, double theta);

GramianPair make_gramian_pair(const std::vector<int>& block_lengths, double theta);

/// Frobenius norm of Abar'S + S*Abar - Cbar'Cbar + theta*S.
double lyapunov_residual(const Matrix& S, double theta, const std::vector<int>& block_lengths);

/// Frobenius norm of -Abar*T - T*Abar' + T*Cbar'Cbar*T - theta*T.
double riccati_residual(const Matrix& T, double theta, const std::vector<int>& block_lengths);

}  // namespace ekflab
