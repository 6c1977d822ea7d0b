#include "ekflab/gramian.hpp"

#include "ekflab/obsform.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ekflab {

namespace {

constexpr int kMaxBlock = 12;

void check_gramian_args(const std::vector<int>& block_lengths, double theta) {
    check_block_lengths(block_lengths);
    for (int l : block_lengths)
        if (l > kMaxBlock)
            throw std::invalid_argument("gramian: block lengths above 12 are not supported");
    if (!(theta > 0.0)) throw std::invalid_argument("gramian: theta must be positive");
}

}  // namespace

std::int64_t binomial_exact(int n, int k) {
    if (k < 0 || k > n) return 0;
    if (n > 2 * kMaxBlock) throw std::invalid_argument("binomial_exact: n out of supported range");
    std::int64_t r = 1;
    k = std::min(k, n - k);
    for (int i = 1; i <= k; ++i) {
        r = r * (n - k + i) / i;  // exact: product of i consecutive integers is divisible by i!
    }
    return r;
}

Matrix s_matrix(const std::vector<int>& block_lengths, double theta) {
    check_gramian_args(block_lengths, theta);
    const int n = std::accumulate(block_lengths.begin(), block_lengths.end(), 0);
    const auto off = block_offsets(block_lengths);
    Matrix S = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < block_lengths.size(); ++i) {
        const int l = block_lengths[i];
        for (int j = 1; j <= l; ++j) {
            for (int sg = 1; sg <= l; ++sg) {
                const double sign = ((j + sg) % 2 == 0) ? 1.0 : -1.0;
                const double b = static_cast<double>(binomial_exact(j + sg - 2, j - 1));
                S(off[i] + j - 1, off[i] + sg - 1) =
                    sign * b / std::pow(theta, j + sg - 1);
            }
        }
    }
    return S;
}

Matrix t_matrix(const std::vector<int>& block_lengths, double theta) {
    check_gramian_args(block_lengths, theta);
    const int n = std::accumulate(block_lengths.begin(), block_lengths.end(), 0);
    const auto off = block_offsets(block_lengths);
    Matrix T = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < block_lengths.size(); ++i) {
        const int l = block_lengths[i];
        for (int j = 1; j <= l; ++j) {
            for (int sg = 1; sg <= l; ++sg) {
                std::int64_t acc = 0;
                for (int k = 1; k <= l; ++k)
                    acc += binomial_exact(k - 1, j - 1) * binomial_exact(k - 1, sg - 1);
                T(off[i] + j - 1, off[i] + sg - 1) =
                    static_cast<double>(acc) * std::pow(theta, j + sg - 1);
            }
        }
    }
    return T;
}

GramianPair make_gramian_pair(const std::vector<int>& block_lengths, double theta) {
    GramianPair g;
    g.theta = theta;
    g.block_lengths = block_lengths;
    g.S = s_matrix(block_lengths, theta);
    g.T = t_matrix(block_lengths, theta);
    return g;
}

double lyapunov_residual(const Matrix& S, double theta, const std::vector<int>& block_lengths) {
    auto [Abar, Cbar] = build_block_matrices(block_lengths);
    if (S.rows() != Abar.rows() || S.cols() != Abar.cols())
        throw std::invalid_argument("lyapunov_residual: dimension mismatch");
    const Matrix R = Abar.transpose() * S + S * Abar - Cbar.transpose() * Cbar + theta * S;
    return R.norm();
}

double riccati_residual(const Matrix& T, double theta, const std::vector<int>& block_lengths) {
    auto [Abar, Cbar] = build_block_matrices(block_lengths);
    if (T.rows() != Abar.rows() || T.cols() != Abar.cols())
        throw std::invalid_argument("riccati_residual: dimension mismatch");
    const Matrix R =
        -Abar * T - T * Abar.transpose() + T * Cbar.transpose() * Cbar * T - theta * T;
    return R.norm();
}

}  // namespace ekflab
