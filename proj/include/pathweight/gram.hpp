#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "pathweight/block_tridiagonal.hpp"
#include "pathweight/jacobi.hpp"
#include "pathweight/partition.hpp"
#include "pathweight/quadrature.hpp"

namespace pathweight {

inline constexpr int kDefaultQuadratureOrder = 20;

/// Gram matrix of the L^2 metric in the piecewise-Jacobi basis:
///   D_i = int S_i^T S_i + int V_{i+1}^T V_{i+1}   (last block: first term only)
///   M_{i,i+1} = int V_{i+1}^T S_{i+1}
/// with fixed-order Gauss-Legendre quadrature of the closed-form integrands.
/// Analytic antiderivatives exist but order-20 quadrature already reaches
/// ~1e-13 and is cross-checked against them in the tests.
inline BlockTridiagonal gram_blocks(const std::vector<JacobiSegment>& segments,
                                    const std::vector<TransferData>& transfers,
                                    int quadrature_order = kDefaultQuadratureOrder) {
    const int n = static_cast<int>(segments.size());
    if (n < 1) throw std::invalid_argument("gram_blocks: need at least one segment");
    if (static_cast<int>(transfers.size()) != n - 1)
        throw std::invalid_argument("gram_blocks: need one transfer per interior knot");
    const int d = segments.front().dim();
    const double delta = segments.front().delta;
    for (const auto& s : segments)
        if (s.dim() != d || std::fabs(s.delta - delta) > 1e-14 * delta)
            throw std::invalid_argument("gram_blocks: segments must share dim and delta");

    const GaussLegendre rule(quadrature_order, delta);
    BlockTridiagonal g = BlockTridiagonal::zero(n, d);

    Eigen::MatrixXd s_mat(d, d), c_mat(d, d), v_mat(d, d);
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd& di = g.diag[i];
        for (int q = 0; q < rule.order(); ++q) {
            const double s = rule.nodes[q];
            const double w = rule.weights[q];
            segments[i].eval(s, &s_mat, nullptr, nullptr, nullptr);
            di.noalias() += w * (s_mat.transpose() * s_mat);
            if (i + 1 < n) {
                // V_{i+1}(s) = C_{i+1}(s) S_i(delta) - S_{i+1}(s) F_i
                segments[i + 1].eval(s, &s_mat, &c_mat, nullptr, nullptr);
                v_mat.noalias() = c_mat * transfers[i].s_left_end;
                v_mat.noalias() -= s_mat * transfers[i].f;
                di.noalias() += w * (v_mat.transpose() * v_mat);
                g.upper[i].noalias() += w * (v_mat.transpose() * s_mat);
            }
        }
    }
    return g;
}

/// Flat Gram matrix L_P for a uniform mesh: (Delta^3/6) tridiag(4,1;...;1,2) x I_d.
inline BlockTridiagonal flat_gram(int n, double delta, int d) {
    if (n < 1) throw std::invalid_argument("flat_gram: n must be >= 1");
    const double c = delta * delta * delta;
    BlockTridiagonal l = BlockTridiagonal::zero(n, d);
    for (int i = 0; i < n; ++i)
        l.diag[i] = ((i + 1 < n ? 2.0 * c / 3.0 : c / 3.0)) * Eigen::MatrixXd::Identity(d, d);
    for (int i = 0; i + 1 < n; ++i)
        l.upper[i] = (c / 6.0) * Eigen::MatrixXd::Identity(d, d);
    return l;
}

/// Remainder R_P = G_P^F - L_P.
inline BlockTridiagonal remainder(const BlockTridiagonal& g, const BlockTridiagonal& l) {
    return g - l;
}

/// Second-order expansion piece U_P: diagonal (Delta^5/360) 16(4A_i - A_{i+1}),
/// off-diagonal (Delta^5/360)(13A_i - 7A_{i+1}), with A_{n+1} = 0.
inline BlockTridiagonal u_matrix(const std::vector<Eigen::MatrixXd>& jacobi_ops, double delta) {
    const int n = static_cast<int>(jacobi_ops.size());
    if (n < 1) throw std::invalid_argument("u_matrix: need at least one operator");
    const int d = static_cast<int>(jacobi_ops.front().rows());
    for (const auto& a : jacobi_ops) detail::require_symmetric(a, "u_matrix");
    const double c = std::pow(delta, 5) / 360.0;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(d, d);
    BlockTridiagonal u = BlockTridiagonal::zero(n, d);
    for (int i = 0; i < n; ++i) {
        const Eigen::MatrixXd& next = (i + 1 < n) ? jacobi_ops[i + 1] : zero;
        u.diag[i] = c * 16.0 * (4.0 * jacobi_ops[i] - next);
        if (i + 1 < n) u.upper[i] = c * (13.0 * jacobi_ops[i] - 7.0 * next);
    }
    return u;
}

/// E_P = R_P - U_P.
inline BlockTridiagonal epsilon_matrix(const BlockTridiagonal& r, const BlockTridiagonal& u) {
    return r - u;
}

/// Diagnostics: max_i ||[E]_{i,*}|| / (Delta^3 (||Delta_i b||^3 + ||Delta_{i+1} b||^3)),
/// the constant of the cubic block law (Delta_{n+1} b = 0).
inline double epsilon_diagnostics(const BlockTridiagonal& e, const IncrementVector& inc,
                                  double delta) {
    if (e.blocks() != inc.n()) throw std::invalid_argument("epsilon_diagnostics: shape mismatch");
    const double d3 = delta * delta * delta;
    double worst = 0.0;
    const int n = e.blocks();
    for (int i = 0; i < n; ++i) {
        const double bi = std::pow(inc.deltas[i].norm(), 3);
        const double bn = (i + 1 < n) ? std::pow(inc.deltas[i + 1].norm(), 3) : 0.0;
        const double denom = d3 * (bi + bn);
        if (denom <= 0.0) continue;
        double blk = e.diag[i].operatorNorm();
        if (i + 1 < n) blk = std::max(blk, e.upper[i].operatorNorm());
        worst = std::max(worst, blk / denom);
    }
    return worst;
}

}  // namespace pathweight
