#pragma once

#include <Eigen/Dense>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace pathweight {

/// Thrown when a block Cholesky factorization meets a non-positive-definite
/// matrix; distinct from argument errors so callers can count numerical
/// failures separately.
struct FactorizationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Symmetric block-tridiagonal matrix: n diagonal d x d blocks and n-1 upper
/// blocks; the lower blocks are the transposes. All Gram-type matrices in the
/// pipeline live here; the dense form is only materialized for small tests.
struct BlockTridiagonal {
    std::vector<Eigen::MatrixXd> diag;   // [i] = block (i, i)
    std::vector<Eigen::MatrixXd> upper;  // [i] = block (i, i+1)

    int blocks() const { return static_cast<int>(diag.size()); }
    int block_dim() const { return diag.empty() ? 0 : static_cast<int>(diag.front().rows()); }
    int size() const { return blocks() * block_dim(); }

    static BlockTridiagonal zero(int n, int d) {
        BlockTridiagonal b;
        b.diag.assign(n, Eigen::MatrixXd::Zero(d, d));
        b.upper.assign(n > 0 ? n - 1 : 0, Eigen::MatrixXd::Zero(d, d));
        return b;
    }

    void check_shape_matches(const BlockTridiagonal& other, const char* who) const {
        if (blocks() != other.blocks() || block_dim() != other.block_dim())
            throw std::invalid_argument(std::string(who) + ": shape mismatch");
    }

    BlockTridiagonal operator-(const BlockTridiagonal& other) const {
        check_shape_matches(other, "BlockTridiagonal::operator-");
        BlockTridiagonal out = *this;
        for (int i = 0; i < blocks(); ++i) out.diag[i] -= other.diag[i];
        for (int i = 0; i + 1 < blocks(); ++i) out.upper[i] -= other.upper[i];
        return out;
    }

    BlockTridiagonal operator+(const BlockTridiagonal& other) const {
        check_shape_matches(other, "BlockTridiagonal::operator+");
        BlockTridiagonal out = *this;
        for (int i = 0; i < blocks(); ++i) out.diag[i] += other.diag[i];
        for (int i = 0; i + 1 < blocks(); ++i) out.upper[i] += other.upper[i];
        return out;
    }

    bool all_finite() const {
        for (const auto& m : diag)
            if (!m.allFinite()) return false;
        for (const auto& m : upper)
            if (!m.allFinite()) return false;
        return true;
    }

    Eigen::MatrixXd dense() const {
        const int n = blocks(), d = block_dim();
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n * d, n * d);
        for (int i = 0; i < n; ++i) m.block(i * d, i * d, d, d) = diag[i];
        for (int i = 0; i + 1 < n; ++i) {
            m.block(i * d, (i + 1) * d, d, d) = upper[i];
            m.block((i + 1) * d, i * d, d, d) = upper[i].transpose();
        }
        return m;
    }

    /// log det via the block LDL-style recursion
    ///   B_1 = D_1,  B_i = D_i - M_{i-1}^T B_{i-1}^{-1} M_{i-1},
    /// summing the Cholesky log determinants of the Schur blocks.
    double log_det() const {
        const int n = blocks(), d = block_dim();
        double ld = 0.0;
        Eigen::MatrixXd b = diag[0];
        for (int i = 0;; ++i) {
            Eigen::LLT<Eigen::MatrixXd> llt(b);
            if (llt.info() != Eigen::Success)
                throw FactorizationError("BlockTridiagonal::log_det: matrix not positive definite");
            for (int j = 0; j < d; ++j) ld += 2.0 * std::log(llt.matrixL()(j, j));
            if (i + 1 >= n) break;
            b = diag[i + 1] - upper[i].transpose() * llt.solve(upper[i]);
        }
        return ld;
    }

    /// Debug dump: one line per nonzero block entry (i, j, row, col, value).
    void dump_csv(std::ostream& os) const {
        const int n = blocks(), d = block_dim();
        os << "i,j,row,col,value\n";
        char buf[64];
        auto emit = [&](int i, int j, const Eigen::MatrixXd& m) {
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) {
                    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%d,%.17g\n", i, j, r, c, m(r, c));
                    os << buf;
                }
        };
        for (int i = 0; i < n; ++i) emit(i, i, diag[i]);
        for (int i = 0; i + 1 < n; ++i) emit(i, i + 1, upper[i]);
    }
};

}  // namespace pathweight
