#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pathweight {

/// One constant-curvature factor. K = 0 is a Euclidean block, K < 0 a
/// hyperbolic one. Positive curvature is rejected at construction.
struct CurvatureFactor {
    int dim = 0;
    double curvature = 0.0;  // K, units 1/length^2

    bool flat() const { return curvature == 0.0; }
};

/// Frame-invariant curvature data for products of constant-curvature factors.
/// All supported models are locally symmetric, so the curvature operator in a
/// parallel frame does not depend on the point; no frame argument is needed.
/// A user-supplied curvature operator can be attached through `custom`
/// (it must keep A(w) = Omega(w, .)w positive semi-definite).
class CurvatureModel {
public:
    using OmegaFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&,
                                                  const Eigen::VectorXd&)>;

    static CurvatureModel euclidean(int dim) {
        return CurvatureModel({CurvatureFactor{dim, 0.0}});
    }
    static CurvatureModel constant_curvature(int dim, double k) {
        return CurvatureModel({CurvatureFactor{dim, k}});
    }
    static CurvatureModel product(std::vector<CurvatureFactor> factors) {
        return CurvatureModel(std::move(factors));
    }
    static CurvatureModel custom(int dim, OmegaFn omega_fn, double kappa) {
        CurvatureModel m({CurvatureFactor{dim, 0.0}});
        m.custom_omega_ = std::move(omega_fn);
        m.kappa_ = kappa;
        return m;
    }

    int dim() const { return dim_; }
    const std::vector<CurvatureFactor>& factors() const { return factors_; }
    bool has_custom_omega() const { return static_cast<bool>(custom_omega_); }
    const OmegaFn& custom_omega() const { return custom_omega_; }

    /// Bound on ||Omega|| (and trivially on the vanishing ||grad R||).
    double kappa() const { return kappa_; }

    bool flat() const {
        if (custom_omega_) return false;
        for (const auto& f : factors_)
            if (!f.flat()) return false;
        return true;
    }

    std::string description() const {
        if (custom_omega_) return "custom:" + std::to_string(dim_);
        std::string s;
        for (std::size_t j = 0; j < factors_.size(); ++j) {
            if (j) s += "+";
            const auto& f = factors_[j];
            if (f.flat())
                s += "euclidean:" + std::to_string(f.dim);
            else
                s += "hyperbolic:" + std::to_string(f.dim) + ":" + format_k(f.curvature);
        }
        return s;
    }

private:
    explicit CurvatureModel(std::vector<CurvatureFactor> factors) : factors_(std::move(factors)) {
        if (factors_.empty()) throw std::invalid_argument("curvature model: no factors");
        for (const auto& f : factors_) {
            if (f.dim < 1) throw std::invalid_argument("curvature model: factor dim must be >= 1");
            if (f.curvature > 0.0)
                throw std::invalid_argument(
                    "curvature model: positive sectional curvature not supported");
            kappa_ = std::max(kappa_, -f.curvature);
            dim_ += f.dim;
        }
    }

    static std::string format_k(double k) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%g", k);
        return buf;
    }

    std::vector<CurvatureFactor> factors_;
    OmegaFn custom_omega_;
    int dim_ = 0;
    double kappa_ = 0.0;
};

namespace detail {
inline void check_dim(const CurvatureModel& model, const Eigen::VectorXd& v, const char* who) {
    if (v.size() != model.dim())
        throw std::invalid_argument(std::string(who) + ": dimension mismatch");
}
}  // namespace detail

/// Omega(a,b)c, blockwise K(<b,c>a - <a,c>b) per factor.
inline Eigen::VectorXd omega(const CurvatureModel& model, const Eigen::VectorXd& a,
                             const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
    detail::check_dim(model, a, "omega");
    detail::check_dim(model, b, "omega");
    detail::check_dim(model, c, "omega");
    if (model.has_custom_omega()) return model.custom_omega()(a, b, c);
    Eigen::VectorXd out(model.dim());
    int off = 0;
    for (const auto& f : model.factors()) {
        const auto aj = a.segment(off, f.dim);
        const auto bj = b.segment(off, f.dim);
        const auto cj = c.segment(off, f.dim);
        out.segment(off, f.dim) = f.curvature * (bj.dot(cj) * aj - aj.dot(cj) * bj);
        off += f.dim;
    }
    return out;
}

/// Ric(v) = sum_i Omega(v, e_i)e_i; equals K(d-1)v per factor.
inline Eigen::VectorXd ricci(const CurvatureModel& model, const Eigen::VectorXd& v) {
    detail::check_dim(model, v, "ricci");
    if (model.has_custom_omega()) {
        const int d = model.dim();
        Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < d; ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
            e[i] = 1.0;
            out += model.custom_omega()(v, e, e);
        }
        return out;
    }
    Eigen::VectorXd out(model.dim());
    int off = 0;
    for (const auto& f : model.factors()) {
        out.segment(off, f.dim) = f.curvature * (f.dim - 1) * v.segment(off, f.dim);
        off += f.dim;
    }
    return out;
}

/// Matrix of the Ricci map in the standard frame.
inline Eigen::MatrixXd ricci_matrix(const CurvatureModel& model) {
    const int d = model.dim();
    Eigen::MatrixXd r(d, d);
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        e[j] = 1.0;
        r.col(j) = ricci(model, e);
    }
    return r;
}

/// Scalar curvature; constant over the manifold for all supported models.
inline double scal(const CurvatureModel& model) {
    if (model.has_custom_omega()) return ricci_matrix(model).trace();
    double s = 0.0;
    for (const auto& f : model.factors()) s += f.dim * (f.dim - 1) * f.curvature;
    return s;
}

/// Segment Jacobi operator A(w)h = Omega(w,h)w. Positive semi-definite under
/// non-positive curvature: per factor kappa0 (||w||^2 I - w w^T).
inline Eigen::MatrixXd jacobi_operator(const CurvatureModel& model, const Eigen::VectorXd& w) {
    detail::check_dim(model, w, "jacobi_operator");
    const int d = model.dim();
    if (model.has_custom_omega()) {
        Eigen::MatrixXd a(d, d);
        for (int j = 0; j < d; ++j) {
            Eigen::VectorXd h = Eigen::VectorXd::Zero(d);
            h[j] = 1.0;
            a.col(j) = model.custom_omega()(w, h, w);
        }
        return 0.5 * (a + a.transpose());
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    int off = 0;
    for (const auto& f : model.factors()) {
        if (!f.flat()) {
            const Eigen::VectorXd wj = w.segment(off, f.dim);
            const double kappa0 = -f.curvature;
            a.block(off, off, f.dim, f.dim) =
                kappa0 * (wj.squaredNorm() * Eigen::MatrixXd::Identity(f.dim, f.dim) -
                          wj * wj.transpose());
        }
        off += f.dim;
    }
    return a;
}

}  // namespace pathweight
