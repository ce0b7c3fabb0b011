#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace pathweight {

namespace detail {

// sinh(sqrt(l) s)/sqrt(l) and cosh(sqrt(l) s) for l >= 0, with series
// branches near l s^2 = 0 so the kernel direction is exact. Both branches
// agree to ~1e-14 at the 1e-8 threshold.
inline double sinhc_scaled(double l, double s) {
    const double x = l * s * s;
    if (x < 1e-8) return s * (1.0 + x / 6.0 + x * x / 120.0 + x * x * x / 5040.0);
    const double r = std::sqrt(l);
    return std::sinh(r * s) / r;
}

inline double cosh_scaled(double l, double s) {
    const double x = l * s * s;
    if (x < 1e-8) return 1.0 + x / 2.0 + x * x / 24.0 + x * x * x / 720.0;
    return std::cosh(std::sqrt(l) * s);
}

inline void require_symmetric(const Eigen::MatrixXd& a, const char* who) {
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::invalid_argument(std::string(who) + ": matrix not symmetric");
}

}  // namespace detail

/// Solution data for one segment of the operator Jacobi equation Z'' = A Z.
/// S is the sine-type solution (S(0)=0, S'(0)=I), C the cosine-type
/// (C(0)=I, C'(0)=0). Closed-form segments carry the eigenbasis of the
/// constant A; numeric segments carry an RK4 trajectory.
class JacobiSegment {
public:
    Eigen::MatrixXd a0;       // A(0), symmetric PSD
    double delta = 0.0;       // segment length
    double k_bound = 0.0;     // sup ||A(s)|| over the segment
    Eigen::MatrixXd s_end;    // S(delta)
    Eigen::MatrixXd c_end;    // C(delta)
    Eigen::MatrixXd s_end_inv;

    int dim() const { return static_cast<int>(a0.rows()); }
    bool closed_form() const { return basis_.size() > 0; }

    const Eigen::MatrixXd& basis() const { return basis_; }
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

    Eigen::MatrixXd S(double s) const {
        Eigen::MatrixXd out(dim(), dim());
        eval(s, &out, nullptr, nullptr, nullptr);
        return out;
    }
    Eigen::MatrixXd C(double s) const {
        Eigen::MatrixXd out(dim(), dim());
        eval(s, nullptr, &out, nullptr, nullptr);
        return out;
    }
    Eigen::MatrixXd S_prime(double s) const {
        Eigen::MatrixXd out(dim(), dim());
        eval(s, nullptr, nullptr, &out, nullptr);
        return out;
    }
    Eigen::MatrixXd C_prime(double s) const {
        Eigen::MatrixXd out(dim(), dim());
        eval(s, nullptr, nullptr, nullptr, &out);
        return out;
    }

    /// Evaluate any subset of S, C, S', C' at s in [0, delta].
    void eval(double s, Eigen::MatrixXd* s_out, Eigen::MatrixXd* c_out,
              Eigen::MatrixXd* sp_out, Eigen::MatrixXd* cp_out) const {
        if (s < -1e-15 || s > delta * (1.0 + 1e-12))
            throw std::invalid_argument("JacobiSegment: s outside [0, delta]");
        if (closed_form()) {
            const int d = dim();
            Eigen::MatrixXd scaled(d, d);
            auto apply = [&](Eigen::MatrixXd* out, auto fn) {
                if (!out) return;
                for (int j = 0; j < d; ++j)
                    scaled.col(j) = basis_.col(j) * fn(eigenvalues_[j], s);
                out->noalias() = scaled * basis_.transpose();
            };
            apply(s_out, [](double l, double t) { return detail::sinhc_scaled(l, t); });
            apply(c_out, [](double l, double t) { return detail::cosh_scaled(l, t); });
            apply(sp_out, [](double l, double t) { return detail::cosh_scaled(l, t); });
            apply(cp_out, [](double l, double t) { return l * detail::sinhc_scaled(l, t); });
            return;
        }
        eval_numeric(s, s_out, c_out, sp_out, cp_out);
    }

    // Numeric backend state (populated by solve_segment_numeric).
    struct Trajectory {
        std::vector<Eigen::MatrixXd> zs, ws, zc, wc;  // per grid point
        std::function<Eigen::MatrixXd(double)> a_of_s;
        double h = 0.0;
    };
    Trajectory trajectory;

private:
    friend JacobiSegment solve_segment_const(const Eigen::MatrixXd&, double);
    friend JacobiSegment solve_segment_numeric(
        const std::function<Eigen::MatrixXd(double)>&, double, int);

    void eval_numeric(double s, Eigen::MatrixXd* s_out, Eigen::MatrixXd* c_out,
                      Eigen::MatrixXd* sp_out, Eigen::MatrixXd* cp_out) const;
    static void rk4_step(const std::function<Eigen::MatrixXd(double)>& a_of_s, double s, double h,
                         Eigen::MatrixXd& z, Eigen::MatrixXd& w);

    Eigen::MatrixXd basis_;       // eigenvectors of A(0)
    Eigen::VectorXd eigenvalues_; // eigenvalues, clamped to >= 0
};

/// Constant-coefficient solver: exact S, C through the symmetric
/// eigendecomposition of A0.
inline JacobiSegment solve_segment_const(const Eigen::MatrixXd& a0, double delta) {
    detail::require_symmetric(a0, "solve_segment_const");
    if (!(delta > 0.0)) throw std::invalid_argument("solve_segment_const: delta must be positive");
    const int d = static_cast<int>(a0.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    if (d <= 3)
        es.computeDirect(a0);
    else
        es.compute(a0);
    if (es.info() != Eigen::Success)
        throw std::runtime_error("solve_segment_const: eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    for (int j = 0; j < d; ++j) {
        if (lam[j] < -1e-10 * scale)
            throw std::invalid_argument("solve_segment_const: A0 has a negative eigenvalue");
        lam[j] = std::max(lam[j], 0.0);
    }

    JacobiSegment seg;
    seg.a0 = a0;
    seg.delta = delta;
    seg.k_bound = lam.maxCoeff();
    seg.basis_ = es.eigenvectors();
    seg.eigenvalues_ = lam;

    Eigen::MatrixXd scaled(d, d);
    for (int j = 0; j < d; ++j)
        scaled.col(j) = seg.basis_.col(j) * detail::sinhc_scaled(lam[j], delta);
    seg.s_end.noalias() = scaled * seg.basis_.transpose();
    for (int j = 0; j < d; ++j)
        scaled.col(j) = seg.basis_.col(j) / detail::sinhc_scaled(lam[j], delta);
    seg.s_end_inv.noalias() = scaled * seg.basis_.transpose();
    for (int j = 0; j < d; ++j)
        scaled.col(j) = seg.basis_.col(j) * detail::cosh_scaled(lam[j], delta);
    seg.c_end.noalias() = scaled * seg.basis_.transpose();
    return seg;
}

inline void JacobiSegment::rk4_step(const std::function<Eigen::MatrixXd(double)>& a_of_s, double s,
                                    double h, Eigen::MatrixXd& z, Eigen::MatrixXd& w) {
    const Eigen::MatrixXd a1 = a_of_s(s);
    const Eigen::MatrixXd a2 = a_of_s(s + 0.5 * h);
    const Eigen::MatrixXd a3 = a_of_s(s + h);
    const Eigen::MatrixXd k1z = w;
    const Eigen::MatrixXd k1w = a1 * z;
    const Eigen::MatrixXd k2z = w + 0.5 * h * k1w;
    const Eigen::MatrixXd k2w = a2 * (z + 0.5 * h * k1z);
    const Eigen::MatrixXd k3z = w + 0.5 * h * k2w;
    const Eigen::MatrixXd k3w = a2 * (z + 0.5 * h * k2z);
    const Eigen::MatrixXd k4z = w + h * k3w;
    const Eigen::MatrixXd k4w = a3 * (z + h * k3z);
    z += (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
    w += (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
}

inline void JacobiSegment::eval_numeric(double s, Eigen::MatrixXd* s_out, Eigen::MatrixXd* c_out,
                                        Eigen::MatrixXd* sp_out, Eigen::MatrixXd* cp_out) const {
    const auto& tr = trajectory;
    const int steps = static_cast<int>(tr.zs.size()) - 1;
    int i = std::min(steps, static_cast<int>(std::floor(s / tr.h)));
    const double rest = s - i * tr.h;
    Eigen::MatrixXd zs = tr.zs[i], ws = tr.ws[i], zc = tr.zc[i], wc = tr.wc[i];
    if (rest > 1e-15) {
        rk4_step(tr.a_of_s, i * tr.h, rest, zs, ws);
        rk4_step(tr.a_of_s, i * tr.h, rest, zc, wc);
    }
    if (s_out) *s_out = zs;
    if (c_out) *c_out = zc;
    if (sp_out) *sp_out = ws;
    if (cp_out) *cp_out = wc;
}

/// General s-dependent solver: classical RK4 on the first-order system
/// (Z, Z'). Quartic convergence toward the closed form on constant A.
inline JacobiSegment solve_segment_numeric(const std::function<Eigen::MatrixXd(double)>& a_of_s,
                                           double delta, int steps) {
    if (steps < 4) throw std::invalid_argument("solve_segment_numeric: steps must be >= 4");
    if (!(delta > 0.0)) throw std::invalid_argument("solve_segment_numeric: delta must be positive");
    const Eigen::MatrixXd a0 = a_of_s(0.0);
    detail::require_symmetric(a0, "solve_segment_numeric");
    const int d = static_cast<int>(a0.rows());

    JacobiSegment seg;
    seg.a0 = a0;
    seg.delta = delta;
    seg.trajectory.a_of_s = a_of_s;
    seg.trajectory.h = delta / steps;
    auto& tr = seg.trajectory;
    tr.zs.reserve(steps + 1);
    tr.ws.reserve(steps + 1);
    tr.zc.reserve(steps + 1);
    tr.wc.reserve(steps + 1);

    Eigen::MatrixXd zs = Eigen::MatrixXd::Zero(d, d);
    Eigen::MatrixXd ws = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd zc = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd wc = Eigen::MatrixXd::Zero(d, d);
    double kb = 0.0;
    for (int i = 0; i <= steps; ++i) {
        tr.zs.push_back(zs);
        tr.ws.push_back(ws);
        tr.zc.push_back(zc);
        tr.wc.push_back(wc);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a_of_s(i * tr.h));
        kb = std::max(kb, es.eigenvalues().cwiseAbs().maxCoeff());
        if (i == steps) break;
        JacobiSegment::rk4_step(a_of_s, i * tr.h, tr.h, zs, ws);
        JacobiSegment::rk4_step(a_of_s, i * tr.h, tr.h, zc, wc);
    }
    seg.k_bound = kb;
    seg.s_end = tr.zs.back();
    seg.c_end = tr.zc.back();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(seg.s_end);
    if (!lu.isInvertible())
        throw std::runtime_error("solve_segment_numeric: S(delta) numerically singular");
    seg.s_end_inv = lu.inverse();
    return seg;
}

/// Transfer operator F_i and the bridge solution V_{i+1} joining segment i to
/// segment i+1: V(s) = C_{i+1}(s) S_i(delta) - S_{i+1}(s) F_i.
struct TransferData {
    Eigen::MatrixXd f;                                  // F_i
    Eigen::MatrixXd s_left_end;                         // S_i(delta), = V(0)
    std::function<Eigen::MatrixXd(double)> v_at;        // s -> V_{i+1}(s)
};

inline TransferData transfer(const JacobiSegment& left, const JacobiSegment& right) {
    if (left.dim() != right.dim()) throw std::invalid_argument("transfer: dimension mismatch");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(right.s_end);
    if (!lu.isInvertible())
        throw std::runtime_error("transfer: right S(delta) numerically singular");
    TransferData t;
    t.f = lu.solve(right.c_end * left.s_end);
    t.s_left_end = left.s_end;
    t.v_at = [right, sl = left.s_end, f = t.f](double s) {
        return Eigen::MatrixXd(right.C(s) * sl - right.S(s) * f);
    };
    return t;
}

/// Taylor approximants of Lemma-7.6 type with rigorous truncation bounds.
/// The bounds are the Taylor-with-integral-remainder envelopes, evaluated in
/// closed form; they are attained exactly by constant scalar coefficients.
struct TaylorSegment {
    Eigen::MatrixXd a0;
    double delta = 0.0;
    double k0 = 0.0;  // sup ||A||
    double k1 = 0.0;  // sup ||A'|| (zero for locally symmetric models)

    Eigen::MatrixXd S(double s) const {
        const int d = static_cast<int>(a0.rows());
        return s * Eigen::MatrixXd::Identity(d, d) + (s * s * s / 6.0) * a0;
    }
    Eigen::MatrixXd C(double s) const {
        const int d = static_cast<int>(a0.rows());
        return Eigen::MatrixXd::Identity(d, d) + (s * s / 2.0) * a0;
    }

    // ||S_exact(s) - S(s)|| <= s_bound(s), ||C_exact(s) - C(s)|| <= c_bound(s)
    double s_bound(double s) const {
        return (s * s * s * s / 12.0) * k1 + s * sinhc_tail(k0, s);
    }
    double c_bound(double s) const {
        return (s * s * s / 6.0) * k1 + cosh_tail(k0, s);
    }

    static double sinhc_tail(double k0, double s) {  // sinh(x)/x - 1 - x^2/6, x = sqrt(k0) s
        const double x2 = k0 * s * s;
        if (x2 < 1e-4) return x2 * x2 / 120.0 + x2 * x2 * x2 / 5040.0;
        const double x = std::sqrt(x2);
        return std::sinh(x) / x - 1.0 - x2 / 6.0;
    }
    static double cosh_tail(double k0, double s) {  // cosh(x) - 1 - x^2/2
        const double x2 = k0 * s * s;
        if (x2 < 1e-4) return x2 * x2 / 24.0 + x2 * x2 * x2 / 720.0;
        return std::cosh(std::sqrt(x2)) - 1.0 - x2 / 2.0;
    }
};

inline TaylorSegment taylor_segment(const Eigen::MatrixXd& a0, double delta, double k1 = 0.0) {
    detail::require_symmetric(a0, "taylor_segment");
    TaylorSegment t;
    t.a0 = a0;
    t.delta = delta;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a0);
    t.k0 = es.eigenvalues().cwiseAbs().maxCoeff();
    t.k1 = k1;
    return t;
}

/// Bridge expansion V(s) ~ (D-s)I + ((D^3-sD^2)/6)A_i + ((3Ds^2-2D^2s-s^3)/6)A_{i+1}.
inline Eigen::MatrixXd taylor_bridge(const Eigen::MatrixXd& a_left, const Eigen::MatrixXd& a_right,
                                     double delta, double s) {
    const int d = static_cast<int>(a_left.rows());
    const double dd = delta;
    return (dd - s) * Eigen::MatrixXd::Identity(d, d) +
           ((dd * dd * dd - s * dd * dd) / 6.0) * a_left +
           ((3.0 * dd * s * s - 2.0 * dd * dd * s - s * s * s) / 6.0) * a_right;
}

}  // namespace pathweight
