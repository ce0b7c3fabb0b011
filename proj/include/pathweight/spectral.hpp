#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pathweight/block_tridiagonal.hpp"

namespace pathweight {

/// tau_G = (2+sqrt(3))/(20 sqrt(3)), the limiting scalar-curvature coupling.
inline double tau_g() { return (2.0 + std::sqrt(3.0)) / (20.0 * std::sqrt(3.0)); }

/// Continuous branch of the argument of (1+2e^{i t})/(1+2e^{-i t}) on [0,pi],
/// normalized so phi(0) = 0, phi(pi) = 2 pi.
inline double phi_angle(double theta) {
    if (theta < 0.0 || theta > M_PI) throw std::invalid_argument("phi_angle: theta outside [0,pi]");
    // The numerator 1+2e^{i t} stays in the closed upper half plane on [0,pi],
    // so atan2 is already the continuous branch.
    return 2.0 * std::atan2(2.0 * std::sin(theta), 1.0 + 2.0 * std::cos(theta));
}

/// phi'(t) = 4(cos t + 2)/(5 + 4 cos t).
inline double phi_angle_derivative(double theta) {
    return 4.0 * (std::cos(theta) + 2.0) / (5.0 + 4.0 * std::cos(theta));
}

/// k-th interior angle: unique root of t - phi(t)/(2(n+1)) = pi k/(n+1) in
/// (pi k/(n+1), pi (k+1)/(n+1)). Bisection bracket, then Newton polish.
inline double theta_k(int n, int k) {
    if (k < 1 || k > n - 1) throw std::invalid_argument("theta_k: k outside 1..n-1");
    const double target = M_PI * k / (n + 1);
    const double scale = 2.0 * (n + 1);
    auto f = [&](double t) { return t - phi_angle(t) / scale - target; };
    double lo = target, hi = M_PI * (k + 1) / (n + 1);
    for (int it = 0; it < 100 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 2; ++it) {
        const double deriv = 1.0 - phi_angle_derivative(t) / scale;
        t -= f(t) / deriv;
        t = std::min(std::max(t, lo), hi);
    }
    return t;
}

/// The boundary polynomial a_n(z) = z^{2(n+1)} + 2 z^{2n+1} - 2z - 1 in the
/// factored form z^{2n}(z^2+2z) - (2z+1), parameterized by u = z + 2 and
/// evaluated with log-magnitude tracking. Near the real root u is
/// exponentially small, so u is the quantity worth carrying.
inline double a_n_at_minus_two_plus(int n, double u) {
    // z = -2 + u, z^{2n} (z^2+2z) = -u (2-u)^{2n+1}
    const double big = u * std::exp((2 * n + 1) * std::log(2.0 - u));
    return 3.0 - 2.0 * u - big;
}

inline double a_n_polynomial(int n, double z) { return a_n_at_minus_two_plus(n, z + 2.0); }

/// a_n residual with u carried as x = log u, stable when the root sits many
/// orders of magnitude below 1.
inline double a_n_at_log_u(int n, double x) {
    const double u = std::exp(x);
    return 3.0 - 2.0 * u - std::exp(x + (2 * n + 1) * std::log(2.0 - u));
}

/// log(gamma_n + 2): the root shrinks like 4^{-n}, so the bisection runs on
/// x = log u, where the function is smooth and monotone.
inline double gamma_n_log_u(int n) {
    if (n < 2) throw std::invalid_argument("gamma_n: n must be >= 2");
    auto h = [&](double x) {
        const double u = std::exp(x);
        return (2 * n + 1) * std::log(2.0 - u) + x - std::log(3.0 - 2.0 * u);
    };
    double lo = -745.0, hi = std::log(0.5);
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (h(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
    }
    const double x = 0.5 * (lo + hi);
    if (!(std::fabs(a_n_at_log_u(n, x)) < 1e-9))
        throw std::runtime_error("gamma_n: root finder failed to converge");
    return x;
}

/// gamma_n + 2 itself; exponentially small but exactly representable far
/// beyond the point where -2 + u rounds to -2.
inline double gamma_n_plus_two(int n) { return std::exp(gamma_n_log_u(n)); }

inline double gamma_n(int n) { return -2.0 + gamma_n_plus_two(n); }

/// Determinant sequence d_0 = 1, d_1 = 2, d_{m+2} = 4 d_{m+1} - d_m.
/// Doubles overflow near n = 560; use log_det_sequence beyond that.
inline std::vector<double> det_sequence(int n) {
    if (n < 0) throw std::invalid_argument("det_sequence: n must be >= 0");
    std::vector<double> d(n + 1);
    d[0] = 1.0;
    if (n >= 1) d[1] = 2.0;
    for (int m = 2; m <= n; ++m) d[m] = 4.0 * d[m - 1] - d[m - 2];
    return d;
}

/// log d_m for m = 0..n via the stable ratio recursion r_m = 4 - 1/r_{m-1}.
inline std::vector<double> log_det_sequence(int n) {
    if (n < 0) throw std::invalid_argument("log_det_sequence: n must be >= 0");
    std::vector<double> ld(n + 1);
    ld[0] = 0.0;
    double r = 2.0;  // d_1/d_0
    for (int m = 1; m <= n; ++m) {
        ld[m] = ld[m - 1] + std::log(r);
        r = 4.0 - 1.0 / r;
    }
    return ld;
}

/// Closed-form Cholesky factor of L_n = A_n A_n^T, entries given by ratios of
/// the determinant sequence. Ratio form never overflows.
struct CholeskyFactor {
    int n = 0;
    std::vector<double> diag;      // [i] = [A]_{i,i}, 0-based
    std::vector<double> superdiag; // [i] = [A]_{i,i+1}
    std::vector<double> d;         // d_0..d_n (double; saturates past ~n=560)
    std::vector<double> log_d;     // log d_0..log d_n

    /// [A_n^{-1}]_{i,j}, 0-based, upper triangular.
    double inverse_entry(int i, int j) const {
        if (i > j) return 0.0;
        if (i == j) return std::exp(0.5 * (log_d[n - i - 1] - log_d[n - i]));
        const double mag =
            std::exp(log_d[n - j - 1] - 0.5 * (log_d[n - i - 1] + log_d[n - i]));
        return ((j - i) % 2 == 0) ? mag : -mag;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) a(i, i) = diag[i];
        for (int i = 0; i + 1 < n; ++i) a(i, i + 1) = superdiag[i];
        return a;
    }
    Eigen::MatrixXd dense_inverse() const {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) a(i, j) = inverse_entry(i, j);
        return a;
    }
};

inline CholeskyFactor cholesky(int n) {
    if (n < 1) throw std::invalid_argument("cholesky: n must be >= 1");
    CholeskyFactor f;
    f.n = n;
    f.d = det_sequence(std::min(n, 560));
    f.d.resize(n + 1, std::numeric_limits<double>::infinity());
    f.log_d = log_det_sequence(n);
    f.diag.resize(n);
    f.superdiag.resize(n - 1);
    for (int i = 0; i < n; ++i) {
        f.diag[i] = std::exp(0.5 * (f.log_d[n - i] - f.log_d[n - i - 1]));
        if (i + 1 < n) f.superdiag[i] = std::exp(0.5 * (f.log_d[n - i - 2] - f.log_d[n - i - 1]));
    }
    return f;
}

/// Dense L_n (the 4/1-tridiagonal with trailing 2) for oracle tests.
inline Eigen::MatrixXd l_n_dense(int n) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) l(i, i) = (i + 1 < n) ? 4.0 : 2.0;
    for (int i = 0; i + 1 < n; ++i) {
        l(i, i + 1) = 1.0;
        l(i + 1, i) = 1.0;
    }
    return l;
}

/// Spectrum of L_P = (Delta^3/6) L_n (x) I_d: interior angles theta_k, the
/// outlier root gamma_n, normalizers, eigenvalues, and the normalized
/// eigenvector entries used by the trace formulas.
class SpectralData {
public:
    int n = 0;
    double delta = 0.0;
    std::vector<double> thetas;    // theta_k, k = 1..n-1
    double gamma = 0.0;            // gamma_n (double; collapses to -2 for large n)
    double gamma_u = 0.0;          // gamma_n + 2, exponentially small but exact
    std::vector<double> beta_sq;   // beta_k^2, k = 1..n (index k-1)
    double log_beta_n_sq = 0.0;    // log beta_n^2, stable at any n
    std::vector<double> lambdas;   // lambda_k of L_P, k = 1..n (index k-1)

    double phi(double theta) const { return phi_angle(theta); }
    double r_k(int k) const { return phi_angle(thetas.at(k - 1)) / (2.0 * M_PI); }

    /// alpha_k^m: sin(m theta_k) for k < n, gamma^m - gamma^{-m} for k = n.
    /// Overflows for k = n once n log|gamma| exceeds ~709; prefer evec_entry.
    double alpha(int k, int m) const {
        check_k(k);
        if (m == 0 || m == n + 1) return 0.0;
        if (m < 0 || m > n + 1) throw std::invalid_argument("alpha: m outside 0..n+1");
        if (k < n) return std::sin(m * thetas[k - 1]);
        const double lg = std::log(2.0 - gamma_u);
        const double mag = std::exp(m * lg) - std::exp(-m * lg);
        return (m % 2 == 0) ? mag : -mag;
    }

    /// Entry m of the normalized eigenvector f_k, i.e. beta_k alpha_k^m.
    /// Stable for every n (the k = n vector is normalized in scaled form).
    double evec_entry(int k, int m) const {
        check_k(k);
        if (m == 0 || m == n + 1) return 0.0;
        if (k < n) return std::sqrt(beta_sq[k - 1]) * std::sin(m * thetas[k - 1]);
        const double lg = std::log(2.0 - gamma_u);
        const double w = std::exp((m - n) * lg) - std::exp((-m - n) * lg);
        const double val = w * inv_w_norm_;
        return (m % 2 == 0) ? val : -val;
    }

    /// [L_P^{-1}]_{mm} and [L_P^{-1}]_{m,m+1} at scalar (d = 1) level:
    /// the k-sums of the trace formula, cached once.
    double inv_diag_weight(int m) const { return inv_diag_.at(m - 1); }
    double inv_offdiag_weight(int m) const { return inv_off_.at(m - 1); }

    friend SpectralData assemble_spectrum(int n, double delta);

private:
    void check_k(int k) const {
        if (k < 1 || k > n) throw std::invalid_argument("SpectralData: k outside 1..n");
    }
    double inv_w_norm_ = 0.0;  // 1/||w|| for the scaled k = n eigenvector
    std::vector<double> inv_diag_, inv_off_;
};

inline SpectralData assemble_spectrum(int n, double delta) {
    if (n < 2) throw std::invalid_argument("assemble_spectrum: n must be >= 2");
    SpectralData sp;
    sp.n = n;
    sp.delta = delta;
    const double d3 = delta * delta * delta;

    sp.thetas.resize(n - 1);
    sp.beta_sq.resize(n);
    sp.lambdas.resize(n);
    for (int k = 1; k < n; ++k) {
        const double t = theta_k(n, k);
        sp.thetas[k - 1] = t;
        double norm_sq = 0.0;
        for (int m = 1; m <= n; ++m) {
            const double a = std::sin(m * t);
            norm_sq += a * a;
        }
        sp.beta_sq[k - 1] = 1.0 / norm_sq;
        sp.lambdas[k - 1] = (d3 / 3.0) * (2.0 + std::cos(t));
    }

    sp.gamma_u = gamma_n_plus_two(n);
    sp.gamma = -2.0 + sp.gamma_u;
    // 4 + gamma + 1/gamma = ((gamma+2)^2 - 3)/gamma, cancellation-free.
    sp.lambdas[n - 1] = (d3 / 6.0) * ((sp.gamma_u * sp.gamma_u - 3.0) / sp.gamma);
    // Scaled outlier eigenvector w_m = (-1)^m (|g|^{m-n} - |g|^{-m-n}).
    const double lg = std::log(2.0 - sp.gamma_u);
    double w_norm_sq = 0.0;
    for (int m = 1; m <= n; ++m) {
        const double w = std::exp((m - n) * lg) - std::exp((-m - n) * lg);
        w_norm_sq += w * w;
    }
    sp.inv_w_norm_ = 1.0 / std::sqrt(w_norm_sq);
    sp.log_beta_n_sq = -2.0 * n * lg - std::log(w_norm_sq);
    sp.beta_sq[n - 1] = std::exp(sp.log_beta_n_sq);

    sp.inv_diag_.assign(n, 0.0);
    sp.inv_off_.assign(n, 0.0);
    for (int k = 1; k <= n; ++k) {
        const double il = 1.0 / sp.lambdas[k - 1];
        double prev = sp.evec_entry(k, 1);
        for (int m = 1; m <= n; ++m) {
            const double next = (m + 1 <= n) ? sp.evec_entry(k, m + 1) : 0.0;
            sp.inv_diag_[m - 1] += il * prev * prev;
            sp.inv_off_[m - 1] += il * prev * next;
            prev = next;
        }
    }
    return sp;
}

/// tr(L_P^{-1/2} U L_P^{-1/2}) for symmetric block-tridiagonal U, through the
/// spectral sum of Corollary-6.5 type:
///   sum_{m,k} (beta_k^2/lambda_k)[(alpha_k^m)^2 tr[U]_mm
///                                 + 2 alpha_k^m alpha_k^{m+1} tr[U]_{m,m+1}].
inline double trace_sandwich(const SpectralData& sp, const BlockTridiagonal& u) {
    if (u.blocks() != sp.n) throw std::invalid_argument("trace_sandwich: shape mismatch");
    double acc = 0.0;
    for (int m = 1; m <= sp.n; ++m) {
        acc += sp.inv_diag_weight(m) * u.diag[m - 1].trace();
        if (m < sp.n) acc += 2.0 * sp.inv_offdiag_weight(m) * u.upper[m - 1].trace();
    }
    return acc;
}

/// xi_{k,m} = (2/45)[4(a_k^m)^2 - (a_k^{m-1})^2]
///          + (1/180) a_k^m [13 a_k^{m+1} - 7 a_k^{m-1}],  a_k^0 = a_k^{n+1} = 0.
inline double xi(const SpectralData& sp, int k, int m) {
    if (m < 1 || m > sp.n) throw std::invalid_argument("xi: m outside 1..n");
    const double am = sp.alpha(k, m);
    const double am_prev = sp.alpha(k, m - 1);
    const double am_next = sp.alpha(k, m + 1);
    return (2.0 / 45.0) * (4.0 * am * am - am_prev * am_prev) +
           (1.0 / 180.0) * am * (13.0 * am_next - 7.0 * am_prev);
}

/// tau_P evaluated from an assembled spectrum.
inline double tau_p(const SpectralData& sp) {
    double acc = 0.0;
    for (int k = 1; k < sp.n; ++k) {
        const double c = std::cos(sp.thetas[k - 1]);
        acc += sp.beta_sq[k - 1] * (4.0 + c) / (2.0 + c);
    }
    return acc / 40.0;
}

/// Finite-n spectral constant tau_P = (1/40) sum_{k<n} beta_k^2
/// (4+cos theta_k)/(2+cos theta_k); increases to tau_G.
inline double tau_p(int n) {
    if (n < 2) throw std::invalid_argument("tau_p: n must be >= 2");
    double acc = 0.0;
    for (int k = 1; k < n; ++k) {
        const double t = theta_k(n, k);
        double norm_sq = 0.0;
        for (int m = 1; m <= n; ++m) {
            const double a = std::sin(m * t);
            norm_sq += a * a;
        }
        const double c = std::cos(t);
        acc += (4.0 + c) / ((2.0 + c) * norm_sq);
    }
    return acc / 40.0;
}

}  // namespace pathweight
