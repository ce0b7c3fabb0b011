#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "pathweight/curvature.hpp"
#include "pathweight/partition.hpp"

namespace pathweight {

/// Piecewise-geodesic path obtained by developing a flat piecewise-linear
/// path into the model manifold. Hyperbolic factors use hyperboloid
/// coordinates (one extra ambient coordinate per factor, Minkowski-normalized
/// to <x,x> = -1/|K|); Euclidean factors are their own coordinates. Frames
/// are parallel transports of the initial frame, stored as ambient x d.
struct ManifoldPath {
    CurvatureModel model = CurvatureModel::euclidean(1);
    std::vector<Eigen::VectorXd> knots;   // n+1 points, ambient coordinates
    std::vector<Eigen::MatrixXd> frames;  // n+1 isometries R^d -> tangent
    IncrementVector increments;

    int n() const { return static_cast<int>(knots.size()) - 1; }
    int ambient_dim() const { return knots.empty() ? 0 : static_cast<int>(knots.front().size()); }
};

namespace detail {

struct FactorLayout {
    int flat_offset;     // offset into R^d
    int ambient_offset;  // offset into ambient coordinates
    int dim;
    double curvature;
    int ambient_dim() const { return curvature < 0.0 ? dim + 1 : dim; }
};

inline std::vector<FactorLayout> factor_layout(const CurvatureModel& model) {
    std::vector<FactorLayout> out;
    int fo = 0, ao = 0;
    for (const auto& f : model.factors()) {
        out.push_back({fo, ao, f.dim, f.curvature});
        fo += f.dim;
        ao += out.back().ambient_dim();
    }
    return out;
}

inline int ambient_dim(const CurvatureModel& model) {
    int a = 0;
    for (const auto& l : factor_layout(model)) a += l.ambient_dim();
    return a;
}

/// Minkowski inner product on one hyperbolic factor: -x0 y0 + sum xi yi.
inline double minkowski(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    double s = -x[0] * y[0];
    for (int i = 1; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

/// Orthonormalize the tangent frame at x against drift: project each column
/// to the tangent space, then Gram-Schmidt in the Minkowski metric.
inline void renormalize_frame(const Eigen::VectorXd& x, double kappa0, Eigen::MatrixXd& frame) {
    for (int a = 0; a < frame.cols(); ++a) {
        Eigen::VectorXd u = frame.col(a);
        u += kappa0 * minkowski(u, x) * x;  // tangency: <u,x> = 0
        for (int b = 0; b < a; ++b) u -= minkowski(u, frame.col(b)) * frame.col(b);
        frame.col(a) = u / std::sqrt(minkowski(u, u));
    }
}

}  // namespace detail

/// Cartan development: shoot a geodesic of length ||Delta_i b|| in the frame
/// direction of each increment, parallel-transporting the frame along it.
/// Exact per segment (hyperboloid closed forms), no ODE integration.
inline ManifoldPath develop(const IncrementVector& inc, const CurvatureModel& model,
                            bool renormalize = true) {
    if (inc.d != model.dim()) throw std::invalid_argument("develop: dimension mismatch");
    if (model.has_custom_omega())
        throw std::invalid_argument("develop: custom curvature models are not developable");
    const auto layout = detail::factor_layout(model);
    const int amb = detail::ambient_dim(model);
    const int n = inc.n();

    ManifoldPath path;
    path.model = model;
    path.increments = inc;
    path.knots.reserve(n + 1);
    path.frames.reserve(n + 1);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(amb);
    Eigen::MatrixXd frame = Eigen::MatrixXd::Zero(amb, model.dim());
    for (const auto& l : layout) {
        if (l.curvature < 0.0) {
            x[l.ambient_offset] = 1.0 / std::sqrt(-l.curvature);  // base point o
            for (int a = 0; a < l.dim; ++a) frame(l.ambient_offset + 1 + a, l.flat_offset + a) = 1.0;
        } else {
            for (int a = 0; a < l.dim; ++a) frame(l.ambient_offset + a, l.flat_offset + a) = 1.0;
        }
    }
    path.knots.push_back(x);
    path.frames.push_back(frame);

    for (int i = 0; i < n; ++i) {
        for (const auto& l : layout) {
            const Eigen::VectorXd db = inc.deltas[i].segment(l.flat_offset, l.dim);
            auto xf = x.segment(l.ambient_offset, l.ambient_dim());
            auto ff = frame.block(l.ambient_offset, l.flat_offset, l.ambient_dim(), l.dim);
            if (l.curvature == 0.0) {
                xf += db;  // flat factor: identity development
                continue;
            }
            const double kappa0 = -l.curvature;
            const double rk = std::sqrt(kappa0);
            const double len = db.norm();
            if (len == 0.0) continue;
            const Eigen::VectorXd v = (ff * db) / len;  // unit tangent, Minkowski metric
            const Eigen::VectorXd x0 = xf;
            const double ch = std::cosh(rk * len), sh = std::sinh(rk * len);
            xf = ch * x0 + (sh / rk) * v;
            // parallel transport: v -> velocity at the endpoint, the
            // Minkowski-orthogonal complement is carried unchanged
            const Eigen::VectorXd v_end = (sh * rk) * x0 + ch * v;
            for (int a = 0; a < l.dim; ++a) {
                const double c = detail::minkowski(ff.col(a), v);
                ff.col(a) += c * (v_end - v);
            }
            if (renormalize) {
                Eigen::MatrixXd f = ff;
                detail::renormalize_frame(xf, kappa0, f);
                ff = f;
            }
        }
        path.knots.push_back(x);
        path.frames.push_back(frame);
    }
    return path;
}

/// Inverse of develop: read each increment off the geodesic joining
/// consecutive knots through the transported frame.
inline IncrementVector antidevelop(const ManifoldPath& path) {
    const auto layout = detail::factor_layout(path.model);
    const int n = path.n();
    const int d = path.model.dim();

    for (const auto& l : layout) {
        if (l.curvature >= 0.0) continue;
        const double kappa0 = -l.curvature;
        for (int i = 0; i <= n; ++i) {
            const auto ff = path.frames[i].block(l.ambient_offset, l.flat_offset,
                                                 l.ambient_dim(), l.dim);
            const auto xf = path.knots[i].segment(l.ambient_offset, l.ambient_dim());
            for (int a = 0; a < l.dim; ++a) {
                for (int b = a; b < l.dim; ++b) {
                    const double g = detail::minkowski(ff.col(a), ff.col(b));
                    if (std::fabs(g - (a == b ? 1.0 : 0.0)) > 1e-8)
                        throw std::invalid_argument("antidevelop: frame not orthonormal");
                }
                if (std::fabs(detail::minkowski(ff.col(a), xf)) * kappa0 > 1e-8)
                    throw std::invalid_argument("antidevelop: frame not tangent");
            }
        }
    }

    std::vector<Eigen::VectorXd> deltas(n, Eigen::VectorXd::Zero(d));
    for (int i = 0; i < n; ++i) {
        for (const auto& l : layout) {
            const auto x0 = path.knots[i].segment(l.ambient_offset, l.ambient_dim());
            const auto x1 = path.knots[i + 1].segment(l.ambient_offset, l.ambient_dim());
            const auto ff = path.frames[i].block(l.ambient_offset, l.flat_offset,
                                                 l.ambient_dim(), l.dim);
            if (l.curvature == 0.0) {
                deltas[i].segment(l.flat_offset, l.dim) = x1 - x0;
                continue;
            }
            const double kappa0 = -l.curvature;
            const double rk = std::sqrt(kappa0);
            const double c = -kappa0 * detail::minkowski(x0, x1);  // cosh(rk * len)
            const double len = std::acosh(std::max(c, 1.0)) / rk;
            if (len == 0.0) continue;
            // unit initial velocity of the connecting geodesic
            const Eigen::VectorXd v =
                (x1 - std::cosh(rk * len) * x0) * (rk / std::sinh(rk * len));
            for (int a = 0; a < l.dim; ++a)
                deltas[i][l.flat_offset + a] = len * detail::minkowski(v, ff.col(a));
        }
    }
    return increments_from_deltas(path.increments.partition, std::move(deltas));
}

/// Scal at knots 0..n-1 (constant for every supported model).
inline std::vector<double> scal_along(const ManifoldPath& path) {
    return std::vector<double>(path.n(), scal(path.model));
}

/// CSV export: (i, s_i, x_0..x_{amb-1}, frame column-major).
inline void export_path_csv(const ManifoldPath& path, std::ostream& os) {
    const int amb = path.ambient_dim();
    const int d = path.model.dim();
    os << "i,s";
    for (int j = 0; j < amb; ++j) os << ",x" << j;
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < amb; ++r) os << ",u" << r << "_" << c;
    os << "\n";
    char buf[64];
    for (int i = 0; i <= path.n(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g", i, path.increments.partition.points[i]);
        os << buf;
        for (int j = 0; j < amb; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.17g", path.knots[i][j]);
            os << buf;
        }
        for (int c = 0; c < d; ++c)
            for (int r = 0; r < amb; ++r) {
                std::snprintf(buf, sizeof(buf), ",%.17g", path.frames[i](r, c));
                os << buf;
            }
        os << "\n";
    }
}

/// Geodesic distance from the base point to the path endpoint.
inline double endpoint_radius(const ManifoldPath& path) {
    const auto layout = detail::factor_layout(path.model);
    double sq = 0.0;
    for (const auto& l : layout) {
        const auto x0 = path.knots.front().segment(l.ambient_offset, l.ambient_dim());
        const auto x1 = path.knots.back().segment(l.ambient_offset, l.ambient_dim());
        if (l.curvature == 0.0) {
            sq += (x1 - x0).squaredNorm();
        } else {
            const double kappa0 = -l.curvature;
            const double c = -kappa0 * detail::minkowski(x0, x1);
            const double len = std::acosh(std::max(c, 1.0)) / std::sqrt(kappa0);
            sq += len * len;
        }
    }
    return std::sqrt(sq);
}

}  // namespace pathweight
