#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pathweight/rng.hpp"

namespace pathweight {

/// Partition 0 = s_0 < s_1 < ... < s_n = 1 of the unit interval.
struct Partition {
    std::vector<double> points;  // n+1 knots, strictly increasing

    int n() const { return static_cast<int>(points.size()) - 1; }
    double spacing(int i) const { return points[i + 1] - points[i]; }
    double mesh() const {
        double m = 0.0;
        for (int i = 0; i < n(); ++i) m = std::max(m, spacing(i));
        return m;
    }
    bool is_uniform(double tol = 1e-14) const {
        const double h = 1.0 / n();
        for (int i = 0; i < n(); ++i)
            if (std::fabs(spacing(i) - h) > tol) return false;
        return true;
    }
};

inline Partition uniform_partition(int n) {
    if (n < 1) throw std::invalid_argument("uniform_partition: n must be >= 1");
    Partition p;
    p.points.resize(n + 1);
    for (int i = 0; i <= n; ++i) p.points[i] = static_cast<double>(i) / n;
    p.points[n] = 1.0;
    return p;
}

inline Partition partition_from_points(std::vector<double> points) {
    if (points.size() < 2 || points.front() != 0.0 || points.back() != 1.0)
        throw std::invalid_argument("partition: points must run from 0 to 1");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (!(points[i] > points[i - 1]))
            throw std::invalid_argument("partition: points must be strictly increasing");
    return Partition{std::move(points)};
}

/// Gaussian increments Delta_i b of a piecewise-linear Brownian approximation.
struct IncrementVector {
    Partition partition;
    int d = 0;
    std::vector<Eigen::VectorXd> deltas;  // n vectors in R^d

    int n() const { return partition.n(); }
};

/// Increment i of sample `sample` is read from the counter-based stream keyed
/// by (seed, sample, i), so the draw order never matters.
inline IncrementVector sample_increments(const Partition& partition, int d, std::uint64_t seed,
                                         std::uint64_t sample = 0) {
    if (d < 1) throw std::invalid_argument("sample_increments: d must be >= 1");
    IncrementVector inc;
    inc.partition = partition;
    inc.d = d;
    const int n = partition.n();
    inc.deltas.resize(n);
    for (int i = 0; i < n; ++i) {
        const double sd = std::sqrt(partition.spacing(i));
        Eigen::VectorXd v(d);
        for (int a = 0; a < d; ++a)
            v[a] = sd * keyed_normal(seed, sample, static_cast<std::uint32_t>(i),
                                     static_cast<std::uint32_t>(a));
        inc.deltas[i] = std::move(v);
    }
    return inc;
}

inline IncrementVector increments_from_deltas(const Partition& partition,
                                              std::vector<Eigen::VectorXd> deltas) {
    if (deltas.size() != static_cast<std::size_t>(partition.n()))
        throw std::invalid_argument("increments_from_deltas: count mismatch");
    const int d = deltas.empty() ? 0 : static_cast<int>(deltas.front().size());
    for (const auto& v : deltas)
        if (v.size() != d || !v.allFinite())
            throw std::invalid_argument("increments_from_deltas: bad increment");
    return IncrementVector{partition, d, std::move(deltas)};
}

/// b^P_s: prefix sum of increments plus linear interpolation on the segment
/// containing s. Knots evaluate to exact prefix sums.
inline Eigen::VectorXd path_eval(const IncrementVector& inc, double s) {
    if (s < 0.0 || s > 1.0) throw std::invalid_argument("path_eval: s outside [0,1]");
    const int n = inc.n();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(inc.d);
    for (int i = 0; i < n; ++i) {
        const double s0 = inc.partition.points[i];
        const double s1 = inc.partition.points[i + 1];
        if (s >= s1) {
            x += inc.deltas[i];
        } else {
            x += inc.deltas[i] * ((s - s0) / (s1 - s0));
            break;
        }
    }
    return x;
}

/// Path energy (1/2) sum ||Delta_i b||^2 / Delta_i s.
inline double energy(const IncrementVector& inc) {
    double e = 0.0;
    for (int i = 0; i < inc.n(); ++i)
        e += inc.deltas[i].squaredNorm() / inc.partition.spacing(i);
    return 0.5 * e;
}

/// Membership in H^eps: every increment norm <= eps (closed condition).
inline bool in_h_epsilon(const IncrementVector& inc, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("in_h_epsilon: eps must be positive");
    for (const auto& v : inc.deltas)
        if (v.norm() > eps) return false;
    return true;
}

}  // namespace pathweight
