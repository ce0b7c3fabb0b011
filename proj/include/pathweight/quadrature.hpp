#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace pathweight {

/// Gauss-Legendre rule on [0, length]. Nodes via Newton iteration on P_n with
/// the Chebyshev-style initial guess; exact for polynomials of degree 2n-1.
struct GaussLegendre {
    std::vector<double> nodes;
    std::vector<double> weights;

    explicit GaussLegendre(int order, double length = 1.0) {
        if (order < 1) throw std::invalid_argument("GaussLegendre: order must be >= 1");
        nodes.resize(order);
        weights.resize(order);
        const int m = (order + 1) / 2;
        for (int i = 0; i < m; ++i) {
            double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = 0.0;
                for (int j = 0; j < order; ++j) {
                    const double p2 = p1;
                    p1 = p0;
                    p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
                }
                pp = order * (x * p0 - p1) / (x * x - 1.0);
                const double dx = p0 / pp;
                x -= dx;
                if (std::fabs(dx) < 1e-15) break;
            }
            const double w = 2.0 / ((1.0 - x * x) * pp * pp);
            nodes[i] = 0.5 * length * (1.0 - x);
            nodes[order - 1 - i] = 0.5 * length * (1.0 + x);
            weights[i] = 0.5 * length * w;
            weights[order - 1 - i] = 0.5 * length * w;
        }
    }

    int order() const { return static_cast<int>(nodes.size()); }
};

}  // namespace pathweight
