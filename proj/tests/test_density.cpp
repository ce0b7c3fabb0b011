#include <catch2/catch_amalgamated.hpp>

#include "pathweight/density.hpp"

using namespace pathweight;

namespace {
IncrementVector scaled_increments(int n, int d, std::uint64_t seed, double cap) {
    IncrementVector inc = sample_increments(uniform_partition(n), d, seed);
    for (auto& v : inc.deltas) {
        const double r = v.norm();
        if (r > cap) v *= cap / r;
    }
    return inc;
}
}  // namespace

TEST_CASE("rho from log determinants") {
    SECTION("G = L gives exactly 1") {
        const auto l = flat_gram(5, 0.2, 2);
        const RhoResult r = rho_logdet(l, l);
        CHECK(r.rho == 1.0);
        CHECK(r.log_rho == 0.0);
    }

    SECTION("flat pipeline end-to-end is 1 for any increments") {
        const auto flat = CurvatureModel::euclidean(2);
        for (int n : {1, 8, 64}) {
            const double log_det_l = flat_gram(n, 1.0 / n, 2).log_det();
            for (int j = 0; j < 50; ++j) {
                const IncrementVector inc =
                    sample_increments(uniform_partition(n), 2, 17, j);
                const RhoResult r = rho_for_increments(flat, inc, log_det_l);
                CHECK(std::fabs(r.rho - 1.0) <= 1e-10);
            }
        }
    }

    SECTION("single-segment analytic value on H2") {
        const auto h2 = CurvatureModel::constant_curvature(2, -1.0);
        std::vector<Eigen::VectorXd> deltas(1);
        deltas[0] = Eigen::Vector2d(1.0, 0.0);
        const IncrementVector inc = increments_from_deltas(uniform_partition(1), deltas);
        const DensitySample s = compute_density_sample(h2, inc);
        const double oracle = std::sqrt(3.0 * (std::sinh(2.0) / 4.0 - 0.5));
        CHECK(s.rho == Catch::Approx(oracle).margin(1e-9));
    }

    SECTION("non-positive-definite input raises the distinct error") {
        auto g = flat_gram(3, 0.25, 1);
        g.diag[1](0, 0) = -1.0;
        CHECK_THROWS_AS(rho_logdet(g, flat_gram(3, 0.25, 1)), FactorizationError);
    }
}

TEST_CASE("rho is invariant under a global rotation of the increments") {
    const auto h2 = CurvatureModel::constant_curvature(2, -1.0);
    const int n = 6;
    const double log_det_l = flat_gram(n, 1.0 / n, 2).log_det();
    Eigen::Matrix2d rot;
    const double th = 1.234;
    rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    for (int j = 0; j < 10; ++j) {
        const IncrementVector inc = sample_increments(uniform_partition(n), 2, 23, j);
        std::vector<Eigen::VectorXd> rotated;
        for (const auto& v : inc.deltas) rotated.push_back(rot * v);
        const IncrementVector inc_rot = increments_from_deltas(inc.partition, rotated);
        const double a = rho_for_increments(h2, inc, log_det_l).rho;
        const double b = rho_for_increments(h2, inc_rot, log_det_l).rho;
        CHECK(a == Catch::Approx(b).epsilon(1e-12));
    }
}

TEST_CASE("exponential decomposition") {
    SECTION("flat model: all terms zero, reconstruction 1") {
        const int n = 6, d = 2;
        const double delta = 1.0 / n;
        const SpectralData sp = assemble_spectrum(n, delta);
        const auto l = flat_gram(n, delta, d);
        const auto zero = BlockTridiagonal::zero(n, d);
        const DecompositionResult dec = rho_exp_decomposition(sp, zero, zero, zero, l);
        REQUIRE(dec.ok);
        CHECK(dec.x_p == 0.0);
        CHECK(dec.trace_e_term == 0.0);
        CHECK(dec.psi2 == 0.0);
        CHECK(dec.reconstruction == Catch::Approx(1.0).margin(1e-14));
    }

    SECTION("H2 small increments: reconstruction matches log det, Psi2 bounded") {
        const auto h2 = CurvatureModel::constant_curvature(2, -1.0);
        const int n = 8, d = 2;
        const double delta = 1.0 / n;
        const SpectralData sp = assemble_spectrum(n, delta);
        const auto l = flat_gram(n, delta, d);
        int decomposable = 0;
        for (int j = 0; j < 100; ++j) {
            const IncrementVector inc = scaled_increments(n, d, 29 + j, 0.2);
            const auto segs = jacobi_segments(h2, inc);
            const auto g = gram_blocks(segs, jacobi_transfers(segs));
            const auto r = remainder(g, l);
            std::vector<Eigen::MatrixXd> ops;
            for (const auto& s : segs) ops.push_back(s.a0);
            const auto u = u_matrix(ops, delta);
            const auto e = epsilon_matrix(r, u);
            const DecompositionResult dec = rho_exp_decomposition(sp, u, e, r, l);
            REQUIRE(dec.ok);
            ++decomposable;
            const RhoResult rr = rho_logdet(g, l);
            CHECK(std::fabs(dec.reconstruction - rr.rho) <= 1e-10 * rr.rho);
            CHECK(std::fabs(dec.psi2) <= dec.psi2_bound * (1.0 + 1e-12));
        }
        CHECK(decomposable == 100);
    }

    SECTION("norm >= 1 is a valid flagged outcome") {
        const auto h2 = CurvatureModel::constant_curvature(2, -1.0);
        const int n = 4, d = 2;
        const double delta = 1.0 / n;
        const SpectralData sp = assemble_spectrum(n, delta);
        const auto l = flat_gram(n, delta, d);
        // huge increments push the whitened remainder past norm 1
        std::vector<Eigen::VectorXd> big(n, Eigen::Vector2d(3.0, 0.0));
        const IncrementVector inc = increments_from_deltas(uniform_partition(n), big);
        const auto segs = jacobi_segments(h2, inc);
        const auto g = gram_blocks(segs, jacobi_transfers(segs));
        const auto r = remainder(g, l);
        std::vector<Eigen::MatrixXd> ops;
        for (const auto& s : segs) ops.push_back(s.a0);
        const auto u = u_matrix(ops, delta);
        const DecompositionResult dec =
            rho_exp_decomposition(sp, u, epsilon_matrix(r, u), r, l);
        CHECK_FALSE(dec.ok);
        CHECK(std::isnan(dec.reconstruction));
        // the sample is still usable through the log-det route
        CHECK(rho_logdet(g, l).rho > 0.0);
    }
}

TEST_CASE("Y functional") {
    const auto h2 = CurvatureModel::constant_curvature(2, -1.0);

    SECTION("flat model gives zero") {
        const int n = 8;
        const SpectralData sp = assemble_spectrum(n, 1.0 / n);
        const IncrementVector inc = sample_increments(uniform_partition(n), 2, 31);
        const YFunctional y = y_functional(sp, CurvatureModel::euclidean(2), inc);
        CHECK(y.y_p == 0.0);
        CHECK(y.boundary == 0.0);
    }

    SECTION("equal-norm increments collapse to tau_P (n-3) v") {
        const int n = 10;
        const SpectralData sp = assemble_spectrum(n, 1.0 / n);
        const double v = 0.04;  // ||Delta_m b||^2
        std::vector<Eigen::VectorXd> deltas;
        for (int i = 0; i < n; ++i) {
            Eigen::Vector2d w(std::cos(0.3 * i), std::sin(0.3 * i));
            deltas.push_back(std::sqrt(v) * w);
        }
        const IncrementVector inc = increments_from_deltas(uniform_partition(n), deltas);
        const YFunctional y = y_functional(sp, h2, inc);
        // <Ric w, w> = -||w||^2 on H2, so Y_P = tau_P (n-3) v
        CHECK(y.y_p == Catch::Approx(tau_p(sp) * (n - 3) * v).epsilon(1e-12));
        CHECK(y.interior_nonempty);
    }

    SECTION("n < 4 has an empty interior sum") {
        const int n = 3;
        const SpectralData sp = assemble_spectrum(n, 1.0 / n);
        const IncrementVector inc = sample_increments(uniform_partition(n), 2, 37);
        const YFunctional y = y_functional(sp, h2, inc);
        CHECK(y.y_p == 0.0);
        CHECK_FALSE(y.interior_nonempty);
    }

    SECTION("X_P - (Y_P + boundary) shrinks with n in the mean") {
        double prev = -1.0;
        for (int n : {8, 32}) {
            const double delta = 1.0 / n;
            const SpectralData sp = assemble_spectrum(n, delta);
            double acc = 0.0;
            const int reps = 150;
            for (int j = 0; j < reps; ++j) {
                const IncrementVector inc =
                    sample_increments(uniform_partition(n), 2, 41, j);
                const DensitySample s = compute_density_sample(h2, inc, &sp);
                acc += std::fabs(s.x_p - (s.y_p + s.boundary));
            }
            acc /= reps;
            if (prev > 0.0) CHECK(acc <= 0.8 * prev);
            prev = acc;
        }
    }
}

TEST_CASE("path statistics") {
    const auto flat = CurvatureModel::euclidean(2);
    const auto h2 = CurvatureModel::constant_curvature(2, -1.0);
    const int n = 12;
    const IncrementVector inc = sample_increments(uniform_partition(n), 2, 43);

    const FancyStatistics f0 = fancy_statistics(flat, inc);
    CHECK(f0.fancy_r == 0.0);
    CHECK(f0.fancy_s == 0.0);

    const FancyStatistics f1 = fancy_statistics(h2, inc);
    CHECK(f1.fancy_s == Catch::Approx(-2.0).margin(1e-14));
    double sum_sq = 0.0;
    for (const auto& v : inc.deltas) sum_sq += v.squaredNorm();
    CHECK(f1.fancy_r == Catch::Approx(-sum_sq).epsilon(1e-13));

    // tr(Ric) = Scal consistency hook
    CHECK(ricci_matrix(h2).trace() == Catch::Approx(scal(h2)).margin(1e-14));

    const ManifoldPath path = develop(inc, h2);
    const FancyStatistics f2 = fancy_statistics(h2, inc, &path);
    CHECK(f2.fancy_r == f1.fancy_r);
}

TEST_CASE("full density sample record") {
    const auto h2 = CurvatureModel::constant_curvature(2, -1.0);
    const int n = 8;
    const SpectralData sp = assemble_spectrum(n, 1.0 / n);
    const IncrementVector inc = scaled_increments(n, 2, 47, 0.2);
    const DensitySample s = compute_density_sample(h2, inc, &sp);
    CHECK(s.rho == Catch::Approx(std::exp(s.log_rho)).epsilon(1e-15));
    CHECK(s.rho > 0.0);
    CHECK(s.decomposition_ok);
    CHECK(std::isfinite(s.psi2_bound));
    CHECK(s.x_p != 0.0);
    CHECK(s.fancy_s == Catch::Approx(-2.0).margin(1e-14));
}
