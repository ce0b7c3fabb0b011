#include <catch2/catch_amalgamated.hpp>

#include "pathweight/jacobi.hpp"
#include "pathweight/rng.hpp"

using namespace pathweight;

namespace {
Eigen::MatrixXd random_psd(int d, std::uint64_t tag, double scale = 1.0) {
    Eigen::MatrixXd m(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) m(r, c) = keyed_normal(5, tag, r, c, StreamTag::kTest);
    return Eigen::MatrixXd(scale * m * m.transpose());
}
}  // namespace

TEST_CASE("closed form: flat and isotropic segments") {
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
    const JacobiSegment flat = solve_segment_const(zero, 1.0);
    CHECK((flat.S(0.7) - 0.7 * Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
    CHECK((flat.C(0.7) - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);

    const JacobiSegment iso = solve_segment_const(Eigen::MatrixXd::Identity(2, 2), 1.0);
    CHECK(iso.s_end(0, 0) == Catch::Approx(std::sinh(1.0)).epsilon(1e-14));
    CHECK(iso.s_end(0, 1) == Catch::Approx(0.0).margin(1e-15));

    // H^2 rank-structure case: A0 = diag(0, a^2) for w along e1
    const double a = 1.3;
    Eigen::MatrixXd h2 = Eigen::MatrixXd::Zero(2, 2);
    h2(1, 1) = a * a;
    const JacobiSegment seg = solve_segment_const(h2, 1.0);
    CHECK(seg.s_end(0, 0) == Catch::Approx(1.0));
    CHECK(seg.s_end(1, 1) == Catch::Approx(std::sinh(a) / a).epsilon(1e-14));
    CHECK(seg.c_end(1, 1) == Catch::Approx(std::cosh(a)).epsilon(1e-14));

    CHECK_THROWS_AS(solve_segment_const(-Eigen::MatrixXd::Identity(2, 2), 1.0),
                    std::invalid_argument);
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, -0.5, 1.0;
    CHECK_THROWS_AS(solve_segment_const(asym, 1.0), std::invalid_argument);
}

TEST_CASE("series branch of sinh(sqrt(l)s)/sqrt(l) matches the direct branch") {
    // straddle the switch at l s^2 = 1e-8
    for (double x : {0.5e-8, 0.99e-8, 1.01e-8, 2e-8}) {
        const double s = 0.37;
        const double l = x / (s * s);
        const double direct = std::sinh(std::sqrt(l) * s) / std::sqrt(l);
        CHECK(detail::sinhc_scaled(l, s) == Catch::Approx(direct).epsilon(1e-13));
        CHECK(detail::cosh_scaled(l, s) ==
              Catch::Approx(std::cosh(std::sqrt(l) * s)).epsilon(1e-13));
    }
}

TEST_CASE("numeric integrator agrees with closed forms") {
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
    const JacobiSegment flat = solve_segment_numeric([&](double) { return zero; }, 1.0, 16);
    CHECK((flat.s_end - Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-12);

    Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(2, 2);
    a0(1, 1) = 1.0;
    const JacobiSegment exact = solve_segment_const(a0, 1.0);
    const JacobiSegment num = solve_segment_numeric([&](double) { return a0; }, 1.0, 64);
    CHECK((exact.s_end - num.s_end).operatorNorm() <= 1e-8);
    CHECK((exact.c_end - num.c_end).operatorNorm() <= 1e-8);

    CHECK_THROWS_AS(solve_segment_numeric([&](double) { return a0; }, 1.0, 3),
                    std::invalid_argument);
}

TEST_CASE("numeric integrator is fourth order") {
    const Eigen::MatrixXd a0 = random_psd(3, 17);
    const JacobiSegment exact = solve_segment_const(a0, 1.0);
    double err_prev = 0.0;
    for (int pass = 0; pass < 2; ++pass) {
        const int steps = pass == 0 ? 16 : 32;
        const JacobiSegment num = solve_segment_numeric([&](double) { return a0; }, 1.0, steps);
        const double err = (exact.s_end - num.s_end).operatorNorm();
        if (pass == 1) {
            // halving the step reduces the error about 16x
            CHECK(err_prev / err >= 12.0);
            CHECK(err_prev / err <= 20.0);
        }
        err_prev = err;
    }
}

TEST_CASE("numeric evaluation at interior points tracks the closed form") {
    // tolerance scales with ||A||; this instance has ||A|| ~ 5
    const Eigen::MatrixXd a0 = random_psd(2, 23);
    const JacobiSegment exact = solve_segment_const(a0, 0.8);
    const JacobiSegment num = solve_segment_numeric([&](double) { return a0; }, 0.8, 64);
    for (double s : {0.11, 0.4, 0.63, 0.8}) {
        CHECK((exact.S(s) - num.S(s)).operatorNorm() <= 1e-7);
        CHECK((exact.C(s) - num.C(s)).operatorNorm() <= 1e-7);
    }
}

TEST_CASE("transfer operator and bridge") {
    const int d = 2;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(d, d);
    const double delta = 0.5;

    SECTION("both segments flat: F = I, V(s) = (delta - s) I") {
        const JacobiSegment f1 = solve_segment_const(zero, delta);
        const TransferData t = transfer(f1, f1);
        CHECK((t.f - Eigen::MatrixXd::Identity(d, d)).norm() <= 1e-14);
        for (double s : {0.0, 0.2, 0.5})
            CHECK((t.v_at(s) - (delta - s) * Eigen::MatrixXd::Identity(d, d)).norm() <= 1e-13);
    }

    SECTION("flat left, isotropic right: scalar closed form") {
        const double a = 1.4;
        const JacobiSegment left = solve_segment_const(zero, delta);
        const JacobiSegment right =
            solve_segment_const(a * a * Eigen::MatrixXd::Identity(d, d), delta);
        const TransferData t = transfer(left, right);
        const double expected = std::cosh(a * delta) * (a / std::sinh(a * delta)) * delta;
        CHECK(t.f(0, 0) == Catch::Approx(expected).epsilon(1e-13));
        CHECK(t.f(0, 1) == Catch::Approx(0.0).margin(1e-14));
        CHECK(t.v_at(delta).operatorNorm() <= 1e-9);
    }

    SECTION("random PSD pair: V(delta) = 0 and initial conditions") {
        for (int trial = 0; trial < 25; ++trial) {
            const JacobiSegment left = solve_segment_const(random_psd(3, 40 + trial), delta);
            const JacobiSegment right = solve_segment_const(random_psd(3, 80 + trial), delta);
            const TransferData t = transfer(left, right);
            CHECK(t.v_at(delta).operatorNorm() <= 1e-9);
            CHECK((t.v_at(0.0) - left.s_end).operatorNorm() <= 1e-12);
            // V'(0) = -F via a one-sided difference
            const double h = 1e-6;
            const Eigen::MatrixXd vp = (t.v_at(h) - t.v_at(0.0)) / h;
            CHECK((vp + t.f).operatorNorm() <= 1e-5 * (1.0 + t.f.operatorNorm()));
        }
    }
}

TEST_CASE("Wronskian identity for the closed form") {
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 2 + trial % 3;
        const JacobiSegment seg = solve_segment_const(random_psd(d, 200 + trial), 0.9);
        for (double s : {0.1, 0.33, 0.7, 0.9}) {
            const Eigen::MatrixXd w = seg.C(s).transpose() * seg.S_prime(s) -
                                      seg.C_prime(s).transpose() * seg.S(s);
            CHECK((w - Eigen::MatrixXd::Identity(d, d)).operatorNorm() <= 1e-9);
        }
    }
}

TEST_CASE("Wronskian identity for the numeric backend") {
    const Eigen::MatrixXd a0 = random_psd(2, 300);
    const JacobiSegment seg = solve_segment_numeric([&](double) { return a0; }, 0.7, 64);
    for (double s : {0.2, 0.5, 0.7}) {
        const Eigen::MatrixXd w = seg.C(s).transpose() * seg.S_prime(s) -
                                  seg.C_prime(s).transpose() * seg.S(s);
        CHECK((w - Eigen::MatrixXd::Identity(2, 2)).operatorNorm() <= 1e-9);
    }
}

TEST_CASE("sigma_min(S(s)) >= s on random PSD instances") {
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = 2 + trial % 2;
        const double delta = 0.2 + 0.001 * trial;
        const JacobiSegment seg = solve_segment_const(random_psd(d, 1000 + trial), delta);
        for (double frac : {0.3, 1.0}) {
            const double s = frac * delta;
            Eigen::JacobiSVD<Eigen::MatrixXd> svd(seg.S(s));
            CHECK(svd.singularValues().minCoeff() >= s * (1.0 - 1e-9));
        }
    }
}

TEST_CASE("segment invariants: S_end inverse and K bound") {
    const Eigen::MatrixXd a0 = random_psd(3, 7000);
    const JacobiSegment seg = solve_segment_const(a0, 0.6);
    CHECK((seg.s_end_inv * seg.s_end - Eigen::MatrixXd::Identity(3, 3)).operatorNorm() <= 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a0);
    CHECK(seg.k_bound == Catch::Approx(es.eigenvalues().maxCoeff()));
}

TEST_CASE("linear bound: ||S(s) - sI|| <= s (cosh(sqrt(K) delta) - 1)") {
    for (int trial = 0; trial < 50; ++trial) {
        const double delta = 0.4;
        const JacobiSegment seg = solve_segment_const(random_psd(2, 2000 + trial), delta);
        for (double s : {0.1, 0.25, 0.4}) {
            const double lhs =
                (seg.S(s) - s * Eigen::MatrixXd::Identity(2, 2)).operatorNorm();
            const double rhs = s * (std::cosh(std::sqrt(seg.k_bound) * delta) - 1.0);
            CHECK(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
        }
    }
}

TEST_CASE("Green-function bound on the bridge") {
    // ||V(s) - linear interpolant|| <= s(1-s/delta){||V(0)|| K delta cosh(sqrt(K) delta)
    //                                               + ||V'(0)|| (cosh(sqrt(K) delta) - 1)}
    for (int trial = 0; trial < 30; ++trial) {
        const double delta = 0.5;
        const JacobiSegment left = solve_segment_const(random_psd(2, 3000 + trial), delta);
        const JacobiSegment right = solve_segment_const(random_psd(2, 3100 + trial), delta);
        const TransferData t = transfer(left, right);
        const double k = right.k_bound;  // V solves on the right segment
        const double v0 = t.s_left_end.operatorNorm();
        const double vp0 = t.f.operatorNorm();
        for (double s : {0.1, 0.27, 0.44}) {
            const Eigen::MatrixXd interp =
                (1.0 - s / delta) * t.v_at(0.0) + (s / delta) * t.v_at(delta);
            const double lhs = (t.v_at(s) - interp).operatorNorm();
            const double ch = std::cosh(std::sqrt(k) * delta);
            const double rhs = s * (1.0 - s / delta) * (v0 * k * delta * ch + vp0 * (ch - 1.0));
            CHECK(lhs <= rhs * (1.0 + 1e-10) + 1e-15);
        }
    }
}

TEST_CASE("Taylor approximants and truncation bounds") {
    SECTION("flat: approximants exact") {
        const TaylorSegment t = taylor_segment(Eigen::MatrixXd::Zero(2, 2), 0.5);
        CHECK((t.S(0.3) - 0.3 * Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
        CHECK(t.s_bound(0.3) == 0.0);
        CHECK(t.c_bound(0.3) == 0.0);
    }

    SECTION("H2-type operator at delta = 0.1 against the exact solution") {
        Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(2, 2);
        a0(1, 1) = 1.0;
        const double delta = 0.1;
        const TaylorSegment t = taylor_segment(a0, delta);
        const JacobiSegment exact = solve_segment_const(a0, delta);
        const double s_err = (exact.s_end - t.S(delta)).operatorNorm();
        const double c_err = (exact.c_end - t.C(delta)).operatorNorm();
        // scalar constant coefficients attain the bound exactly
        CHECK(s_err <= t.s_bound(delta) * (1.0 + 1e-9) + 1e-18);
        CHECK(c_err <= t.c_bound(delta) * (1.0 + 1e-9) + 1e-18);
        CHECK(s_err >= 0.5 * t.s_bound(delta));
    }

    SECTION("bound shrinks by at least 4x when delta halves") {
        const Eigen::MatrixXd a0 = random_psd(2, 4000);
        const TaylorSegment t = taylor_segment(a0, 0.4);
        CHECK(t.s_bound(0.2) * 4.0 <= t.s_bound(0.4));
        CHECK(t.c_bound(0.2) * 4.0 <= t.c_bound(0.4));
    }

    SECTION("random PSD instances respect the bounds") {
        for (int trial = 0; trial < 40; ++trial) {
            const Eigen::MatrixXd a0 = random_psd(3, 5000 + trial);
            const double delta = 0.15;
            const TaylorSegment t = taylor_segment(a0, delta);
            const JacobiSegment exact = solve_segment_const(a0, delta);
            CHECK((exact.s_end - t.S(delta)).operatorNorm() <=
                  t.s_bound(delta) * (1.0 + 1e-9));
            CHECK((exact.c_end - t.C(delta)).operatorNorm() <=
                  t.c_bound(delta) * (1.0 + 1e-9));
        }
    }

    SECTION("bridge expansion matches the exact bridge to third order") {
        const Eigen::MatrixXd ai = 0.3 * random_psd(2, 6000);
        const Eigen::MatrixXd aj = 0.3 * random_psd(2, 6001);
        double err_prev = -1.0;
        for (double delta : {0.2, 0.1}) {
            const JacobiSegment left = solve_segment_const(ai, delta);
            const JacobiSegment right = solve_segment_const(aj, delta);
            const TransferData t = transfer(left, right);
            double err = 0.0;
            for (double frac : {0.25, 0.5, 0.75}) {
                const double s = frac * delta;
                err = std::max(err, (t.v_at(s) - taylor_bridge(ai, aj, delta, s)).operatorNorm());
            }
            if (err_prev > 0.0) CHECK(err_prev / err >= 8.0);
            err_prev = err;
        }
    }
}
