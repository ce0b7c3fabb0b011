#include <catch2/catch_amalgamated.hpp>

#include "pathweight/curvature.hpp"
#include "pathweight/rng.hpp"

using namespace pathweight;

namespace {
Eigen::VectorXd random_vec(int d, std::uint64_t tag) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = keyed_normal(99, tag, 0, i, StreamTag::kTest);
    return v;
}
}  // namespace

TEST_CASE("model construction rejects positive curvature") {
    CHECK_THROWS_AS(CurvatureModel::constant_curvature(2, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(CurvatureModel::product({{2, -1.0}, {3, 0.5}}), std::invalid_argument);
    CHECK(CurvatureModel::euclidean(3).kappa() == 0.0);
    CHECK(CurvatureModel::constant_curvature(2, -2.0).kappa() == 2.0);
}

TEST_CASE("omega closed form") {
    const auto flat = CurvatureModel::euclidean(3);
    const Eigen::VectorXd a = random_vec(3, 1), b = random_vec(3, 2), c = random_vec(3, 3);
    CHECK(omega(flat, a, b, c).norm() == 0.0);

    const auto h2 = CurvatureModel::constant_curvature(2, -1.0);
    Eigen::VectorXd e1 = Eigen::Vector2d(1, 0), e2 = Eigen::Vector2d(0, 1);
    const Eigen::VectorXd r = omega(h2, e1, e2, e2);
    CHECK(r[0] == Catch::Approx(-1.0));
    CHECK(r[1] == Catch::Approx(0.0).margin(1e-15));

    // antisymmetry in the first two slots
    const auto h3 = CurvatureModel::constant_curvature(3, -1.5);
    const Eigen::VectorXd x = random_vec(3, 4), y = random_vec(3, 5), z = random_vec(3, 6);
    CHECK((omega(h3, x, y, z) + omega(h3, y, x, z)).norm() <= 1e-14);

    CHECK_THROWS_AS(omega(h2, a, b, c), std::invalid_argument);
}

TEST_CASE("ricci closed form") {
    const auto flat = CurvatureModel::euclidean(2);
    CHECK(ricci(flat, Eigen::Vector2d(1, 2)).norm() == 0.0);

    const auto h2 = CurvatureModel::constant_curvature(2, -1.0);
    const Eigen::VectorXd r2 = ricci(h2, Eigen::Vector2d(1, 0));
    CHECK(r2[0] == Catch::Approx(-1.0));

    const auto h3 = CurvatureModel::constant_curvature(3, -1.0);
    const Eigen::VectorXd r3 = ricci(h3, Eigen::Vector3d(1, 0, 0));
    CHECK(r3[0] == Catch::Approx(-2.0));

    // ricci agrees with the basis sum of omega for a product model
    const auto prod = CurvatureModel::product({{2, -1.0}, {2, -2.0}});
    const Eigen::VectorXd v = random_vec(4, 7);
    Eigen::VectorXd from_sum = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < 4; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(4);
        e[i] = 1.0;
        from_sum += omega(prod, v, e, e);
    }
    CHECK((ricci(prod, v) - from_sum).norm() <= 1e-14);
}

TEST_CASE("scalar curvature is the Ricci trace") {
    CHECK(scal(CurvatureModel::euclidean(5)) == 0.0);
    CHECK(scal(CurvatureModel::constant_curvature(2, -1.0)) == Catch::Approx(-2.0));
    const auto prod = CurvatureModel::product({{2, -1.0}, {2, -2.0}});
    CHECK(scal(prod) == Catch::Approx(-6.0));
    CHECK(scal(prod) == Catch::Approx(ricci_matrix(prod).trace()).margin(1e-12));
}

TEST_CASE("jacobi operator closed form, PSD, and trace identity") {
    const auto flat = CurvatureModel::euclidean(2);
    CHECK(jacobi_operator(flat, Eigen::Vector2d(3, 4)).norm() == 0.0);

    const auto h2 = CurvatureModel::constant_curvature(2, -1.0);
    const double a = 1.7;
    const Eigen::MatrixXd op = jacobi_operator(h2, Eigen::Vector2d(a, 0.0));
    CHECK(op(0, 0) == Catch::Approx(0.0).margin(1e-14));
    CHECK(op(1, 1) == Catch::Approx(a * a));
    CHECK(op(0, 1) == Catch::Approx(0.0).margin(1e-14));

    for (int trial = 0; trial < 200; ++trial) {
        const auto model = (trial % 2 == 0)
                               ? CurvatureModel::constant_curvature(3, -1.0)
                               : CurvatureModel::product({{2, -1.0}, {2, -0.5}});
        const Eigen::VectorXd w = random_vec(model.dim(), 100 + trial);
        const Eigen::MatrixXd aw = jacobi_operator(model, w);
        CHECK((aw - aw.transpose()).norm() <= 1e-13);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(aw);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12 * w.squaredNorm());
        // ||A(w)|| <= kappa ||w||^2
        CHECK(es.eigenvalues().maxCoeff() <= model.kappa() * w.squaredNorm() * (1 + 1e-12));
        // tr A(w) = -<Ric w, w>
        CHECK(aw.trace() == Catch::Approx(-ricci(model, w).dot(w)).margin(1e-12));
    }

    // constant-curvature trace identity in closed form: tr = (d-1)||w||^2 for K=-1
    const auto h3 = CurvatureModel::constant_curvature(3, -1.0);
    const Eigen::VectorXd w = random_vec(3, 999);
    CHECK(jacobi_operator(h3, w).trace() == Catch::Approx(2.0 * w.squaredNorm()));
}

TEST_CASE("custom curvature operator hook") {
    // a user-supplied omega reproducing the flat model
    auto flat_omega = [](const Eigen::VectorXd& a, const Eigen::VectorXd&,
                         const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(a.size()).eval(); };
    const auto custom = CurvatureModel::custom(2, flat_omega, 0.0);
    CHECK(jacobi_operator(custom, Eigen::Vector2d(1, 2)).norm() == 0.0);
    CHECK(scal(custom) == 0.0);
}
