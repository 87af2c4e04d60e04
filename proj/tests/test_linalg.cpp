#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "resmin/forms.hpp"
#include "resmin/linalg.hpp"

using namespace resmin;

namespace {

SparseMat sparse_from(const Eigen::MatrixXd& dense) {
    SparseMat s(dense.rows(), dense.cols());
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < dense.rows(); ++i)
        for (int j = 0; j < dense.cols(); ++j)
            if (dense(i, j) != 0.0) t.emplace_back(i, j, dense(i, j));
    s.setFromTriplets(t.begin(), t.end());
    return s;
}

SparseMat identity(int n) {
    SparseMat s(n, n);
    s.setIdentity();
    return s;
}

} // namespace

TEST_CASE("solve_spd: identity, hand 2x2, zero rhs") {
    Eigen::VectorXd b(3);
    b << 1.5, -2.0, 0.25;
    CHECK((solve_spd(identity(3), b) - b).norm() == 0.0);

    Eigen::MatrixXd a(2, 2);
    a << 2, 1, 1, 2;
    Eigen::VectorXd rhs(2);
    rhs << 3, 3;
    const Eigen::VectorXd x = solve_spd(sparse_from(a), rhs);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-13));

    CHECK(solve_spd(sparse_from(a), Eigen::VectorXd::Zero(2)).norm() == 0.0);
}

TEST_CASE("solve_spd: rejects indefinite matrices") {
    Eigen::MatrixXd a(2, 2);
    a << 1, 0, 0, -1;
    Eigen::VectorXd b(2);
    b << 1, 1;
    CHECK_THROWS_AS(solve_spd(sparse_from(a), b), SolverError);
}

TEST_CASE("solve_square: identity, triangular hand case, zero rhs, singular") {
    Eigen::VectorXd b(4);
    b << 1, 2, 3, 4;
    CHECK((solve_square(identity(4), b) - b).norm() == 0.0);

    Eigen::MatrixXd a(3, 3);
    a << 2, 1, -1, 0, 3, 2, 0, 0, 4;
    Eigen::VectorXd rhs(3);
    rhs << 3, 13, 8;
    // back-substitution: x2 = 2, x1 = (13-4)/3 = 3, x0 = (3 - 3 + 2)/2 = 1
    const Eigen::VectorXd x = solve_square(sparse_from(a), rhs);
    CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(x[1] == doctest::Approx(3.0).epsilon(1e-13));
    CHECK(x[2] == doctest::Approx(2.0).epsilon(1e-13));

    CHECK(solve_square(sparse_from(a), Eigen::VectorXd::Zero(3)).norm() == 0.0);

    Eigen::MatrixXd sing = Eigen::MatrixXd::Zero(3, 3);
    sing(0, 0) = 1.0;
    sing(1, 1) = 1.0;
    CHECK_THROWS_AS(solve_square(sparse_from(sing), rhs), SolverError);
}

TEST_CASE("solve_saddle: zero rhs gives zero solution") {
    std::mt19937 rng(7);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(10, 10, [&]() { return gauss(rng); });
    Eigen::MatrixXd g = m * m.transpose() + 10.0 * Eigen::MatrixXd::Identity(10, 10);
    Eigen::MatrixXd bb = Eigen::MatrixXd::NullaryExpr(10, 4, [&]() { return gauss(rng); });

    SaddleSystem sys{sparse_from(g), sparse_from(bb), Eigen::VectorXd::Zero(10)};
    const SaddlePoint sol = solve_saddle(sys);
    CHECK(sol.eps.norm() < 1e-12);
    CHECK(sol.u_bar.norm() < 1e-12);
}

TEST_CASE("solve_saddle: matches a dense block oracle on random systems") {
    std::mt19937 rng(19);
    std::normal_distribution<double> gauss;
    for (int t = 0; t < 5; ++t) {
        const int n = 10, m = 4;
        Eigen::MatrixXd rand_m = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return gauss(rng); });
        Eigen::MatrixXd g = rand_m * rand_m.transpose() + static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
        Eigen::MatrixXd bb = Eigen::MatrixXd::NullaryExpr(n, m, [&]() { return gauss(rng); });
        Eigen::VectorXd ell = Eigen::VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });

        // dense oracle on the full block matrix
        Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n + m, n + m);
        block.topLeftCorner(n, n) = g;
        block.topRightCorner(n, m) = bb;
        block.bottomLeftCorner(m, n) = bb.transpose();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
        rhs.head(n) = ell;
        const Eigen::VectorXd oracle = block.fullPivLu().solve(rhs);

        SaddleSystem sys{sparse_from(g), sparse_from(bb), ell};
        const SaddlePoint sol = solve_saddle(sys);
        CHECK((sol.eps - oracle.head(n)).lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + oracle.norm()));
        CHECK((sol.u_bar - oracle.tail(m)).lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + oracle.norm()));
    }
}

TEST_CASE("solve_saddle: full broken trial space returns the dG solution with zero residual") {
    // E = identity: the minimizer attains zero residual, eps = 0, u_bar = theta.
    auto mesh = std::make_shared<const Mesh>(rectangle_mesh(Vec2(0, 0), Vec2(1, 1), 1, 1));
    const FunctionSpace sp(mesh, 1, Continuity::Broken);
    ProblemDef prob;
    prob.kappa = [](const Vec2&) { return Eigen::Matrix2d(Eigen::Matrix2d::Identity()); };
    prob.source = [](const Vec2&) { return 1.0; };
    prob.dirichlet = [](const Vec2&) { return 0.0; };
    prob.bc = {{"dirichlet", BcType::Dirichlet}};

    const SparseMat b = assemble_swip(sp, sp, prob.kappa, prob.bc).matrix;
    const SparseMat g = assemble_gram(sp, prob.kappa, nullptr, GramKind::Advective).matrix;
    const Eigen::VectorXd ell = assemble_rhs(sp, prob);

    SaddleSystem sys{g, b, ell};
    const SaddlePoint sol = solve_saddle(sys);
    const Eigen::VectorXd theta = solve_square(b, ell);
    CHECK(sol.eps.lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + theta.lpNorm<Eigen::Infinity>()));
    CHECK((sol.u_bar - theta).lpNorm<Eigen::Infinity>() < 1e-9 * (1.0 + theta.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("solve_saddle: dimension mismatch is rejected") {
    SaddleSystem sys{identity(4), identity(3), Eigen::VectorXd::Zero(4)};
    CHECK_THROWS_AS(solve_saddle(sys), InvalidInput);
}
