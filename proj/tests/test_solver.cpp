#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "resmin/adapt.hpp"
#include "resmin/problems.hpp"
#include "resmin/solver.hpp"

using namespace resmin;

namespace {

std::shared_ptr<const Mesh> grid(int n) {
    return std::make_shared<const Mesh>(rectangle_mesh(Vec2(0, 0), Vec2(1, 1), n, n));
}

// Manufactured polynomial solution of -div(kappa grad u) + beta.grad(u) = f.
ProblemDef poly_problem(int p) {
    ProblemDef prob;
    prob.kappa = [](const Vec2&) { return Eigen::Matrix2d(Eigen::Matrix2d::Identity()); };
    prob.beta = [](const Vec2&) { return Vec2(1.0, 1.0); };
    prob.bc = {{"dirichlet", BcType::Dirichlet}};
    if (p == 1) {
        prob.exact = [](const Vec2& x) { return 2.0 * x.x() - x.y() + 1.0; };
        prob.exact_grad = [](const Vec2&) { return Vec2(2.0, -1.0); };
        prob.source = [](const Vec2&) { return 1.0; }; // beta.grad = 2 - 1
    } else if (p == 2) {
        prob.exact = [](const Vec2& x) { return x.x() * x.x() + x.x() * x.y() - x.y(); };
        prob.exact_grad = [](const Vec2& x) { return Vec2(2.0 * x.x() + x.y(), x.x() - 1.0); };
        prob.source = [](const Vec2& x) { return -2.0 + (2.0 * x.x() + x.y()) + (x.x() - 1.0); };
    } else {
        prob.exact = [](const Vec2& x) { return x.x() * x.x() * x.y() + x.y() * x.y() * x.y(); };
        prob.exact_grad = [](const Vec2& x) {
            return Vec2(2.0 * x.x() * x.y(), x.x() * x.x() + 3.0 * x.y() * x.y());
        };
        prob.source = [](const Vec2& x) {
            const double lap = 2.0 * x.y() + 6.0 * x.y();
            const double adv = 2.0 * x.x() * x.y() + x.x() * x.x() + 3.0 * x.y() * x.y();
            return -lap + adv;
        };
    }
    prob.dirichlet = prob.exact;
    return prob;
}

} // namespace

TEST_CASE("solve_linear_resmin: manufactured polynomial is reproduced") {
    for (int p = 1; p <= 3; ++p) {
        auto mesh = grid(2);
        const LevelContext level = make_level(mesh, poly_problem(p), p);
        SolveOptions opts;
        opts.reconstructions = false;
        const ScaleSolutions sol = solve_level_linear(level, opts);

        const Eigen::VectorXd interp = interpolate(poly_problem(p).exact, *level.conforming);
        CHECK((sol.u_bar - interp).lpNorm<Eigen::Infinity>() < 1e-9);
        CHECK(level.vh_norm(sol.eps) < 1e-9);
    }
}

TEST_CASE("solve_linear_resmin: Galerkin orthogonality on the L-shape") {
    const Benchmark bench = lshape();
    auto mesh = std::make_shared<const Mesh>(bench.initial_mesh);
    const LevelContext level = make_level(mesh, bench.problem, 1);
    SolveOptions opts;
    opts.reconstructions = false;
    const ScaleSolutions sol = solve_level_linear(level, opts);

    const SparseMat coarse_op = level.dg_op * level.embedding;
    const double ortho = (coarse_op.transpose() * sol.eps).lpNorm<Eigen::Infinity>();
    CHECK(ortho <= 1e-9 * (level.rhs.lpNorm<Eigen::Infinity>() + 1.0));
    CHECK(level.vh_norm(sol.eps) > 0.0); // singular solution is not in the coarse space
}

TEST_CASE("reconstruct_fine/adjoint: zero residual representative") {
    auto mesh = grid(1);
    const LevelContext level = make_level(mesh, poly_problem(1), 1);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(level.broken->total_dofs());
    CHECK(reconstruct_fine(level.gram, level.dg_op, zero).norm() == 0.0);
    CHECK(reconstruct_adjoint(level.gram, level.dg_op, zero).norm() == 0.0);
}

TEST_CASE("reconstructions: dense oracle on small random systems") {
    std::mt19937 rng(31);
    std::normal_distribution<double> gauss;
    const int n = 10;
    Eigen::MatrixXd m = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return gauss(rng); });
    Eigen::MatrixXd g = m * m.transpose() + static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd b = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return gauss(rng); });
    b += static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n); // keep it well conditioned
    Eigen::VectorXd eps = Eigen::VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });

    SparseMat gs(n, n), bs(n, n);
    std::vector<Eigen::Triplet<double>> tg, tb;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            tg.emplace_back(i, j, g(i, j));
            tb.emplace_back(i, j, b(i, j));
        }
    gs.setFromTriplets(tg.begin(), tg.end());
    bs.setFromTriplets(tb.begin(), tb.end());

    const Eigen::VectorXd fine = reconstruct_fine(gs, bs, eps);
    const Eigen::VectorXd fine_oracle = b.fullPivLu().solve(g * eps);
    CHECK((fine - fine_oracle).lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + fine_oracle.norm()));

    const Eigen::VectorXd adj = reconstruct_adjoint(gs, bs, eps);
    const Eigen::VectorXd adj_oracle = b.fullPivLu().solve(g * eps + b.transpose() * eps);
    CHECK((adj - adj_oracle).lpNorm<Eigen::Infinity>() < 1e-10 * (1.0 + adj_oracle.norm()));

    // u_adj - u_fine solves B x = B^T eps
    const Eigen::VectorXd diff_oracle = b.fullPivLu().solve(b.transpose() * eps);
    CHECK((adj - fine - diff_oracle).lpNorm<Eigen::Infinity>() < 1e-9 * (1.0 + diff_oracle.norm()));
}

TEST_CASE("full-scale identity and adjoint relation on the L-shape") {
    const Benchmark bench = lshape();
    auto mesh = std::make_shared<const Mesh>(bench.initial_mesh.refine({0, 1, 2, 3, 4, 5}));
    for (int p = 1; p <= 2; ++p) {
        const LevelContext level = make_level(mesh, bench.problem, p);
        SolveOptions opts;
        opts.reference = true;
        const ScaleSolutions sol = solve_level_linear(level, opts);

        // E u_bar + u_fine = theta
        CHECK((sol.u_full - sol.theta).lpNorm<Eigen::Infinity>() <=
              1e-8 * sol.theta.lpNorm<Eigen::Infinity>());

        // pure diffusion: B symmetric, so u_adjoint = u_fine + eps
        CHECK((sol.u_adjoint - (sol.u_fine + sol.eps)).lpNorm<Eigen::Infinity>() <=
              1e-8 * (sol.eps.lpNorm<Eigen::Infinity>() + 1e-30));
    }
}

TEST_CASE("solve_dg_reference: zero rhs and manufactured consistency") {
    auto mesh = grid(2);
    const LevelContext level = make_level(mesh, poly_problem(2), 2);
    CHECK(solve_dg_reference(level.dg_op, Eigen::VectorXd::Zero(level.broken->total_dofs())).norm() == 0.0);

    const Eigen::VectorXd theta = solve_dg_reference(level.dg_op, level.rhs);
    const Eigen::VectorXd interp = interpolate(poly_problem(2).exact, *level.broken);
    CHECK((theta - interp).lpNorm<Eigen::Infinity>() < 1e-9 * (1.0 + interp.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("nonlinear with a linear flux: one full Newton step, matches the saddle solve") {
    auto mesh = grid(2);
    const int p = 2;
    ProblemDef prob;
    const Vec2 beta_val(1.0, 0.5);
    prob.kappa = [](const Vec2&) { return Eigen::Matrix2d(0.3 * Eigen::Matrix2d::Identity()); };
    prob.flux = [beta_val](double u) { return Vec2(beta_val * u); };
    prob.flux_deriv = [beta_val](double) { return beta_val; };
    prob.dirichlet = [](const Vec2& x) { return x.x() + x.y(); };
    prob.source = [](const Vec2&) { return 1.0; };
    prob.bc = {{"dirichlet", BcType::Dirichlet}};

    const LevelContext level = make_level(mesh, prob, p);
    SolveOptions opts;
    opts.newton.tolerance = 1e-6;
    const ScaleSolutions nl = solve_level_nonlinear(level, opts);
    CHECK(nl.newton_iterations <= 2); // exact after the first full step

    // reference: linear saddle solve with the (state-independent) LF operator
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(level.broken->total_dofs());
    const SparseMat b_lf = level.nonlinear->jacobian(zero);
    const Eigen::VectorXd ell_lf = -level.nonlinear->residual(zero);
    const SaddlePoint lin = solve_saddle(level.gram, b_lf * level.embedding, ell_lf,
                                         Eigen::VectorXd::Zero(level.conforming->total_dofs()));
    CHECK((nl.u_bar - lin.u_bar).lpNorm<Eigen::Infinity>() <
          1e-7 * (1.0 + lin.u_bar.lpNorm<Eigen::Infinity>()));

    // nonlinear reconstructions coincide with the linear ones on this operator
    const Eigen::VectorXd fine_lin = reconstruct_fine(level.gram, b_lf, nl.eps);
    CHECK((nl.u_fine - fine_lin).lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + fine_lin.lpNorm<Eigen::Infinity>()));
    const Eigen::VectorXd adj_lin = reconstruct_adjoint(level.gram, b_lf, nl.eps);
    CHECK((nl.u_adjoint - adj_lin).lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + adj_lin.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("nonlinear reconstructions: zero residual representative") {
    std::mt19937 rng(3);
    std::normal_distribution<double> gauss;
    const int n = 8;
    Eigen::MatrixXd j = Eigen::MatrixXd::NullaryExpr(n, n, [&]() { return gauss(rng); });
    j += static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
    SparseMat js(n, n), gs(n, n);
    std::vector<Eigen::Triplet<double>> tj, tg;
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) tj.emplace_back(i, k, j(i, k));
    for (int i = 0; i < n; ++i) tg.emplace_back(i, i, 1.0);
    js.setFromTriplets(tj.begin(), tj.end());
    gs.setFromTriplets(tg.begin(), tg.end());

    CHECK(reconstruct_fine_nonlinear(gs, js, Eigen::VectorXd::Zero(n)).norm() == 0.0);
    CHECK(reconstruct_adjoint_nonlinear(gs, js, Eigen::VectorXd::Zero(n)).norm() == 0.0);

    // dense oracle with a nonzero eps
    Eigen::VectorXd eps = Eigen::VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });
    const Eigen::VectorXd adj = reconstruct_adjoint_nonlinear(gs, js, eps);
    const Eigen::VectorXd oracle = j.fullPivLu().solve(eps + j.transpose() * eps);
    CHECK((adj - oracle).lpNorm<Eigen::Infinity>() < 1e-9 * (1.0 + oracle.norm()));
}

TEST_CASE("burgers isotropic: Newton converges on the initial mesh") {
    const Benchmark bench = burgers_isotropic(1e-3);
    auto mesh = std::make_shared<const Mesh>(bench.initial_mesh);
    const LevelContext level = make_level(mesh, bench.problem, 2);

    SolveOptions opts;
    opts.newton.tolerance = 1e-6;
    opts.newton.max_iterations = 30;
    opts.initial_guess = interpolate(bench.initial_guess, *level.conforming);
    const ScaleSolutions sol = solve_level_nonlinear(level, opts);

    CHECK(sol.newton_iterations <= 30);
    CHECK(sol.final_increment_norm < 1e-6);
    // accepted steps never increase the combined saddle residual
    for (std::size_t i = 1; i < sol.residual_history.size(); ++i)
        CHECK(sol.residual_history[i] <= sol.residual_history[i - 1] * (1.0 + 1e-12));
    // the converged saddle equations hold
    const SparseMat jac = level.nonlinear->jacobian(level.embedding * sol.u_bar);
    const Eigen::VectorXd r1 =
        level.nonlinear->residual(level.embedding * sol.u_bar) + level.gram * sol.eps;
    const Eigen::VectorXd r2 = (jac * level.embedding).transpose() * sol.eps;
    const double scale = level.rhs.size() ? level.rhs.lpNorm<Eigen::Infinity>() : 1.0;
    CHECK(r1.lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + scale));
    CHECK(r2.lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + scale));
}

TEST_CASE("burgers isotropic: full scale approximates the dG solution under refinement") {
    const Benchmark bench = burgers_isotropic(1e-3);
    AdaptiveOptions opt;
    opt.degree = 2;
    opt.levels = 4;
    opt.reference = true;
    opt.newton.max_iterations = 50;

    // run the loop manually to track ||u - theta|| per level
    auto mesh = std::make_shared<const Mesh>(bench.initial_mesh);
    Eigen::VectorXd guess;
    std::vector<double> gaps;
    for (int lvl = 0; lvl < opt.levels; ++lvl) {
        const LevelContext level = make_level(mesh, bench.problem, opt.degree);
        SolveOptions sopts;
        sopts.reference = true;
        sopts.newton = opt.newton;
        sopts.initial_guess = guess.size() == level.conforming->total_dofs()
                                  ? guess
                                  : interpolate(bench.initial_guess, *level.conforming);
        const ScaleSolutions sol = solve_level_nonlinear(level, sopts);
        gaps.push_back(level.vh_norm(sol.u_full - sol.theta));
        if (lvl + 1 == opt.levels) break;

        const ElementIndicators ind = localize_estimator(*level.broken, bench.problem, level.gram_kind, sol.eps);
        auto refined = std::make_shared<const Mesh>(mesh->refine(dorfler_mark(ind, 0.25)));
        const FunctionSpace next_conf(refined, opt.degree, Continuity::Conforming);
        guess = transfer_coarse(*level.conforming, sol.u_bar, next_conf);
        mesh = refined;
    }
    CHECK(gaps.back() < gaps.front());
}
