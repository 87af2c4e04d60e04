#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "resmin/problems.hpp"

using namespace resmin;

namespace {

std::mt19937 rng(2024);

Vec2 random_point(const Vec2& lo, const Vec2& hi) {
    std::uniform_real_distribution<double> ux(lo.x(), hi.x()), uy(lo.y(), hi.y());
    return {ux(rng), uy(rng)};
}

// Strong-form residual of the linear problems from hand-coded second
// derivatives (test-only oracles, independent of the shipped source terms).
double linear_strong_residual(const ProblemDef& prob, const Vec2& x, const Eigen::Matrix2d& hess) {
    const Eigen::Matrix2d k = prob.kappa(x);
    // constant-per-subdomain tensors: div(kappa grad u) = kappa : hess
    double div_flux = k(0, 0) * hess(0, 0) + (k(0, 1) + k(1, 0)) * hess(0, 1) + k(1, 1) * hess(1, 1);
    double adv = prob.beta ? prob.beta(x).dot(prob.exact_grad(x)) : 0.0;
    const double f = prob.source ? prob.source(x) : 0.0;
    return -div_flux + adv - f;
}

} // namespace

TEST_CASE("lshape: exact-solution values and singular gradient") {
    const Benchmark b = lshape();
    CHECK(b.problem.exact(Vec2(1, 0)) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(b.problem.exact(Vec2(0, 1)) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-14));
    // gradient magnitude grows toward the corner like r^(-1/3)
    const double far = b.problem.exact_grad(Vec2(0.3, 0.3)).norm();
    const double near = b.problem.exact_grad(Vec2(3e-4, 3e-4)).norm();
    CHECK(near > 8.0 * far);
}

TEST_CASE("lshape: harmonic exact solution (finite-difference Laplacian)") {
    const Benchmark b = lshape();
    const double h = 1e-5;
    for (int t = 0; t < 20; ++t) {
        Vec2 x = random_point(Vec2(0.05, 0.05), Vec2(0.9, 0.9)); // first quadrant, away from the corner
        const double lap = (b.problem.exact(Vec2(x.x() + h, x.y())) + b.problem.exact(Vec2(x.x() - h, x.y())) +
                            b.problem.exact(Vec2(x.x(), x.y() + h)) + b.problem.exact(Vec2(x.x(), x.y() - h)) -
                            4.0 * b.problem.exact(x)) /
                           (h * h);
        CHECK(std::abs(lap) < 1e-4); // second-order stencil noise floor
        // gradient cross-check
        const Vec2 fd((b.problem.exact(Vec2(x.x() + h, x.y())) - b.problem.exact(Vec2(x.x() - h, x.y()))) / (2 * h),
                      (b.problem.exact(Vec2(x.x(), x.y() + h)) - b.problem.exact(Vec2(x.x(), x.y() - h))) / (2 * h));
        CHECK((fd - b.problem.exact_grad(x)).norm() < 1e-7 * (1.0 + fd.norm()));
    }
}

TEST_CASE("heterogeneous: interface value, boundary values, strong residual") {
    const Benchmark b = heterogeneous();
    const double eps1 = 0.1, eps2 = 1.0;
    const double e1 = std::exp(1.0 / (2.0 * eps1));
    const double d1v = 1.0 - e1, d2v = 1.0 - std::exp(0.5);
    const double u_half = (e1 / d1v) / (e1 / d1v + 1.0 / d2v);

    CHECK(b.problem.exact(Vec2(0.5 - 1e-13, 0.3)) == doctest::Approx(u_half).epsilon(1e-10));
    CHECK(b.problem.exact(Vec2(0.5 + 1e-13, 0.7)) == doctest::Approx(u_half).epsilon(1e-10));
    CHECK(b.problem.exact(Vec2(0.0, 0.4)) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(b.problem.exact(Vec2(1.0, 0.6)) == doctest::Approx(0.0).epsilon(1e-13));

    // hand Hessian oracle: u'' = u'/eps_i on each branch (pure exponential part)
    for (int t = 0; t < 20; ++t) {
        Vec2 x = random_point(Vec2(0.01, 0.01), Vec2(0.99, 0.99));
        if (std::abs(x.x() - 0.5) < 0.01) continue;
        const double epsi = x.x() < 0.5 ? eps1 : eps2;
        Eigen::Matrix2d hess = Eigen::Matrix2d::Zero();
        hess(0, 0) = b.problem.exact_grad(x).x() / epsi;
        const double res = linear_strong_residual(b.problem, x, hess);
        const double scale = 1.0 + std::abs(b.problem.source(x));
        CHECK(std::abs(res) < 1e-6 * scale);
    }

    // derivative transcription: centered differences away from the interface
    const double h = 1e-6;
    for (double xx : {0.2, 0.4, 0.7, 0.9}) {
        const Vec2 x(xx, 0.5);
        const double fd = (b.problem.exact(Vec2(xx + h, 0.5)) - b.problem.exact(Vec2(xx - h, 0.5))) / (2 * h);
        CHECK(fd == doctest::Approx(b.problem.exact_grad(x).x()).epsilon(1e-7));
    }
}

TEST_CASE("anisotropic: center value, symmetry, strong residual") {
    for (double r : {1e4, 1e6}) {
        const Benchmark b = anisotropic(r);
        const double s = r * 1e-3;
        CHECK(b.problem.exact(Vec2(0, 0)) == doctest::Approx(1.0 / (4.0 * M_PI * std::sqrt(s))).epsilon(1e-13));
        const Vec2 x(0.37, 0.11);
        CHECK(b.problem.exact(Vec2(-x.x(), x.y())) == doctest::Approx(b.problem.exact(x)).epsilon(1e-13));
        CHECK(b.problem.exact(Vec2(x.x(), -x.y())) == doctest::Approx(b.problem.exact(x)).epsilon(1e-13));

        // hand Hessian of the Gaussian
        for (int t = 0; t < 20; ++t) {
            const Vec2 p = random_point(Vec2(-0.9, -0.45), Vec2(0.9, 0.45));
            const double u = b.problem.exact(p);
            Eigen::Matrix2d hess;
            hess(0, 0) = (4.0 * p.x() * p.x() - 2.0) * u;
            hess(1, 1) = (4.0 * s * s * p.y() * p.y() - 2.0 * s) * u;
            hess(0, 1) = hess(1, 0) = 4.0 * s * p.x() * p.y() * u;
            const double res = linear_strong_residual(b.problem, p, hess);
            const double scale = 1.0 + std::abs(b.problem.source(p));
            CHECK(std::abs(res) < 1e-6 * scale);
        }
    }
    CHECK(anisotropic(1e4).problem.exact(Vec2(0, 0)) == doctest::Approx(0.02516).epsilon(2e-4));
    CHECK_THROWS_AS(anisotropic(-1.0), InvalidInput);
}

TEST_CASE("eriksson-johnson: boundary values, Vieta identity, strong residual") {
    const Benchmark b = eriksson_johnson_2d();
    for (double y : {0.1, 0.5, 0.9}) CHECK(std::abs(b.problem.exact(Vec2(1.0, y))) < 1e-13);
    CHECK(b.problem.exact(Vec2(0.0, 0.5)) == doctest::Approx(1.0).epsilon(1e-13));

    const double kappa = 1e-2;
    const double root = std::sqrt(1.0 + 4.0 * kappa * kappa * M_PI * M_PI);
    const double r1 = (1.0 + root) / (2.0 * kappa);
    const double r2 = (1.0 - root) / (2.0 * kappa);
    CHECK(r1 * r2 == doctest::Approx(-M_PI * M_PI).epsilon(1e-12));

    // hand Hessian: u = X(x) sin(pi y), X'' from the exponentials
    const double denom = std::exp(-r1) - std::exp(-r2);
    for (int t = 0; t < 20; ++t) {
        const Vec2 p = random_point(Vec2(0.01, 0.01), Vec2(0.99, 0.99));
        const double xx = (r1 * r1 * std::exp(r1 * (p.x() - 1.0)) - r2 * r2 * std::exp(r2 * (p.x() - 1.0))) / denom;
        Eigen::Matrix2d hess;
        hess(0, 0) = xx * std::sin(M_PI * p.y());
        hess(1, 1) = -M_PI * M_PI * b.problem.exact(p);
        hess(0, 1) = hess(1, 0) =
            M_PI * std::cos(M_PI * p.y()) *
            (r1 * std::exp(r1 * (p.x() - 1.0)) - r2 * std::exp(r2 * (p.x() - 1.0))) / denom;
        const double res = linear_strong_residual(b.problem, p, hess);
        const double scale = 1.0 + std::abs(hess(0, 0)) * kappa + std::abs(b.problem.exact_grad(p).x());
        CHECK(std::abs(res) < 1e-6 * scale);
    }
}

TEST_CASE("burgers isotropic: layer values, limits, width scaling, strong residual") {
    const double kappa = 1e-3;
    const Benchmark b = burgers_isotropic(kappa);
    // on the line 2x - y = 0.25 the profile is exactly 1/2
    CHECK(b.problem.exact(Vec2(0.25, 0.25)) == doctest::Approx(0.5).epsilon(1e-13));
    CHECK(b.problem.exact(Vec2(0.5, 0.75)) == doctest::Approx(0.5).epsilon(1e-13));
    // upstream -> 1, downstream -> 0
    CHECK(b.problem.exact(Vec2(0.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(b.problem.exact(Vec2(1.0, 0.0)) == doctest::Approx(0.0).epsilon(1e-9));

    // layer width scales like sqrt(kappa): the profile at a fixed offset from
    // the layer is closer to its limit for smaller kappa
    const Benchmark wide = burgers_isotropic(1e-1);
    const Vec2 offset(0.25 + 0.05, 0.25);
    CHECK(std::abs(b.problem.exact(offset) - 0.0) < std::abs(wide.problem.exact(offset) - 0.0));

    // strong residual: div(b u^2/2) - kappa lap(u) = f with hand Hessian
    const double width = std::sqrt(5.0 * kappa);
    for (int t = 0; t < 20; ++t) {
        const Vec2 p = random_point(Vec2(0.01, 0.01), Vec2(0.99, 0.99));
        const double g = (2.0 * p.x() - p.y() - 0.25) / width;
        const double th = std::tanh(g);
        const double sech2 = 1.0 - th * th;
        const double u = 0.5 * (1.0 - th);
        const Vec2 grad = b.problem.exact_grad(p);
        const double lap = (4.0 + 1.0) / (width * width) * sech2 * th; // d2g = (2,-1)/width
        const double conv = u * (grad.x() + grad.y());
        const double res = conv - kappa * lap - b.problem.source(p);
        const double scale = 1.0 + std::abs(conv) + std::abs(kappa * lap);
        CHECK(std::abs(res) < 1e-6 * scale);
    }
}

TEST_CASE("burgers single: boundary data, shock symmetry, dissipation parameter") {
    const Benchmark b = burgers_single(1e-2);
    CHECK(b.problem.dirichlet(Vec2(0.0, 0.3)) == doctest::Approx(1.0));
    CHECK(b.problem.dirichlet(Vec2(1.0, 0.8)) == doctest::Approx(-1.0));
    // antisymmetric data around x = 1/2
    CHECK(b.problem.dirichlet(Vec2(0.5, 0.0)) == doctest::Approx(0.0));

    // eta_f on a vertical face with n = (1,0): max(|u1|, |u2|)
    const auto lf = lax_friedrichs_flux(0.3, -0.9, Vec2(1, 0), b.problem.flux, b.problem.flux_deriv,
                                        LfFaceKind::Interior);
    CHECK(lf.eta == doctest::Approx(0.9));

    // Neumann tag present on the top edge of the initial mesh
    int neumann_faces = 0;
    const FaceSet fs = face_topology(b.initial_mesh);
    for (const Face& f : fs.faces())
        if (f.boundary && f.tag == "neumann") {
            ++neumann_faces;
            CHECK(std::abs(0.5 * (b.initial_mesh.vertex(f.vertices[0]).y() +
                                  b.initial_mesh.vertex(f.vertices[1]).y()) -
                           1.0) < 1e-12);
        }
    CHECK(neumann_faces == 4);
    CHECK_FALSE(static_cast<bool>(b.problem.exact));
}

TEST_CASE("benchmark registry: names resolve, unknown rejected, deterministic") {
    for (const std::string& name : benchmark_names()) {
        const Benchmark b1 = make_benchmark(name);
        const Benchmark b2 = make_benchmark(name);
        CHECK(b1.name == name);
        CHECK(b1.initial_mesh.n_cells() == b2.initial_mesh.n_cells());
        const Vec2 probe(0.3, 0.4);
        CHECK(b1.problem.kappa(probe) == b2.problem.kappa(probe));
        if (b1.problem.exact) CHECK(b1.problem.exact(probe) == b2.problem.exact(probe));
    }
    CHECK_THROWS_AS(make_benchmark("nosuch"), InvalidInput);
}

TEST_CASE("compute_errors: interpolant of a polynomial solution is exact") {
    Benchmark bench;
    bench.name = "poly";
    bench.initial_mesh = rectangle_mesh(Vec2(0, 0), Vec2(1, 1), 2, 2);
    bench.problem.kappa = [](const Vec2&) { return Eigen::Matrix2d(Eigen::Matrix2d::Identity()); };
    bench.problem.bc = {{"dirichlet", BcType::Dirichlet}};
    bench.problem.exact = [](const Vec2& x) { return x.x() * x.x() - x.y(); };
    bench.problem.exact_grad = [](const Vec2& x) { return Vec2(2.0 * x.x(), -1.0); };
    bench.problem.dirichlet = bench.problem.exact;

    auto mesh = std::make_shared<const Mesh>(bench.initial_mesh);
    const LevelContext level = make_level(mesh, bench.problem, 2);
    ScaleSolutions sol;
    sol.u_bar = interpolate(bench.problem.exact, *level.conforming);
    sol.u_full = level.embedding * sol.u_bar;
    const ErrorReport rep = compute_errors(sol, bench, level);
    CHECK(rep.l2_coarse < 1e-10);
    CHECK(rep.vh_coarse < 1e-10);
    CHECK(rep.l2_full < 1e-10);
    CHECK(std::isnan(rep.l2_dg)); // theta not computed
}

TEST_CASE("compute_errors: zero function against the unit solution has L2 error one") {
    Benchmark bench;
    bench.initial_mesh = rectangle_mesh(Vec2(0, 0), Vec2(1, 1), 2, 2);
    bench.problem.kappa = [](const Vec2&) { return Eigen::Matrix2d(Eigen::Matrix2d::Identity()); };
    bench.problem.bc = {{"dirichlet", BcType::Dirichlet}};
    bench.problem.exact = [](const Vec2&) { return 1.0; };
    bench.problem.exact_grad = [](const Vec2&) { return Vec2(0.0, 0.0); };

    auto mesh = std::make_shared<const Mesh>(bench.initial_mesh);
    const LevelContext level = make_level(mesh, bench.problem, 1);
    ScaleSolutions sol;
    sol.u_bar = Eigen::VectorXd::Zero(level.conforming->total_dofs());
    const ErrorReport rep = compute_errors(sol, bench, level);
    CHECK(rep.l2_coarse == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("interpolation error halves at rate 2^(p+1) under uniform refinement") {
    auto smooth = [](const Vec2& x) { return std::sin(M_PI * x.x()) * std::sin(M_PI * x.y()); };
    for (int p = 1; p <= 3; ++p) {
        double prev = 0.0;
        for (int n : {4, 8}) {
            auto mesh = std::make_shared<const Mesh>(rectangle_mesh(Vec2(0, 0), Vec2(1, 1), n, n));
            const FunctionSpace sp(mesh, p, Continuity::Broken);
            const double err = l2_error(sp, interpolate(smooth, sp), smooth);
            if (prev > 0.0) {
                const double rate = std::log2(prev / err);
                CHECK(rate == doctest::Approx(p + 1.0).epsilon(0.12));
            }
            prev = err;
        }
    }
}
