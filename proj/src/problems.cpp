#include "resmin/problems.hpp"

#include <cmath>
#include <complex>

namespace resmin {

namespace {

TensorField constant_kappa(double k) {
    return [k](const Vec2&) { return Eigen::Matrix2d(k * Eigen::Matrix2d::Identity()); };
}

BcMap dirichlet_everywhere() { return {{"dirichlet", BcType::Dirichlet}}; }

} // namespace

Benchmark lshape() {
    Benchmark b;
    b.name = "lshape";
    b.description = "Laplace, re-entrant corner, u = r^(2/3) sin(2 theta/3)";
    b.initial_mesh = lshape_mesh();
    b.eta_ref = 0.25;

    const double alpha = 2.0 / 3.0;
    // Im(z^alpha); the principal branch cut lies in the removed quadrant's
    // closure, so the function is smooth on the open domain.
    auto exact = [alpha](const Vec2& x) {
        const std::complex<double> z(x.x(), x.y());
        return std::imag(std::pow(z, alpha));
    };
    auto exact_grad = [alpha](const Vec2& x) {
        const std::complex<double> z(x.x(), x.y());
        if (std::abs(z) < 1e-300) return Vec2(Vec2::Zero());
        const std::complex<double> w = alpha * std::pow(z, alpha - 1.0);
        return Vec2(std::imag(w), std::real(w));
    };

    b.problem.kappa = constant_kappa(1.0);
    b.problem.dirichlet = exact;
    b.problem.bc = dirichlet_everywhere();
    b.problem.exact = exact;
    b.problem.exact_grad = exact_grad;
    return b;
}

Benchmark heterogeneous() {
    Benchmark b;
    b.name = "heterogeneous";
    b.description = "two-material tensor diffusion with exponential layer at the interface";
    b.initial_mesh = rectangle_mesh(Vec2(0, 0), Vec2(1, 1), 8, 8);
    b.eta_ref = 0.25;

    const double eps1 = 0.1;
    const double eps2 = 1.0;
    const double e1 = std::exp(1.0 / (2.0 * eps1));
    const double e2 = std::exp(1.0 / (2.0 * eps2));
    const double d1 = 1.0 - e1;
    const double d2 = 1.0 - e2;
    const double u_half = (e1 / d1) / (e1 / d1 + 1.0 / d2);

    auto exact = [=](const Vec2& x) {
        if (x.x() < 0.5)
            return (u_half - e1 + (1.0 - u_half) * std::exp(x.x() / eps1)) / d1;
        return (-e2 * u_half + u_half * std::exp((x.x() - 0.5) / eps2)) / d2;
    };
    auto exact_dx = [=](double x) {
        if (x < 0.5) return (1.0 - u_half) * std::exp(x / eps1) / (eps1 * d1);
        return u_half * std::exp((x - 0.5) / eps2) / (eps2 * d2);
    };
    auto exact_grad = [=](const Vec2& x) { return Vec2(exact_dx(x.x()), 0.0); };

    b.problem.kappa = [=](const Vec2& x) {
        Eigen::Matrix2d k = Eigen::Matrix2d::Identity();
        k(0, 0) = x.x() < 0.5 ? eps1 : eps2;
        return k;
    };
    b.problem.beta = [](const Vec2&) { return Vec2(0.0, 1.0); };
    // The profile is y-independent, so beta plays no role in the balance and
    // the source is the one-dimensional -eps u''.
    b.problem.source = [=](const Vec2& x) {
        if (x.x() < 0.5) return -(1.0 - u_half) * std::exp(x.x() / eps1) / (eps1 * d1);
        return -u_half * std::exp((x.x() - 0.5) / eps2) / (eps2 * d2);
    };
    b.problem.dirichlet = exact;
    b.problem.bc = dirichlet_everywhere();
    b.problem.exact = exact;
    b.problem.exact_grad = exact_grad;
    return b;
}

Benchmark anisotropic(double r_kappa) {
    if (!(r_kappa > 0.0)) throw InvalidInput("anisotropic: r_kappa must be positive");
    Benchmark b;
    b.name = "anisotropic";
    b.description = "diag(1, 1/r) diffusion with a Gaussian inner layer";
    b.initial_mesh = rectangle_mesh(Vec2(-1.0, -0.5), Vec2(1.0, 0.5), 8, 8);
    b.eta_ref = 0.25;

    const double tau = 1e-3;
    const double s = r_kappa * tau;
    const double scale = 1.0 / (4.0 * M_PI * std::sqrt(s));

    auto exact = [=](const Vec2& x) { return scale * std::exp(-(x.x() * x.x() + s * x.y() * x.y())); };
    auto exact_grad = [=](const Vec2& x) {
        const double u = scale * std::exp(-(x.x() * x.x() + s * x.y() * x.y()));
        return Vec2(-2.0 * x.x() * u, -2.0 * s * x.y() * u);
    };

    b.problem.kappa = [=](const Vec2&) {
        Eigen::Matrix2d k = Eigen::Matrix2d::Zero();
        k(0, 0) = 1.0;
        k(1, 1) = 1.0 / r_kappa;
        return k;
    };
    // f = -div(kappa grad u) for the Gaussian profile.
    b.problem.source = [=](const Vec2& x) {
        const double u = scale * std::exp(-(x.x() * x.x() + s * x.y() * x.y()));
        return (2.0 + 2.0 * tau - 4.0 * x.x() * x.x() - 4.0 * r_kappa * tau * tau * x.y() * x.y()) * u;
    };
    b.problem.dirichlet = exact;
    b.problem.bc = dirichlet_everywhere();
    b.problem.exact = exact;
    b.problem.exact_grad = exact_grad;
    return b;
}

Benchmark eriksson_johnson_2d() {
    Benchmark b;
    b.name = "eriksson-johnson";
    b.description = "advection-diffusion boundary layer, kappa = 1e-2, beta = (1,0)";
    b.initial_mesh = rectangle_mesh(Vec2(0, 0), Vec2(1, 1), 8, 8);
    b.eta_ref = 0.25;

    const double kappa = 1e-2;
    const double root = std::sqrt(1.0 + 4.0 * kappa * kappa * M_PI * M_PI);
    const double r1 = (1.0 + root) / (2.0 * kappa);
    const double r2 = (1.0 - root) / (2.0 * kappa);
    const double denom = std::exp(-r1) - std::exp(-r2);

    auto xpart = [=](double x) { return (std::exp(r1 * (x - 1.0)) - std::exp(r2 * (x - 1.0))) / denom; };
    auto xpart_dx = [=](double x) {
        return (r1 * std::exp(r1 * (x - 1.0)) - r2 * std::exp(r2 * (x - 1.0))) / denom;
    };
    auto exact = [=](const Vec2& x) { return xpart(x.x()) * std::sin(M_PI * x.y()); };
    auto exact_grad = [=](const Vec2& x) {
        return Vec2(xpart_dx(x.x()) * std::sin(M_PI * x.y()), M_PI * xpart(x.x()) * std::cos(M_PI * x.y()));
    };

    b.problem.kappa = constant_kappa(kappa);
    b.problem.beta = [](const Vec2&) { return Vec2(1.0, 0.0); };
    b.problem.dirichlet = exact;
    b.problem.bc = dirichlet_everywhere();
    b.problem.exact = exact;
    b.problem.exact_grad = exact_grad;
    return b;
}

Benchmark burgers_isotropic(double kappa) {
    if (!(kappa > 0.0)) throw InvalidInput("burgers_isotropic: kappa must be positive");
    Benchmark b;
    b.name = "burgers-isotropic";
    b.description = "Burgers flux b u^2/2, b = (1,1), tanh inner layer";
    b.initial_mesh = rectangle_mesh(Vec2(0, 0), Vec2(1, 1), 8, 8);
    b.eta_ref = 0.25;
    b.nonlinear = true;
    b.initial_guess = [](const Vec2&) { return 0.5; };

    const double width = std::sqrt(5.0 * kappa);
    auto arg = [=](const Vec2& x) { return (2.0 * x.x() - x.y() - 0.25) / width; };
    auto exact = [=](const Vec2& x) { return 0.5 * (1.0 - std::tanh(arg(x))); };
    auto exact_grad = [=](const Vec2& x) {
        const double t = std::tanh(arg(x));
        const double sech2 = 1.0 - t * t;
        return Vec2(-sech2 / width, 0.5 * sech2 / width);
    };

    b.problem.kappa = constant_kappa(kappa);
    b.problem.flux = [](double u) { return Vec2(0.5 * u * u, 0.5 * u * u); };
    b.problem.flux_deriv = [](double u) { return Vec2(u, u); };
    b.problem.flux_deriv2 = [](double) { return Vec2(1.0, 1.0); };
    // f = b . grad(u^2/2) - kappa lap(u) for the tanh profile.
    b.problem.source = [=](const Vec2& x) {
        const double t = std::tanh(arg(x));
        const double sech2 = 1.0 - t * t;
        return -(1.0 - t) * sech2 / (4.0 * width) - sech2 * t;
    };
    b.problem.dirichlet = exact;
    b.problem.bc = dirichlet_everywhere();
    b.problem.exact = exact;
    b.problem.exact_grad = exact_grad;
    return b;
}

Benchmark burgers_single(double kappa) {
    if (!(kappa > 0.0)) throw InvalidInput("burgers_single: kappa must be positive");
    Benchmark b;
    b.name = "burgers-single";
    b.description = "single-component Burgers flux [u^2/2, u], stationary shock at x = 1/2";
    b.initial_mesh = rectangle_mesh(Vec2(0, 0), Vec2(1, 1), 4, 4, [](const Vec2& mid) {
        return mid.y() > 1.0 - 1e-12 ? std::string("neumann") : std::string("dirichlet");
    });
    b.eta_ref = 0.25;
    b.nonlinear = true;
    b.initial_guess = [](const Vec2& x) { return 1.0 - 2.0 * x.x(); };

    b.problem.kappa = constant_kappa(kappa);
    b.problem.flux = [](double u) { return Vec2(0.5 * u * u, u); };
    b.problem.flux_deriv = [](double u) { return Vec2(u, 1.0); };
    b.problem.flux_deriv2 = [](double) { return Vec2(1.0, 0.0); };
    b.problem.dirichlet = [](const Vec2& x) { return 1.0 - 2.0 * x.x(); };
    b.problem.bc = {{"dirichlet", BcType::Dirichlet}, {"neumann", BcType::Neumann}};
    return b;
}

std::vector<std::string> benchmark_names() {
    return {"lshape",            "heterogeneous",     "anisotropic-1e4",   "anisotropic-1e6",
            "eriksson-johnson",  "burgers-isotropic", "burgers-single-1e2", "burgers-single-1e3",
            "burgers-single-1e4"};
}

Benchmark make_benchmark(const std::string& name) {
    if (name == "lshape") return lshape();
    if (name == "heterogeneous") return heterogeneous();
    if (name == "anisotropic-1e4") {
        Benchmark b = anisotropic(1e4);
        b.name = name;
        return b;
    }
    if (name == "anisotropic-1e6") {
        Benchmark b = anisotropic(1e6);
        b.name = name;
        return b;
    }
    if (name == "eriksson-johnson") return eriksson_johnson_2d();
    if (name == "burgers-isotropic") return burgers_isotropic(1e-3);
    if (name == "burgers-single-1e2") {
        Benchmark b = burgers_single(1e-2);
        b.name = name;
        return b;
    }
    if (name == "burgers-single-1e3") {
        Benchmark b = burgers_single(1e-3);
        b.name = name;
        return b;
    }
    if (name == "burgers-single-1e4") {
        Benchmark b = burgers_single(1e-4);
        b.name = name;
        return b;
    }
    throw InvalidInput("unknown benchmark '" + name + "'");
}

// ---------------------------------------------------------------------------
// Error evaluation.

double l2_error(const FunctionSpace& broken, const Eigen::VectorXd& coeffs, const ScalarField& exact) {
    const Mesh& mesh = broken.mesh();
    const int p = broken.degree();
    const int nl = broken.local_dofs();
    const Quadrature rule = quadrature_rule(Quadrature::Entity::Triangle, 2 * p + 1);
    const int nq = static_cast<int>(rule.points.size());

    std::vector<double> vals(static_cast<std::size_t>(nl));
    std::vector<Vec2> grads(static_cast<std::size_t>(nl));
    double acc = 0.0;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        const auto dofs = broken.cell_dofs(c);
        for (int q = 0; q < nq; ++q) {
            eval_basis(p, rule.points[static_cast<std::size_t>(q)], vals, grads);
            double uh = 0.0;
            for (int i = 0; i < nl; ++i) uh += coeffs[dofs[static_cast<std::size_t>(i)]] * vals[static_cast<std::size_t>(i)];
            const double diff = uh - exact(map.to_physical(rule.points[static_cast<std::size_t>(q)]));
            acc += rule.weights[static_cast<std::size_t>(q)] * map.det * diff * diff;
        }
    }
    return std::sqrt(acc);
}

double vh_error(const FunctionSpace& broken, const Eigen::VectorXd& coeffs, const ProblemDef& problem,
                GramKind kind, const ScalarField& exact, const VectorField& exact_grad) {
    const Mesh& mesh = broken.mesh();
    const int p = broken.degree();
    const int nl = broken.local_dofs();
    const Quadrature rule = quadrature_rule(Quadrature::Entity::Triangle, 2 * p + 1);
    const int nq = static_cast<int>(rule.points.size());

    std::vector<double> vals(static_cast<std::size_t>(nl));
    std::vector<Vec2> grads(static_cast<std::size_t>(nl));
    double acc = 0.0;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        const double hk = mesh.geometry(c).diameter;
        const auto dofs = broken.cell_dofs(c);
        for (int q = 0; q < nq; ++q) {
            eval_basis(p, rule.points[static_cast<std::size_t>(q)], vals, grads);
            const Vec2 x = map.to_physical(rule.points[static_cast<std::size_t>(q)]);
            double uh = exact ? -exact(x) : 0.0;
            Vec2 gh = exact_grad ? Vec2(-exact_grad(x)) : Vec2(Vec2::Zero());
            for (int i = 0; i < nl; ++i) {
                const double ci = coeffs[dofs[static_cast<std::size_t>(i)]];
                uh += ci * vals[static_cast<std::size_t>(i)];
                gh += ci * map.grad_to_physical(grads[static_cast<std::size_t>(i)]);
            }
            const Vec2 kg = problem.kappa(x) * gh;
            double term = uh * uh + kg.squaredNorm();
            if (kind == GramKind::Advective) {
                const Vec2 b = problem.beta ? problem.beta(x) : Vec2(Vec2::Zero());
                const double bg = b.dot(gh);
                term += hk * bg * bg;
            } else {
                term += hk * gh.squaredNorm();
            }
            acc += rule.weights[static_cast<std::size_t>(q)] * map.det * term;
        }
    }

    const FaceSet faces = face_topology(mesh);
    const Quadrature edge_rule = quadrature_rule(Quadrature::Entity::Edge, 2 * p + 1);
    for (const Face& f : faces.faces()) {
        const Vec2 a = mesh.vertex(f.vertices[0]);
        const Vec2 bvec = mesh.vertex(f.vertices[1]);
        const int c1 = f.cells[0];
        const CellMap m1 = cell_map(mesh, c1);
        const Eigen::Matrix2d k1 = problem.kappa(mesh.centroid(c1));
        const ElementGeometry g1 = mesh.geometry(c1);

        for (std::size_t q = 0; q < edge_rule.points.size(); ++q) {
            const Vec2 x = a + edge_rule.points[q].x() * (bvec - a);
            const double wq = edge_rule.weights[q] * f.diameter;
            double adv_w = 1.0;
            if (kind == GramKind::Advective)
                adv_w = problem.beta ? 0.5 * std::abs(problem.beta(x).dot(f.normal)) : 0.0;

            eval_basis(p, m1.to_reference(x), vals, grads);
            double u1 = 0.0;
            const auto d1 = broken.cell_dofs(c1);
            for (int i = 0; i < nl; ++i) u1 += coeffs[d1[static_cast<std::size_t>(i)]] * vals[static_cast<std::size_t>(i)];

            if (!f.boundary) {
                const int c2 = f.cells[1];
                const CellMap m2 = cell_map(mesh, c2);
                const Eigen::Matrix2d k2 = problem.kappa(mesh.centroid(c2));
                const ElementGeometry g2 = mesh.geometry(c2);
                const double eta_gamma =
                    penalty_eta_e(g1, &g2, p) * diffusion_weights(k1, k2, f.normal).gamma;
                eval_basis(p, m2.to_reference(x), vals, grads);
                double u2 = 0.0;
                const auto d2 = broken.cell_dofs(c2);
                for (int i = 0; i < nl; ++i) u2 += coeffs[d2[static_cast<std::size_t>(i)]] * vals[static_cast<std::size_t>(i)];
                const double jump = u1 - u2; // the exact solution has no jump
                acc += wq * (adv_w + eta_gamma) * jump * jump;
            } else {
                const double eta_gamma = penalty_eta_e(g1, nullptr, p) * f.normal.dot(k1 * f.normal);
                const double trace = u1 - (exact ? exact(x) : 0.0);
                acc += wq * (adv_w + eta_gamma) * trace * trace;
            }
        }
    }
    return std::sqrt(acc);
}

ErrorReport compute_errors(const ScaleSolutions& solutions, const Benchmark& benchmark,
                           const LevelContext& level) {
    ErrorReport report;
    const ProblemDef& prob = benchmark.problem;
    if (!prob.exact) throw InvalidInput("compute_errors: benchmark has no exact solution");
    const FunctionSpace& broken = *level.broken;
    const GramKind kind = level.gram_kind;

    auto both = [&](const Eigen::VectorXd& w, double& l2, double& vh) {
        l2 = l2_error(broken, w, prob.exact);
        vh = vh_error(broken, w, prob, kind, prob.exact, prob.exact_grad);
    };

    if (solutions.u_bar.size() > 0) {
        const Eigen::VectorXd coarse = level.embedding * solutions.u_bar;
        both(coarse, report.l2_coarse, report.vh_coarse);
    }
    if (solutions.u_full.size() > 0) both(solutions.u_full, report.l2_full, report.vh_full);
    if (solutions.phi.size() > 0) both(solutions.phi, report.l2_adjoint, report.vh_adjoint);
    if (solutions.theta.size() > 0) both(solutions.theta, report.l2_dg, report.vh_dg);
    return report;
}

} // namespace resmin
