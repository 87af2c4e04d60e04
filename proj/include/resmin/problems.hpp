#pragma once

#include <limits>
#include <string>
#include <vector>

#include "resmin/forms.hpp"
#include "resmin/solver.hpp"

namespace resmin {

/// One named benchmark configuration: coefficients, initial mesh, the
/// recommended marking fraction and, for nonlinear runs, the initial guess.
struct Benchmark {
    std::string name;
    std::string description;
    ProblemDef problem;
    Mesh initial_mesh;
    double eta_ref = 0.25;
    bool nonlinear = false;
    ScalarField initial_guess; ///< coarse initial iterate for Newton
};

/// Laplace on the re-entrant corner domain, singular exact solution
/// r^(2/3) sin(2 theta / 3).
Benchmark lshape();

/// Two-material advection-diffusion on the unit square with the interface at
/// x = 1/2 and an exponential-layer exact profile.
Benchmark heterogeneous();

/// Strongly anisotropic diffusion, kappa = diag(1, 1/r_kappa), with a sharp
/// Gaussian inner layer. r_kappa in {1e4, 1e6} in the studies.
Benchmark anisotropic(double r_kappa);

/// Classical Eriksson-Johnson boundary-layer problem on the unit square,
/// kappa = 1e-2, beta = (1,0).
Benchmark eriksson_johnson_2d();

/// Isotropic Burgers flux b u^2/2, b = (1,1), with a tanh inner-layer exact
/// solution and manufactured source.
Benchmark burgers_isotropic(double kappa = 1e-3);

/// Single-component Burgers flux [u^2/2, u] with a stationary shock at
/// x = 1/2; no exact solution. kappa in {1e-2, 1e-3, 1e-4} in the studies.
Benchmark burgers_single(double kappa);

/// All registry names accepted by make_benchmark.
std::vector<std::string> benchmark_names();

/// Lookup by name; throws InvalidInput for unknown names.
Benchmark make_benchmark(const std::string& name);

/// L2 and discrete-norm errors of the scale solutions against the exact
/// solution; NaN where a quantity or the exact solution is unavailable.
struct ErrorReport {
    static constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    double l2_coarse = nan;
    double vh_coarse = nan;
    double l2_full = nan;
    double vh_full = nan;
    double l2_adjoint = nan;
    double vh_adjoint = nan;
    double l2_dg = nan;
    double vh_dg = nan;
};

ErrorReport compute_errors(const ScaleSolutions& solutions, const Benchmark& benchmark,
                           const LevelContext& level);

/// L2 distance of a broken-space function to a scalar field.
double l2_error(const FunctionSpace& broken, const Eigen::VectorXd& coeffs, const ScalarField& exact);

/// Discrete-norm distance of a broken-space function to an exact solution:
/// volume terms by quadrature against the exact value and gradient, interior
/// jump terms from the discrete function alone, boundary trace terms against
/// the exact value.
double vh_error(const FunctionSpace& broken, const Eigen::VectorXd& coeffs, const ProblemDef& problem,
                GramKind kind, const ScalarField& exact, const VectorField& exact_grad);

} // namespace resmin
