#pragma once

#include <limits>
#include <vector>

#include "resmin/problems.hpp"
#include "resmin/solver.hpp"

namespace resmin {

/// Cellwise error indicators; their sum equals the squared estimator norm.
struct ElementIndicators {
    std::vector<double> eta_sq;
    double total = 0.0;
};

/// Splits the squared discrete norm of the residual representative over the
/// cells: volume terms per cell, half of each interior face term to either
/// incident cell, boundary face terms to their cell.
ElementIndicators localize_estimator(const FunctionSpace& broken, const ProblemDef& problem, GramKind kind,
                                     const Eigen::VectorXd& eps);

/// Bulk-chasing (Dorfler) marking: fewest cells, by descending indicator,
/// whose indicators reach the given fraction of the total. Ties by lower cell
/// index. Cells come back sorted by index.
std::vector<int> dorfler_mark(const ElementIndicators& indicators, double fraction);

/// Per-level output of the adaptive loop; quantities that do not apply hold NaN.
struct ConvergenceRecord {
    int level = 0;
    int dofs = 0;         ///< dim(conforming) + dim(broken)
    double est_vh = 0.0;  ///< discrete norm of the residual representative
    ErrorReport errors;   ///< exact-solution errors where available
    int newton_iters = -1;
};

struct AdaptiveOptions {
    int degree = 1;
    int levels = 1;
    double eta_ref = 0.25;
    NewtonConfig newton;
    bool reconstructions = true;
    bool reference = false; ///< also track the plain dG solution
};

struct AdaptiveResult {
    std::vector<ConvergenceRecord> records;
    ScaleSolutions final_solutions;
    std::shared_ptr<const Mesh> final_mesh;
};

/// SOLVE -> ESTIMATE -> MARK -> REFINE. Solver failures are rethrown with the
/// level attached. For nonlinear problems the converged coarse solution is
/// interpolated onto the refined mesh as the next initial guess.
AdaptiveResult adaptive_loop(const Benchmark& benchmark, const AdaptiveOptions& options);

/// Least-squares slope of log(value) against log(sqrt(dofs)) over the last
/// `window` records; returns the decay rate (positive for decreasing values).
double fit_rate(const std::vector<double>& dofs, const std::vector<double>& values, int window);

/// Interpolates a coarse (conforming) function onto the conforming space of a
/// once-refined mesh using the recorded parent cells.
Eigen::VectorXd transfer_coarse(const FunctionSpace& old_conforming, const Eigen::VectorXd& old_coeffs,
                                const FunctionSpace& new_conforming);

} // namespace resmin
