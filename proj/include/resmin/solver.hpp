#pragma once

#include <memory>
#include <optional>

#include "resmin/forms.hpp"
#include "resmin/linalg.hpp"

namespace resmin {

/// Damped Newton controls for the nonlinear saddle solve.
struct NewtonConfig {
    double tolerance = 1e-6;   ///< discrete-norm size of the coarse increment
    int max_iterations = 50;
    double min_damping = 9.765625e-4; ///< 2^-10; below this the step is rejected
};

/// Residual representative, coarse solution and the multiscale
/// reconstructions of one solve. Broken-space vectors unless noted.
struct ScaleSolutions {
    Eigen::VectorXd eps;       ///< residual representative
    Eigen::VectorXd u_bar;     ///< coarse solution (conforming coefficients)
    Eigen::VectorXd u_fine;    ///< fine-scale correction
    Eigen::VectorXd u_adjoint; ///< adjoint fine-scale correction
    Eigen::VectorXd u_full;    ///< E u_bar + u_fine
    Eigen::VectorXd phi;       ///< E u_bar + u_adjoint
    Eigen::VectorXd theta;     ///< reference dG solution; size 0 unless requested
    int newton_iterations = 0;
    double final_increment_norm = 0.0;
    /// Combined saddle residual after each accepted Newton step (nonlinear only).
    std::vector<double> residual_history;
};

/// Assembled objects of one mesh level shared by the solver and the
/// adaptivity driver.
struct LevelContext {
    std::shared_ptr<const Mesh> mesh;
    std::shared_ptr<FunctionSpace> broken;
    std::shared_ptr<FunctionSpace> conforming;
    SparseMat embedding; ///< E
    SparseMat gram;      ///< G
    GramKind gram_kind = GramKind::Advective;
    SparseMat dg_op;     ///< B (linear problems only)
    Eigen::VectorXd rhs; ///< ell (linear problems only)
    std::unique_ptr<NonlinearForm> nonlinear;

    int total_dofs() const { return broken->total_dofs() + conforming->total_dofs(); }
    double vh_norm(const Eigen::VectorXd& broken_vec) const;
};

LevelContext make_level(std::shared_ptr<const Mesh> mesh, const ProblemDef& problem, int degree);

struct SolveOptions {
    bool reconstructions = true;
    bool reference = false; ///< also compute the plain dG solution theta
    NewtonConfig newton;
    /// Initial coarse guess for Newton (conforming coefficients); zero if empty.
    Eigen::VectorXd initial_guess;
};

/// Linear residual minimization on one level; fills reconstructions per options.
ScaleSolutions solve_level_linear(const LevelContext& level, const SolveOptions& options);

/// Nonlinear (conservation law) residual minimization via damped Newton.
ScaleSolutions solve_level_nonlinear(const LevelContext& level, const SolveOptions& options);

/// Convenience wrappers building the level context internally.
ScaleSolutions solve_linear_resmin(std::shared_ptr<const Mesh> mesh, const ProblemDef& problem, int degree,
                                   const SolveOptions& options = {});
ScaleSolutions solve_nonlinear_resmin(std::shared_ptr<const Mesh> mesh, const ProblemDef& problem, int degree,
                                      const NewtonConfig& config, const Eigen::VectorXd& initial_guess,
                                      const SolveOptions& options = {});

/// Fine-scale reconstruction: solves B u_fine = G eps.
Eigen::VectorXd reconstruct_fine(const SparseMat& gram, const SparseMat& dg_op, const Eigen::VectorXd& eps);

/// Adjoint reconstruction: solves B u_adj = G eps + B^T eps.
Eigen::VectorXd reconstruct_adjoint(const SparseMat& gram, const SparseMat& dg_op, const Eigen::VectorXd& eps);

/// Reference dG solve B theta = ell.
Eigen::VectorXd solve_dg_reference(const SparseMat& dg_op, const Eigen::VectorXd& ell);

/// Nonlinear reconstructions at a converged state (J the Jacobian there).
Eigen::VectorXd reconstruct_fine_nonlinear(const SparseMat& gram, const SparseMat& jacobian,
                                           const Eigen::VectorXd& eps);
Eigen::VectorXd reconstruct_adjoint_nonlinear(const SparseMat& gram, const SparseMat& jacobian,
                                              const Eigen::VectorXd& eps);

/// Reference nonlinear dG solve by damped Newton in the broken space.
Eigen::VectorXd solve_dg_reference_nonlinear(const NonlinearForm& form, const SparseMat& gram,
                                             const Eigen::VectorXd& initial, const NewtonConfig& config);

} // namespace resmin
