#include "resmin/solver.hpp"

#include <cmath>
#include <string>

namespace resmin {

double LevelContext::vh_norm(const Eigen::VectorXd& broken_vec) const {
    return std::sqrt(std::max(0.0, broken_vec.dot(gram * broken_vec)));
}

LevelContext make_level(std::shared_ptr<const Mesh> mesh, const ProblemDef& problem, int degree) {
    LevelContext level;
    level.mesh = std::move(mesh);
    level.broken = std::make_shared<FunctionSpace>(level.mesh, degree, Continuity::Broken);
    level.conforming = std::make_shared<FunctionSpace>(level.mesh, degree, Continuity::Conforming);
    level.embedding = cg_embedding(*level.conforming, *level.broken);
    level.gram_kind = problem.nonlinear() ? GramKind::Convective : GramKind::Advective;
    level.gram = assemble_gram(*level.broken, problem.kappa, problem.beta, level.gram_kind).matrix;

    if (problem.nonlinear()) {
        level.nonlinear = std::make_unique<NonlinearForm>(*level.broken, problem);
    } else {
        SparseMat b = assemble_swip(*level.broken, *level.broken, problem.kappa, problem.bc).matrix;
        if (problem.has_advection())
            b += assemble_upwind(*level.broken, *level.broken, problem.beta, problem.bc).matrix;
        level.dg_op = std::move(b);
        level.rhs = assemble_rhs(*level.broken, problem);
    }
    return level;
}

Eigen::VectorXd reconstruct_fine(const SparseMat& gram, const SparseMat& dg_op, const Eigen::VectorXd& eps) {
    return solve_square(dg_op, gram * eps);
}

Eigen::VectorXd reconstruct_adjoint(const SparseMat& gram, const SparseMat& dg_op, const Eigen::VectorXd& eps) {
    return solve_square(dg_op, gram * eps + dg_op.transpose() * eps);
}

Eigen::VectorXd solve_dg_reference(const SparseMat& dg_op, const Eigen::VectorXd& ell) {
    return solve_square(dg_op, ell);
}

Eigen::VectorXd reconstruct_fine_nonlinear(const SparseMat& gram, const SparseMat& jacobian,
                                           const Eigen::VectorXd& eps) {
    return solve_square(jacobian, gram * eps);
}

Eigen::VectorXd reconstruct_adjoint_nonlinear(const SparseMat& gram, const SparseMat& jacobian,
                                              const Eigen::VectorXd& eps) {
    return solve_square(jacobian, gram * eps + jacobian.transpose() * eps);
}

ScaleSolutions solve_level_linear(const LevelContext& level, const SolveOptions& options) {
    const SparseMat coarse_op = level.dg_op * level.embedding;

    SaddleSystem system;
    system.gram = level.gram;
    system.coarse_op = coarse_op;
    system.rhs = level.rhs;
    const SaddlePoint saddle = solve_saddle(system);

    ScaleSolutions out;
    out.eps = saddle.eps;
    out.u_bar = saddle.u_bar;

    if (options.reconstructions || options.reference) {
        const SquareSolver dg(level.dg_op);
        if (options.reconstructions) {
            const Eigen::VectorXd g_eps = level.gram * out.eps;
            out.u_fine = dg.solve(g_eps);
            out.u_adjoint = dg.solve(g_eps + level.dg_op.transpose() * out.eps);
            out.u_full = level.embedding * out.u_bar + out.u_fine;
            out.phi = level.embedding * out.u_bar + out.u_adjoint;
        }
        if (options.reference) out.theta = dg.solve(level.rhs);
    }
    return out;
}

namespace {

// Norm of the full nonlinear saddle residual at (eps, ubar).
double combined_residual_norm(const LevelContext& level, const Eigen::VectorXd& residual_broken,
                              const SparseMat& coarse_op, const Eigen::VectorXd& eps) {
    const Eigen::VectorXd r1 = residual_broken + level.gram * eps;
    const Eigen::VectorXd r2 = coarse_op.transpose() * eps;
    return std::sqrt(r1.squaredNorm() + r2.squaredNorm());
}

} // namespace

ScaleSolutions solve_level_nonlinear(const LevelContext& level, const SolveOptions& options) {
    if (!level.nonlinear) throw InvalidInput("solve_level_nonlinear: level has no nonlinear form");
    const NonlinearForm& form = *level.nonlinear;
    const NewtonConfig& cfg = options.newton;
    if (!(cfg.tolerance > 0.0)) throw InvalidInput("NewtonConfig: tolerance must be positive");
    if (cfg.max_iterations < 1) throw InvalidInput("NewtonConfig: max_iterations must be >= 1");

    const Eigen::Index m = level.conforming->total_dofs();
    const Eigen::Index n = level.broken->total_dofs();

    Eigen::VectorXd u_bar = options.initial_guess.size() == m ? options.initial_guess
                                                              : Eigen::VectorXd::Zero(m);
    Eigen::VectorXd eps = Eigen::VectorXd::Zero(n);

    Eigen::VectorXd residual = form.residual(level.embedding * u_bar);
    SparseMat jac = form.jacobian(level.embedding * u_bar);
    SparseMat coarse_op = jac * level.embedding;
    double rho = combined_residual_norm(level, residual, coarse_op, eps);

    ScaleSolutions out;
    bool converged = false;
    int it = 0;
    for (; it < cfg.max_iterations; ++it) {
        const Eigen::VectorXd rhs1 = -(residual + level.gram * eps);
        const Eigen::VectorXd rhs2 = -(coarse_op.transpose() * eps);
        // Exact Newton matrix of the optimality system: the (2,2) block carries
        // the curvature of the nonlinear form contracted with eps.
        const SparseMat hess = form.hessian_contraction(level.embedding * u_bar, eps);
        const SparseMat curvature = level.embedding.transpose() * hess * level.embedding;
        const SaddlePoint step = solve_saddle(level.gram, coarse_op, curvature, rhs1, rhs2);

        // Backtracking: accept the longest step not increasing the combined
        // saddle residual.
        double k = 1.0;
        bool accepted = false;
        Eigen::VectorXd trial_res;
        SparseMat trial_jac, trial_coarse;
        while (k >= cfg.min_damping) {
            const Eigen::VectorXd u_trial = u_bar + k * step.u_bar;
            const Eigen::VectorXd eps_trial = eps + k * step.eps;
            try {
                trial_res = form.residual(level.embedding * u_trial);
            } catch (const SolverError&) {
                k *= 0.5; // non-finite flux: shorten the step
                continue;
            }
            trial_jac = form.jacobian(level.embedding * u_trial);
            trial_coarse = trial_jac * level.embedding;
            const double rho_trial = combined_residual_norm(level, trial_res, trial_coarse, eps_trial);
            if (rho_trial <= rho * (1.0 + 1e-12)) {
                u_bar = u_trial;
                eps = eps_trial;
                residual = std::move(trial_res);
                jac = std::move(trial_jac);
                coarse_op = std::move(trial_coarse);
                rho = rho_trial;
                accepted = true;
                break;
            }
            k *= 0.5;
        }
        if (!accepted)
            throw SolverError("newton: damping fell below 2^-10 at iteration " + std::to_string(it + 1));

        // realized coarse increment, |u_{i+1} - u_i| in the discrete norm
        const double increment_norm = k * level.vh_norm(level.embedding * step.u_bar);
        out.residual_history.push_back(rho);
        out.final_increment_norm = increment_norm;
        if (increment_norm < cfg.tolerance) {
            converged = true;
            ++it;
            break;
        }
    }
    out.newton_iterations = it;
    if (!converged)
        throw SolverError("newton: no convergence in " + std::to_string(cfg.max_iterations) +
                          " iterations (last increment " + std::to_string(out.final_increment_norm) + ")");

    out.eps = eps;
    out.u_bar = u_bar;

    if (options.reconstructions) {
        const SquareSolver jsolve(jac);
        const Eigen::VectorXd g_eps = level.gram * eps;
        out.u_fine = jsolve.solve(g_eps);
        out.u_adjoint = jsolve.solve(g_eps + jac.transpose() * eps);
        out.u_full = level.embedding * u_bar + out.u_fine;
        out.phi = level.embedding * u_bar + out.u_adjoint;
    }
    if (options.reference)
        out.theta = solve_dg_reference_nonlinear(form, level.gram, level.embedding * u_bar, cfg);
    return out;
}

Eigen::VectorXd solve_dg_reference_nonlinear(const NonlinearForm& form, const SparseMat& gram,
                                             const Eigen::VectorXd& initial, const NewtonConfig& config) {
    Eigen::VectorXd theta = initial;
    Eigen::VectorXd residual = form.residual(theta);
    double rho = residual.norm();
    for (int it = 0; it < config.max_iterations; ++it) {
        const SparseMat jac = form.jacobian(theta);
        const Eigen::VectorXd step = SquareSolver(jac).solve(-residual);
        const double inc = std::sqrt(std::max(0.0, step.dot(gram * step)));

        double k = 1.0;
        bool accepted = false;
        while (k >= config.min_damping) {
            const Eigen::VectorXd trial = theta + k * step;
            Eigen::VectorXd trial_res;
            try {
                trial_res = form.residual(trial);
            } catch (const SolverError&) {
                k *= 0.5;
                continue;
            }
            if (trial_res.norm() <= rho * (1.0 + 1e-12)) {
                theta = trial;
                residual = std::move(trial_res);
                rho = residual.norm();
                accepted = true;
                break;
            }
            k *= 0.5;
        }
        if (!accepted) throw SolverError("dg reference newton: damping fell below 2^-10");
        if (inc < config.tolerance) return theta;
    }
    throw SolverError("dg reference newton: no convergence in " + std::to_string(config.max_iterations) +
                      " iterations");
}

ScaleSolutions solve_linear_resmin(std::shared_ptr<const Mesh> mesh, const ProblemDef& problem, int degree,
                                   const SolveOptions& options) {
    if (problem.nonlinear()) throw InvalidInput("solve_linear_resmin: problem has a nonlinear flux");
    const LevelContext level = make_level(std::move(mesh), problem, degree);
    return solve_level_linear(level, options);
}

ScaleSolutions solve_nonlinear_resmin(std::shared_ptr<const Mesh> mesh, const ProblemDef& problem, int degree,
                                      const NewtonConfig& config, const Eigen::VectorXd& initial_guess,
                                      const SolveOptions& options) {
    if (!problem.nonlinear()) throw InvalidInput("solve_nonlinear_resmin: problem has no flux");
    const LevelContext level = make_level(std::move(mesh), problem, degree);
    SolveOptions opts = options;
    opts.newton = config;
    opts.initial_guess = initial_guess;
    return solve_level_nonlinear(level, opts);
}

} // namespace resmin
