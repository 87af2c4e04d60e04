#include "resmin/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace resmin {

ElementIndicators localize_estimator(const FunctionSpace& broken, const ProblemDef& problem, GramKind kind,
                                     const Eigen::VectorXd& eps) {
    ElementIndicators ind;
    ind.eta_sq = gram_norm_cellwise(broken, problem.kappa, problem.beta, kind, eps);
    ind.total = std::accumulate(ind.eta_sq.begin(), ind.eta_sq.end(), 0.0);
    return ind;
}

std::vector<int> dorfler_mark(const ElementIndicators& indicators, double fraction) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw InvalidInput("dorfler_mark: fraction must lie in (0, 1]");
    const int n = static_cast<int>(indicators.eta_sq.size());
    double total = 0.0;
    for (double v : indicators.eta_sq) total += v;
    std::vector<int> marked;
    if (!(total > 0.0)) return marked;

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double ea = indicators.eta_sq[static_cast<std::size_t>(a)];
        const double eb = indicators.eta_sq[static_cast<std::size_t>(b)];
        return ea != eb ? ea > eb : a < b;
    });

    const double target = fraction * total;
    double cum = 0.0;
    for (int c : order) {
        if (indicators.eta_sq[static_cast<std::size_t>(c)] <= 0.0) break;
        marked.push_back(c);
        cum += indicators.eta_sq[static_cast<std::size_t>(c)];
        if (cum >= target) break;
    }
    std::sort(marked.begin(), marked.end());
    return marked;
}

double fit_rate(const std::vector<double>& dofs, const std::vector<double>& values, int window) {
    if (dofs.size() != values.size()) throw InvalidInput("fit_rate: size mismatch");
    const int n = static_cast<int>(dofs.size());
    const int w = std::min(window, n);
    if (w < 2) throw InvalidInput("fit_rate: need at least two samples");

    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = n - w; i < n; ++i) {
        const double v = values[static_cast<std::size_t>(i)];
        const double d = dofs[static_cast<std::size_t>(i)];
        if (!(v > 0.0) || !(d > 0.0)) throw InvalidInput("fit_rate: values and dofs must be positive");
        const double x = 0.5 * std::log(d); // log(dofs^(1/2))
        const double y = std::log(v);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (w * sxy - sx * sy) / (w * sxx - sx * sx);
    return -slope;
}

Eigen::VectorXd transfer_coarse(const FunctionSpace& old_conforming, const Eigen::VectorXd& old_coeffs,
                                const FunctionSpace& new_conforming) {
    const Mesh& new_mesh = new_conforming.mesh();
    const Mesh& old_mesh = old_conforming.mesh();
    const int p = new_conforming.degree();
    if (p != old_conforming.degree()) throw InvalidInput("transfer_coarse: degree mismatch");
    const auto& nodes = reference_nodes(p);

    Eigen::VectorXd out(new_conforming.total_dofs());
    for (int c = 0; c < new_mesh.n_cells(); ++c) {
        const int parent = new_mesh.parent_cell(c);
        if (parent < 0 || parent >= old_mesh.n_cells())
            throw InvalidInput("transfer_coarse: new mesh has no parent map into the old mesh");
        const CellMap to_new = cell_map(new_mesh, c);
        const CellMap to_old = cell_map(old_mesh, parent);
        const auto dofs = new_conforming.cell_dofs(c);
        for (std::size_t l = 0; l < nodes.size(); ++l) {
            const Vec2 x = to_new.to_physical(nodes[l]);
            out[dofs[l]] = old_conforming.eval(old_coeffs, parent, to_old.to_reference(x));
        }
    }
    return out;
}

AdaptiveResult adaptive_loop(const Benchmark& benchmark, const AdaptiveOptions& options) {
    if (options.levels < 1) throw InvalidInput("adaptive_loop: levels must be >= 1");
    if (!(options.eta_ref > 0.0) || options.eta_ref > 1.0)
        throw InvalidInput("adaptive_loop: eta_ref must lie in (0, 1]");
    if (options.degree < 1) throw InvalidInput("adaptive_loop: degree must be >= 1");

    AdaptiveResult result;
    auto mesh = std::make_shared<const Mesh>(benchmark.initial_mesh);
    Eigen::VectorXd guess;

    for (int lvl = 0; lvl < options.levels; ++lvl) {
        try {
            LevelContext level = make_level(mesh, benchmark.problem, options.degree);

            SolveOptions sopts;
            sopts.reconstructions = options.reconstructions;
            sopts.reference = options.reference;
            sopts.newton = options.newton;
            if (benchmark.nonlinear) {
                if (guess.size() == level.conforming->total_dofs()) sopts.initial_guess = guess;
                else if (benchmark.initial_guess)
                    sopts.initial_guess = interpolate(benchmark.initial_guess, *level.conforming);
            }

            ScaleSolutions sol = benchmark.nonlinear ? solve_level_nonlinear(level, sopts)
                                                     : solve_level_linear(level, sopts);

            ConvergenceRecord rec;
            rec.level = lvl;
            rec.dofs = level.total_dofs();
            rec.est_vh = level.vh_norm(sol.eps);
            rec.newton_iters = benchmark.nonlinear ? sol.newton_iterations : -1;
            if (benchmark.problem.exact) rec.errors = compute_errors(sol, benchmark, level);
            result.records.push_back(rec);

            if (lvl + 1 == options.levels) {
                result.final_solutions = std::move(sol);
                result.final_mesh = mesh;
                break;
            }

            const ElementIndicators ind =
                localize_estimator(*level.broken, benchmark.problem, level.gram_kind, sol.eps);
            const std::vector<int> marked = dorfler_mark(ind, options.eta_ref);
            auto refined = std::make_shared<const Mesh>(mesh->refine(marked));

            if (benchmark.nonlinear) {
                const FunctionSpace next_conf(refined, options.degree, Continuity::Conforming);
                guess = transfer_coarse(*level.conforming, sol.u_bar, next_conf);
            }
            mesh = std::move(refined);
        } catch (const SolverError& e) {
            throw SolverError("level " + std::to_string(lvl) + " (" + benchmark.name + "): " + e.what());
        }
    }
    return result;
}

} // namespace resmin
