#include "resmin/forms.hpp"

#include <cmath>
#include <vector>

namespace resmin {

BcType ProblemDef::bc_of(const std::string& tag) const {
    const auto it = bc.find(tag);
    if (it == bc.end()) throw InvalidInput("problem: boundary tag '" + tag + "' has no condition");
    return it->second;
}

DiffusionWeights diffusion_weights(const Eigen::Matrix2d& kappa1, const Eigen::Matrix2d& kappa2,
                                   const Vec2& normal) {
    const double d1 = normal.dot(kappa1 * normal);
    const double d2 = normal.dot(kappa2 * normal);
    if (!(d1 > 0.0) || !(d2 > 0.0))
        throw InvalidInput("diffusion_weights: non-positive normal diffusivity");
    DiffusionWeights w;
    w.w1 = d1 / (d1 + d2);
    w.w2 = d2 / (d1 + d2);
    w.gamma = 2.0 * d1 * d2 / (d1 + d2);
    return w;
}

double penalty_eta_e(const ElementGeometry& geometry1, const ElementGeometry* geometry2, int p, int d) {
    const double scale = static_cast<double>((p + 1) * (p + d)) / d;
    const double r1 = geometry1.perimeter / geometry1.area;
    if (geometry2 == nullptr) return scale * r1;
    const double r2 = geometry2->perimeter / geometry2->area;
    return scale * 0.5 * (r1 + r2);
}

LaxFriedrichsFlux lax_friedrichs_flux(double u1, double u2, const Vec2& normal,
                                      const FluxFunction& flux, const FluxFunction& flux_deriv,
                                      LfFaceKind kind, double u_dirichlet) {
    LaxFriedrichsFlux out;
    switch (kind) {
    case LfFaceKind::Interior: {
        out.eta = std::max(std::abs(flux_deriv(u1).dot(normal)), std::abs(flux_deriv(u2).dot(normal)));
        out.value = 0.5 * (flux(u1).dot(normal) + flux(u2).dot(normal) + out.eta * (u1 - u2));
        break;
    }
    case LfFaceKind::Dirichlet: {
        out.eta = std::abs(flux_deriv(u1).dot(normal));
        out.value = 0.5 * (flux(u1).dot(normal) + out.eta * u1) +
                    0.5 * (flux(u_dirichlet).dot(normal) - out.eta * u_dirichlet);
        break;
    }
    case LfFaceKind::Neumann: {
        out.eta = 0.0;
        out.value = flux(u1).dot(normal);
        break;
    }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Assembly machinery.

namespace {

// Zero-diffusion faces degrade gracefully to zero-weight penalties.
DiffusionWeights weights_or_zero(const Eigen::Matrix2d& k1, const Eigen::Matrix2d& k2, const Vec2& n) {
    const double d1 = n.dot(k1 * n);
    const double d2 = n.dot(k2 * n);
    if (d1 + d2 <= 0.0) return DiffusionWeights{0.5, 0.5, 0.0};
    DiffusionWeights w;
    w.w1 = d1 / (d1 + d2);
    w.w2 = d2 / (d1 + d2);
    w.gamma = (d1 > 0.0 && d2 > 0.0) ? 2.0 * d1 * d2 / (d1 + d2) : 0.0;
    return w;
}

double boundary_gamma(const Eigen::Matrix2d& k, const Vec2& n) { return n.dot(k * n); }

struct CellTables {
    Quadrature rule;
    Eigen::MatrixXd vals;        // (q, i)
    std::vector<Vec2> ref_grads; // q*nloc + i
};

CellTables cell_tables(int p, int quad_degree) {
    CellTables t;
    t.rule = quadrature_rule(Quadrature::Entity::Triangle, quad_degree);
    const int nl = lagrange_node_count(p);
    const int nq = static_cast<int>(t.rule.points.size());
    t.vals.resize(nq, nl);
    t.ref_grads.resize(static_cast<std::size_t>(nq) * static_cast<std::size_t>(nl));
    std::vector<double> v(static_cast<std::size_t>(nl));
    std::vector<Vec2> g(static_cast<std::size_t>(nl));
    for (int q = 0; q < nq; ++q) {
        eval_basis(p, t.rule.points[static_cast<std::size_t>(q)], v, g);
        for (int i = 0; i < nl; ++i) {
            t.vals(q, i) = v[static_cast<std::size_t>(i)];
            t.ref_grads[static_cast<std::size_t>(q) * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)] =
                g[static_cast<std::size_t>(i)];
        }
    }
    return t;
}

// Basis of one incident cell evaluated at physical face quadrature points.
struct SideEval {
    std::vector<double> vals; // q*nloc + i
    std::vector<Vec2> grads;  // physical gradients
};

SideEval eval_side(int p, int nloc, const CellMap& map, const std::vector<Vec2>& pts) {
    SideEval se;
    se.vals.resize(pts.size() * static_cast<std::size_t>(nloc));
    se.grads.resize(pts.size() * static_cast<std::size_t>(nloc));
    std::vector<double> v(static_cast<std::size_t>(nloc));
    std::vector<Vec2> g(static_cast<std::size_t>(nloc));
    for (std::size_t q = 0; q < pts.size(); ++q) {
        eval_basis(p, map.to_reference(pts[q]), v, g);
        for (int i = 0; i < nloc; ++i) {
            se.vals[q * static_cast<std::size_t>(nloc) + static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(i)];
            se.grads[q * static_cast<std::size_t>(nloc) + static_cast<std::size_t>(i)] =
                map.grad_to_physical(g[static_cast<std::size_t>(i)]);
        }
    }
    return se;
}

struct FaceWork {
    std::vector<Vec2> points;    // physical quadrature points
    std::vector<double> weights; // physical weights (include |F|)
};

FaceWork face_work(const Mesh& mesh, const Face& f, const Quadrature& edge_rule) {
    FaceWork w;
    const Vec2 a = mesh.vertex(f.vertices[0]);
    const Vec2 b = mesh.vertex(f.vertices[1]);
    for (std::size_t q = 0; q < edge_rule.points.size(); ++q) {
        const double t = edge_rule.points[q].x();
        w.points.push_back(a + t * (b - a));
        w.weights.push_back(edge_rule.weights[q] * f.diameter);
    }
    return w;
}

void check_pair(const FunctionSpace& test, const FunctionSpace& trial, const char* what) {
    if (test.mesh_ptr().get() != trial.mesh_ptr().get() || test.degree() != trial.degree() ||
        test.continuity() != Continuity::Broken || trial.continuity() != Continuity::Broken)
        throw InvalidInput(std::string(what) + ": expects broken test/trial spaces on the same mesh and degree");
}

void scatter(std::vector<Eigen::Triplet<double>>& trips, std::span<const int> rows,
             std::span<const int> cols, const Eigen::MatrixXd& local) {
    for (int i = 0; i < local.rows(); ++i)
        for (int j = 0; j < local.cols(); ++j)
            if (local(i, j) != 0.0)
                trips.emplace_back(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)],
                                   local(i, j));
}

void merge_dofs(std::span<const int> d1, std::span<const int> d2, std::vector<int>& out) {
    const std::size_t nl = d1.size();
    out.resize(2 * nl);
    for (std::size_t i = 0; i < nl; ++i) {
        out[i] = d1[i];
        out[nl + i] = d2[i];
    }
}

double side_state(const SideEval& se, std::span<const int> dofs, const Eigen::VectorXd& u, std::size_t q, int nl) {
    double out = 0.0;
    for (int i = 0; i < nl; ++i)
        out += u[dofs[static_cast<std::size_t>(i)]] *
               se.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
    return out;
}

} // namespace

AssembledOperator assemble_swip(const FunctionSpace& test, const FunctionSpace& trial,
                                const TensorField& kappa, const BcMap& bc) {
    check_pair(test, trial, "assemble_swip");
    const FunctionSpace& sp = test;
    const Mesh& mesh = sp.mesh();
    const int p = sp.degree();
    const int nl = sp.local_dofs();

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(mesh.n_cells()) * static_cast<std::size_t>(nl * nl) * 4);

    const CellTables tab = cell_tables(p, 2 * p + 1);
    const int nq = static_cast<int>(tab.rule.points.size());

    Eigen::MatrixXd local(nl, nl);
    std::vector<Vec2> phys_grads(static_cast<std::size_t>(nl));
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        local.setZero();
        for (int q = 0; q < nq; ++q) {
            const double w = tab.rule.weights[static_cast<std::size_t>(q)] * map.det;
            const Vec2 x = map.to_physical(tab.rule.points[static_cast<std::size_t>(q)]);
            const Eigen::Matrix2d k = kappa(x);
            for (int i = 0; i < nl; ++i)
                phys_grads[static_cast<std::size_t>(i)] = map.grad_to_physical(
                    tab.ref_grads[static_cast<std::size_t>(q) * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)]);
            for (int i = 0; i < nl; ++i) {
                const Vec2 kg = k * phys_grads[static_cast<std::size_t>(i)];
                for (int j = 0; j < nl; ++j)
                    local(i, j) += w * kg.dot(phys_grads[static_cast<std::size_t>(j)]);
            }
        }
        scatter(trips, sp.cell_dofs(c), sp.cell_dofs(c), local);
    }

    const FaceSet faces = face_topology(mesh);
    const Quadrature edge_rule = quadrature_rule(Quadrature::Entity::Edge, 2 * p + 1);

    Eigen::MatrixXd face_local(2 * nl, 2 * nl);
    std::vector<int> dofs;
    for (const Face& f : faces.faces()) {
        const FaceWork fw = face_work(mesh, f, edge_rule);
        const int c1 = f.cells[0];
        const CellMap m1 = cell_map(mesh, c1);
        const SideEval s1 = eval_side(p, nl, m1, fw.points);
        const Eigen::Matrix2d k1 = kappa(mesh.centroid(c1));
        const ElementGeometry g1 = mesh.geometry(c1);

        if (!f.boundary) {
            const int c2 = f.cells[1];
            const SideEval s2 = eval_side(p, nl, cell_map(mesh, c2), fw.points);
            const Eigen::Matrix2d k2 = kappa(mesh.centroid(c2));
            const ElementGeometry g2 = mesh.geometry(c2);
            const DiffusionWeights dw = weights_or_zero(k1, k2, f.normal);
            const double eta = penalty_eta_e(g1, &g2, p);

            face_local.setZero();
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double w = fw.weights[q];
                auto val = [&](int side, int i) {
                    const auto& s = side == 0 ? s1 : s2;
                    return s.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                };
                auto kgn = [&](int side, int i) {
                    const auto& s = side == 0 ? s1 : s2;
                    const auto& k = side == 0 ? k1 : k2;
                    return (k * s.grads[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)]).dot(f.normal);
                };
                for (int si = 0; si < 2; ++si) {
                    const double sign_i = si == 0 ? 1.0 : -1.0;
                    const double wavg_i = si == 0 ? dw.w1 : dw.w2;
                    for (int i = 0; i < nl; ++i) {
                        const double jv = sign_i * val(si, i);
                        const double av = wavg_i * kgn(si, i);
                        for (int sj = 0; sj < 2; ++sj) {
                            const double sign_j = sj == 0 ? 1.0 : -1.0;
                            const double wavg_j = sj == 0 ? dw.w1 : dw.w2;
                            for (int j = 0; j < nl; ++j) {
                                const double ju = sign_j * val(sj, j);
                                const double au = wavg_j * kgn(sj, j);
                                face_local(si * nl + i, sj * nl + j) +=
                                    w * (-jv * au - av * ju + eta * dw.gamma * jv * ju);
                            }
                        }
                    }
                }
            }
            merge_dofs(sp.cell_dofs(c1), sp.cell_dofs(f.cells[1]), dofs);
            scatter(trips, dofs, dofs, face_local);
        } else {
            const auto it = bc.find(f.tag);
            if (it == bc.end())
                throw InvalidInput("assemble_swip: boundary tag '" + f.tag + "' has no condition");
            if (it->second != BcType::Dirichlet) continue; // Neumann faces contribute nothing
            const double eta = penalty_eta_e(g1, nullptr, p);
            const double gamma = boundary_gamma(k1, f.normal);

            local.setZero();
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double w = fw.weights[q];
                for (int i = 0; i < nl; ++i) {
                    const double vi = s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                    const double kgni =
                        (k1 * s1.grads[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)]).dot(f.normal);
                    for (int j = 0; j < nl; ++j) {
                        const double vj = s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)];
                        const double kgnj =
                            (k1 * s1.grads[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)]).dot(f.normal);
                        local(i, j) += w * (-vi * kgnj - kgni * vj + eta * gamma * vi * vj);
                    }
                }
            }
            scatter(trips, sp.cell_dofs(c1), sp.cell_dofs(c1), local);
        }
    }

    AssembledOperator op;
    op.matrix.resize(sp.total_dofs(), sp.total_dofs());
    op.matrix.setFromTriplets(trips.begin(), trips.end());
    op.test = &test;
    op.trial = &trial;
    return op;
}

AssembledOperator assemble_upwind(const FunctionSpace& test, const FunctionSpace& trial,
                                  const VectorField& beta, const BcMap& bc) {
    check_pair(test, trial, "assemble_upwind");
    (void)bc; // inflow is classified by the sign of beta.n, not by tag
    const FunctionSpace& sp = test;
    AssembledOperator op;
    op.test = &test;
    op.trial = &trial;
    op.matrix.resize(sp.total_dofs(), sp.total_dofs());
    if (!beta) return op;

    const Mesh& mesh = sp.mesh();
    const int p = sp.degree();
    const int nl = sp.local_dofs();
    std::vector<Eigen::Triplet<double>> trips;

    const CellTables tab = cell_tables(p, 2 * p + 1);
    const int nq = static_cast<int>(tab.rule.points.size());

    Eigen::MatrixXd local(nl, nl);
    std::vector<Vec2> phys_grads(static_cast<std::size_t>(nl));
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        local.setZero();
        for (int q = 0; q < nq; ++q) {
            const double w = tab.rule.weights[static_cast<std::size_t>(q)] * map.det;
            const Vec2 b = beta(map.to_physical(tab.rule.points[static_cast<std::size_t>(q)]));
            for (int j = 0; j < nl; ++j)
                phys_grads[static_cast<std::size_t>(j)] = map.grad_to_physical(
                    tab.ref_grads[static_cast<std::size_t>(q) * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)]);
            for (int i = 0; i < nl; ++i) {
                const double vi = tab.vals(q, i);
                for (int j = 0; j < nl; ++j)
                    local(i, j) += w * vi * b.dot(phys_grads[static_cast<std::size_t>(j)]);
            }
        }
        scatter(trips, sp.cell_dofs(c), sp.cell_dofs(c), local);
    }

    const FaceSet faces = face_topology(mesh);
    const Quadrature edge_rule = quadrature_rule(Quadrature::Entity::Edge, 2 * p + 1);

    Eigen::MatrixXd face_local(2 * nl, 2 * nl);
    std::vector<int> dofs;
    for (const Face& f : faces.faces()) {
        const FaceWork fw = face_work(mesh, f, edge_rule);
        const int c1 = f.cells[0];
        const SideEval s1 = eval_side(p, nl, cell_map(mesh, c1), fw.points);

        if (!f.boundary) {
            const int c2 = f.cells[1];
            const SideEval s2 = eval_side(p, nl, cell_map(mesh, c2), fw.points);
            face_local.setZero();
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double w = fw.weights[q];
                const double bn = beta(fw.points[q]).dot(f.normal);
                auto val = [&](int side, int i) {
                    const auto& s = side == 0 ? s1 : s2;
                    return s.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                };
                for (int si = 0; si < 2; ++si) {
                    const double sign_i = si == 0 ? 1.0 : -1.0;
                    for (int i = 0; i < nl; ++i) {
                        const double jv = sign_i * val(si, i);
                        const double avgv = 0.5 * val(si, i);
                        for (int sj = 0; sj < 2; ++sj) {
                            const double sign_j = sj == 0 ? 1.0 : -1.0;
                            for (int j = 0; j < nl; ++j) {
                                const double ju = sign_j * val(sj, j);
                                face_local(si * nl + i, sj * nl + j) +=
                                    w * (0.5 * std::abs(bn) * jv * ju - avgv * bn * ju);
                            }
                        }
                    }
                }
            }
            merge_dofs(sp.cell_dofs(c1), sp.cell_dofs(c2), dofs);
            scatter(trips, dofs, dofs, face_local);
        } else {
            // Weak inflow term (v, |beta.n| u), detected per quadrature point;
            // its boundary-data counterpart lives in the rhs.
            local.setZero();
            bool any = false;
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double bn = beta(fw.points[q]).dot(f.normal);
                if (bn >= 0.0) continue;
                any = true;
                const double w = fw.weights[q];
                for (int i = 0; i < nl; ++i) {
                    const double vi = s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                    for (int j = 0; j < nl; ++j)
                        local(i, j) += w * (-bn) * vi *
                                       s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)];
                }
            }
            if (any) scatter(trips, sp.cell_dofs(c1), sp.cell_dofs(c1), local);
        }
    }

    op.matrix.setFromTriplets(trips.begin(), trips.end());
    return op;
}

AssembledOperator assemble_gram(const FunctionSpace& space, const TensorField& kappa,
                                const VectorField& beta, GramKind kind) {
    if (space.continuity() != Continuity::Broken)
        throw InvalidInput("assemble_gram: expects a broken space");
    const Mesh& mesh = space.mesh();
    const int p = space.degree();
    const int nl = space.local_dofs();

    std::vector<Eigen::Triplet<double>> trips;
    const CellTables tab = cell_tables(p, 2 * p + 1);
    const int nq = static_cast<int>(tab.rule.points.size());

    Eigen::MatrixXd local(nl, nl);
    std::vector<Vec2> phys_grads(static_cast<std::size_t>(nl));
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        const double hk = mesh.geometry(c).diameter;
        local.setZero();
        for (int q = 0; q < nq; ++q) {
            const double w = tab.rule.weights[static_cast<std::size_t>(q)] * map.det;
            const Vec2 x = map.to_physical(tab.rule.points[static_cast<std::size_t>(q)]);
            const Eigen::Matrix2d k = kappa(x);
            for (int j = 0; j < nl; ++j)
                phys_grads[static_cast<std::size_t>(j)] = map.grad_to_physical(
                    tab.ref_grads[static_cast<std::size_t>(q) * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)]);
            if (kind == GramKind::Advective) {
                const Vec2 b = beta ? beta(x) : Vec2(Vec2::Zero());
                for (int i = 0; i < nl; ++i) {
                    const double vi = tab.vals(q, i);
                    const double bgi = b.dot(phys_grads[static_cast<std::size_t>(i)]);
                    const Vec2 kgi = k * phys_grads[static_cast<std::size_t>(i)];
                    for (int j = 0; j < nl; ++j)
                        local(i, j) += w * (vi * tab.vals(q, j) +
                                            hk * bgi * b.dot(phys_grads[static_cast<std::size_t>(j)]) +
                                            kgi.dot(k * phys_grads[static_cast<std::size_t>(j)]));
                }
            } else {
                for (int i = 0; i < nl; ++i) {
                    const double vi = tab.vals(q, i);
                    const Vec2 gi = phys_grads[static_cast<std::size_t>(i)];
                    const Vec2 kgi = k * gi;
                    for (int j = 0; j < nl; ++j)
                        local(i, j) += w * (vi * tab.vals(q, j) +
                                            hk * gi.dot(phys_grads[static_cast<std::size_t>(j)]) +
                                            kgi.dot(k * phys_grads[static_cast<std::size_t>(j)]));
                }
            }
        }
        scatter(trips, space.cell_dofs(c), space.cell_dofs(c), local);
    }

    const FaceSet faces = face_topology(mesh);
    const Quadrature edge_rule = quadrature_rule(Quadrature::Entity::Edge, 2 * p + 1);

    Eigen::MatrixXd face_local(2 * nl, 2 * nl);
    std::vector<int> dofs;
    for (const Face& f : faces.faces()) {
        const FaceWork fw = face_work(mesh, f, edge_rule);
        const int c1 = f.cells[0];
        const SideEval s1 = eval_side(p, nl, cell_map(mesh, c1), fw.points);
        const Eigen::Matrix2d k1 = kappa(mesh.centroid(c1));
        const ElementGeometry g1 = mesh.geometry(c1);

        auto adv_weight = [&](std::size_t q) {
            if (kind != GramKind::Advective) return 1.0;
            if (!beta) return 0.0;
            return 0.5 * std::abs(beta(fw.points[q]).dot(f.normal));
        };

        if (!f.boundary) {
            const int c2 = f.cells[1];
            const SideEval s2 = eval_side(p, nl, cell_map(mesh, c2), fw.points);
            const Eigen::Matrix2d k2 = kappa(mesh.centroid(c2));
            const ElementGeometry g2 = mesh.geometry(c2);
            const double eta_gamma = penalty_eta_e(g1, &g2, p) * weights_or_zero(k1, k2, f.normal).gamma;

            face_local.setZero();
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double coeff = fw.weights[q] * (adv_weight(q) + eta_gamma);
                auto val = [&](int side, int i) {
                    const auto& s = side == 0 ? s1 : s2;
                    return s.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                };
                for (int si = 0; si < 2; ++si) {
                    const double sign_i = si == 0 ? 1.0 : -1.0;
                    for (int i = 0; i < nl; ++i) {
                        const double jv = sign_i * val(si, i);
                        for (int sj = 0; sj < 2; ++sj) {
                            const double sign_j = sj == 0 ? 1.0 : -1.0;
                            for (int j = 0; j < nl; ++j)
                                face_local(si * nl + i, sj * nl + j) += coeff * jv * sign_j * val(sj, j);
                        }
                    }
                }
            }
            merge_dofs(space.cell_dofs(c1), space.cell_dofs(c2), dofs);
            scatter(trips, dofs, dofs, face_local);
        } else {
            const double eta_gamma = penalty_eta_e(g1, nullptr, p) * boundary_gamma(k1, f.normal);
            local.setZero();
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double coeff = fw.weights[q] * (adv_weight(q) + eta_gamma);
                for (int i = 0; i < nl; ++i)
                    for (int j = 0; j < nl; ++j)
                        local(i, j) += coeff * s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)] *
                                       s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)];
            }
            scatter(trips, space.cell_dofs(c1), space.cell_dofs(c1), local);
        }
    }

    AssembledOperator op;
    op.matrix.resize(space.total_dofs(), space.total_dofs());
    op.matrix.setFromTriplets(trips.begin(), trips.end());
    op.test = &space;
    op.trial = &space;
    return op;
}

Eigen::VectorXd assemble_rhs(const FunctionSpace& test, const ProblemDef& problem) {
    const FunctionSpace& sp = test;
    const Mesh& mesh = sp.mesh();
    const int p = sp.degree();
    const int nl = sp.local_dofs();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sp.total_dofs());

    if (problem.source) {
        const CellTables tab = cell_tables(p, 2 * p + 1);
        const int nq = static_cast<int>(tab.rule.points.size());
        for (int c = 0; c < mesh.n_cells(); ++c) {
            const CellMap map = cell_map(mesh, c);
            const auto dofs = sp.cell_dofs(c);
            for (int q = 0; q < nq; ++q) {
                const double w = tab.rule.weights[static_cast<std::size_t>(q)] * map.det;
                const double fx = problem.source(map.to_physical(tab.rule.points[static_cast<std::size_t>(q)]));
                for (int i = 0; i < nl; ++i)
                    rhs[dofs[static_cast<std::size_t>(i)]] += w * fx * tab.vals(q, i);
            }
        }
    }

    const FaceSet faces = face_topology(mesh);
    const Quadrature edge_rule = quadrature_rule(Quadrature::Entity::Edge, 2 * p + 1);

    for (const Face& f : faces.faces()) {
        if (!f.boundary) continue;
        const BcType type = problem.bc_of(f.tag);
        const FaceWork fw = face_work(mesh, f, edge_rule);
        const int c1 = f.cells[0];
        const SideEval s1 = eval_side(p, nl, cell_map(mesh, c1), fw.points);
        const auto dofs = sp.cell_dofs(c1);

        if (type == BcType::Neumann) {
            if (!problem.neumann) continue;
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double w = fw.weights[q] * problem.neumann(fw.points[q]);
                for (int i = 0; i < nl; ++i)
                    rhs[dofs[static_cast<std::size_t>(i)]] +=
                        w * s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
            }
            continue;
        }

        const Eigen::Matrix2d k1 = problem.kappa(mesh.centroid(c1));
        const double eta_gamma = penalty_eta_e(mesh.geometry(c1), nullptr, p) * boundary_gamma(k1, f.normal);
        for (std::size_t q = 0; q < fw.points.size(); ++q) {
            const double ud = problem.dirichlet ? problem.dirichlet(fw.points[q]) : 0.0;
            if (ud == 0.0) continue;
            const double w = fw.weights[q];
            const double bn = problem.beta ? problem.beta(fw.points[q]).dot(f.normal) : 0.0;
            for (int i = 0; i < nl; ++i) {
                const double vi = s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                const double kgni =
                    (k1 * s1.grads[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)]).dot(f.normal);
                double r = eta_gamma * vi * ud - kgni * ud;
                if (bn < 0.0) r += (-bn) * vi * ud; // data part of the weak inflow term
                rhs[dofs[static_cast<std::size_t>(i)]] += w * r;
            }
        }
    }
    return rhs;
}

// ---------------------------------------------------------------------------
// Nonlinear conservation-law form.

NonlinearForm::NonlinearForm(const FunctionSpace& space, const ProblemDef& problem)
    : space_(space), problem_(problem), faces_(face_topology(space.mesh())) {
    if (!problem.nonlinear() || !problem.flux_deriv)
        throw InvalidInput("NonlinearForm: problem must define flux and flux_deriv");
    swip_ = assemble_swip(space, space, problem.kappa, problem.bc).matrix;

    // State-independent data: source, SWIP Dirichlet terms, Neumann data.
    ProblemDef linear_part = problem;
    linear_part.beta = nullptr; // the flux terms carry their own boundary data
    data_ = assemble_rhs(space, linear_part);
}

Eigen::VectorXd NonlinearForm::residual(const Eigen::VectorXd& state) const {
    const Mesh& mesh = space_.mesh();
    const int p = space_.degree();
    const int nl = space_.local_dofs();
    Eigen::VectorXd r = swip_ * state - data_;

    const CellTables tab = cell_tables(p, 2 * p + 1);
    const int nq = static_cast<int>(tab.rule.points.size());
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        const auto dofs = space_.cell_dofs(c);
        for (int q = 0; q < nq; ++q) {
            const double w = tab.rule.weights[static_cast<std::size_t>(q)] * map.det;
            double uq = 0.0;
            for (int i = 0; i < nl; ++i)
                uq += state[dofs[static_cast<std::size_t>(i)]] * tab.vals(q, i);
            const Vec2 fu = problem_.flux(uq);
            if (!fu.allFinite()) throw SolverError("nonlinear residual: non-finite flux value");
            for (int i = 0; i < nl; ++i) {
                const Vec2 gi = map.grad_to_physical(
                    tab.ref_grads[static_cast<std::size_t>(q) * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)]);
                r[dofs[static_cast<std::size_t>(i)]] -= w * gi.dot(fu);
            }
        }
    }

    const Quadrature edge_rule = quadrature_rule(Quadrature::Entity::Edge, 2 * p + 1);
    for (const Face& f : faces_.faces()) {
        const FaceWork fw = face_work(mesh, f, edge_rule);
        const int c1 = f.cells[0];
        const SideEval s1 = eval_side(p, nl, cell_map(mesh, c1), fw.points);
        const auto d1 = space_.cell_dofs(c1);

        if (!f.boundary) {
            const int c2 = f.cells[1];
            const SideEval s2 = eval_side(p, nl, cell_map(mesh, c2), fw.points);
            const auto d2 = space_.cell_dofs(c2);
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double u1 = side_state(s1, d1, state, q, nl);
                const double u2 = side_state(s2, d2, state, q, nl);
                const auto lf =
                    lax_friedrichs_flux(u1, u2, f.normal, problem_.flux, problem_.flux_deriv, LfFaceKind::Interior);
                const double w = fw.weights[q] * lf.value;
                for (int i = 0; i < nl; ++i) {
                    r[d1[static_cast<std::size_t>(i)]] +=
                        w * s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                    r[d2[static_cast<std::size_t>(i)]] -=
                        w * s2.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                }
            }
        } else {
            const BcType type = problem_.bc_of(f.tag);
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double u1 = side_state(s1, d1, state, q, nl);
                LaxFriedrichsFlux lf;
                if (type == BcType::Dirichlet) {
                    const double ud = problem_.dirichlet ? problem_.dirichlet(fw.points[q]) : 0.0;
                    lf = lax_friedrichs_flux(u1, 0.0, f.normal, problem_.flux, problem_.flux_deriv,
                                             LfFaceKind::Dirichlet, ud);
                } else {
                    lf = lax_friedrichs_flux(u1, 0.0, f.normal, problem_.flux, problem_.flux_deriv,
                                             LfFaceKind::Neumann);
                }
                const double w = fw.weights[q] * lf.value;
                for (int i = 0; i < nl; ++i)
                    r[d1[static_cast<std::size_t>(i)]] +=
                        w * s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
            }
        }
    }
    if (!r.allFinite()) throw SolverError("nonlinear residual: non-finite entries");
    return r;
}

Eigen::SparseMatrix<double> NonlinearForm::jacobian(const Eigen::VectorXd& state) const {
    const Mesh& mesh = space_.mesh();
    const int p = space_.degree();
    const int nl = space_.local_dofs();
    std::vector<Eigen::Triplet<double>> trips;

    const bool with_eta_deriv = static_cast<bool>(problem_.flux_deriv2);
    auto eta_slope = [&](double u, const Vec2& n) {
        // d/du |f'(u).n|; zero when f'' is not available (Picard dissipation)
        if (!with_eta_deriv) return 0.0;
        const double fpn = problem_.flux_deriv(u).dot(n);
        const double sign = fpn > 0.0 ? 1.0 : (fpn < 0.0 ? -1.0 : 0.0);
        return sign * problem_.flux_deriv2(u).dot(n);
    };

    const CellTables tab = cell_tables(p, 2 * p + 1);
    const int nq = static_cast<int>(tab.rule.points.size());
    Eigen::MatrixXd local(nl, nl);
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        const auto dofs = space_.cell_dofs(c);
        local.setZero();
        for (int q = 0; q < nq; ++q) {
            const double w = tab.rule.weights[static_cast<std::size_t>(q)] * map.det;
            double uq = 0.0;
            for (int i = 0; i < nl; ++i)
                uq += state[dofs[static_cast<std::size_t>(i)]] * tab.vals(q, i);
            const Vec2 fpu = problem_.flux_deriv(uq);
            for (int i = 0; i < nl; ++i) {
                const Vec2 gi = map.grad_to_physical(
                    tab.ref_grads[static_cast<std::size_t>(q) * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)]);
                const double gfi = gi.dot(fpu);
                for (int j = 0; j < nl; ++j)
                    local(i, j) -= w * gfi * tab.vals(q, j);
            }
        }
        scatter(trips, dofs, dofs, local);
    }

    const Quadrature edge_rule = quadrature_rule(Quadrature::Entity::Edge, 2 * p + 1);
    Eigen::MatrixXd face_local(2 * nl, 2 * nl);
    std::vector<int> dofs;
    for (const Face& f : faces_.faces()) {
        const FaceWork fw = face_work(mesh, f, edge_rule);
        const int c1 = f.cells[0];
        const SideEval s1 = eval_side(p, nl, cell_map(mesh, c1), fw.points);
        const auto d1 = space_.cell_dofs(c1);

        if (!f.boundary) {
            const int c2 = f.cells[1];
            const SideEval s2 = eval_side(p, nl, cell_map(mesh, c2), fw.points);
            const auto d2 = space_.cell_dofs(c2);
            face_local.setZero();
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double u1 = side_state(s1, d1, state, q, nl);
                const double u2 = side_state(s2, d2, state, q, nl);
                const double fpn1 = problem_.flux_deriv(u1).dot(f.normal);
                const double fpn2 = problem_.flux_deriv(u2).dot(f.normal);
                const double eta = std::max(std::abs(fpn1), std::abs(fpn2));
                double deta1 = 0.0, deta2 = 0.0;
                if (std::abs(fpn1) >= std::abs(fpn2)) deta1 = eta_slope(u1, f.normal);
                else deta2 = eta_slope(u2, f.normal);
                const double dphi_du1 = 0.5 * (fpn1 + eta + deta1 * (u1 - u2));
                const double dphi_du2 = 0.5 * (fpn2 - eta + deta2 * (u1 - u2));
                const double w = fw.weights[q];
                for (int i = 0; i < nl; ++i) {
                    const double v1 = s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                    const double v2 = s2.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                    for (int j = 0; j < nl; ++j) {
                        const double p1 = s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)];
                        const double p2 = s2.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)];
                        face_local(i, j) += w * v1 * dphi_du1 * p1;
                        face_local(i, nl + j) += w * v1 * dphi_du2 * p2;
                        face_local(nl + i, j) -= w * v2 * dphi_du1 * p1;
                        face_local(nl + i, nl + j) -= w * v2 * dphi_du2 * p2;
                    }
                }
            }
            merge_dofs(d1, d2, dofs);
            scatter(trips, dofs, dofs, face_local);
        } else {
            const BcType type = problem_.bc_of(f.tag);
            local.setZero();
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double u1 = side_state(s1, d1, state, q, nl);
                double dphi = 0.0;
                if (type == BcType::Dirichlet) {
                    const double ud = problem_.dirichlet ? problem_.dirichlet(fw.points[q]) : 0.0;
                    const double fpn = problem_.flux_deriv(u1).dot(f.normal);
                    dphi = 0.5 * (fpn + std::abs(fpn) + eta_slope(u1, f.normal) * (u1 - ud));
                } else {
                    dphi = problem_.flux_deriv(u1).dot(f.normal);
                }
                const double w = fw.weights[q];
                for (int i = 0; i < nl; ++i) {
                    const double vi = s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                    for (int j = 0; j < nl; ++j)
                        local(i, j) += w * vi * dphi *
                                       s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)];
                }
            }
            scatter(trips, d1, d1, local);
        }
    }

    Eigen::SparseMatrix<double> flux_part(space_.total_dofs(), space_.total_dofs());
    flux_part.setFromTriplets(trips.begin(), trips.end());
    return swip_ + flux_part;
}

Eigen::SparseMatrix<double> NonlinearForm::hessian_contraction(const Eigen::VectorXd& state,
                                                               const Eigen::VectorXd& eps) const {
    const Mesh& mesh = space_.mesh();
    const int p = space_.degree();
    const int nl = space_.local_dofs();
    Eigen::SparseMatrix<double> out(space_.total_dofs(), space_.total_dofs());
    if (!problem_.flux_deriv2) return out;

    auto g_slope = [&](double u, const Vec2& n) {
        const double fpn = problem_.flux_deriv(u).dot(n);
        const double sign = fpn > 0.0 ? 1.0 : (fpn < 0.0 ? -1.0 : 0.0);
        return sign * problem_.flux_deriv2(u).dot(n);
    };

    std::vector<Eigen::Triplet<double>> trips;
    const CellTables tab = cell_tables(p, 2 * p + 1);
    const int nq = static_cast<int>(tab.rule.points.size());
    Eigen::MatrixXd local(nl, nl);
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        const auto dofs = space_.cell_dofs(c);
        local.setZero();
        for (int q = 0; q < nq; ++q) {
            const double w = tab.rule.weights[static_cast<std::size_t>(q)] * map.det;
            double uq = 0.0;
            Vec2 grad_eps = Vec2::Zero();
            for (int i = 0; i < nl; ++i) {
                uq += state[dofs[static_cast<std::size_t>(i)]] * tab.vals(q, i);
                grad_eps += eps[dofs[static_cast<std::size_t>(i)]] *
                            map.grad_to_physical(tab.ref_grads[static_cast<std::size_t>(q) * static_cast<std::size_t>(nl) +
                                                               static_cast<std::size_t>(i)]);
            }
            const double coeff = -w * grad_eps.dot(problem_.flux_deriv2(uq));
            for (int i = 0; i < nl; ++i)
                for (int j = 0; j < nl; ++j)
                    local(i, j) += coeff * tab.vals(q, i) * tab.vals(q, j);
        }
        scatter(trips, dofs, dofs, local);
    }

    const Quadrature edge_rule = quadrature_rule(Quadrature::Entity::Edge, 2 * p + 1);
    Eigen::MatrixXd face_local(2 * nl, 2 * nl);
    std::vector<int> dofs;
    for (const Face& f : faces_.faces()) {
        const FaceWork fw = face_work(mesh, f, edge_rule);
        const int c1 = f.cells[0];
        const SideEval s1 = eval_side(p, nl, cell_map(mesh, c1), fw.points);
        const auto d1 = space_.cell_dofs(c1);

        if (!f.boundary) {
            const int c2 = f.cells[1];
            const SideEval s2 = eval_side(p, nl, cell_map(mesh, c2), fw.points);
            const auto d2 = space_.cell_dofs(c2);
            face_local.setZero();
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double u1 = side_state(s1, d1, state, q, nl);
                const double u2 = side_state(s2, d2, state, q, nl);
                const double jump_eps = side_state(s1, d1, eps, q, nl) - side_state(s2, d2, eps, q, nl);
                const double fpp1 = problem_.flux_deriv2(u1).dot(f.normal);
                const double fpp2 = problem_.flux_deriv2(u2).dot(f.normal);
                double d11, d12, d22;
                if (std::abs(problem_.flux_deriv(u1).dot(f.normal)) >=
                    std::abs(problem_.flux_deriv(u2).dot(f.normal))) {
                    const double gp = g_slope(u1, f.normal);
                    d11 = 0.5 * fpp1 + gp;
                    d12 = -0.5 * gp;
                    d22 = 0.5 * fpp2;
                } else {
                    const double gp = g_slope(u2, f.normal);
                    d11 = 0.5 * fpp1;
                    d12 = 0.5 * gp;
                    d22 = 0.5 * fpp2 - gp;
                }
                const double w = fw.weights[q] * jump_eps;
                for (int i = 0; i < nl; ++i) {
                    const double v1 = s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                    const double v2 = s2.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)];
                    for (int j = 0; j < nl; ++j) {
                        const double p1 = s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)];
                        const double p2 = s2.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)];
                        face_local(i, j) += w * d11 * v1 * p1;
                        face_local(i, nl + j) += w * d12 * v1 * p2;
                        face_local(nl + i, j) += w * d12 * v2 * p1;
                        face_local(nl + i, nl + j) += w * d22 * v2 * p2;
                    }
                }
            }
            merge_dofs(d1, d2, dofs);
            scatter(trips, dofs, dofs, face_local);
        } else {
            const BcType type = problem_.bc_of(f.tag);
            local.setZero();
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double u1 = side_state(s1, d1, state, q, nl);
                const double trace_eps = side_state(s1, d1, eps, q, nl);
                double d2phi;
                if (type == BcType::Dirichlet)
                    d2phi = 0.5 * problem_.flux_deriv2(u1).dot(f.normal) + g_slope(u1, f.normal);
                else
                    d2phi = problem_.flux_deriv2(u1).dot(f.normal);
                const double w = fw.weights[q] * trace_eps * d2phi;
                for (int i = 0; i < nl; ++i)
                    for (int j = 0; j < nl; ++j)
                        local(i, j) += w * s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)] *
                                       s1.vals[q * static_cast<std::size_t>(nl) + static_cast<std::size_t>(j)];
            }
            scatter(trips, d1, d1, local);
        }
    }
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
}

Eigen::VectorXd assemble_nonlinear_residual(const FunctionSpace& space, const Eigen::VectorXd& state,
                                            const ProblemDef& problem) {
    return NonlinearForm(space, problem).residual(state);
}

AssembledOperator assemble_nonlinear_jacobian(const FunctionSpace& space, const Eigen::VectorXd& state,
                                              const ProblemDef& problem) {
    AssembledOperator op;
    op.matrix = NonlinearForm(space, problem).jacobian(state);
    op.test = &space;
    op.trial = &space;
    return op;
}

// ---------------------------------------------------------------------------
// Cellwise norm decomposition.

std::vector<double> gram_norm_cellwise(const FunctionSpace& space, const TensorField& kappa,
                                       const VectorField& beta, GramKind kind, const Eigen::VectorXd& w) {
    if (space.continuity() != Continuity::Broken)
        throw InvalidInput("gram_norm_cellwise: expects a broken space");
    const Mesh& mesh = space.mesh();
    const int p = space.degree();
    const int nl = space.local_dofs();
    std::vector<double> eta_sq(static_cast<std::size_t>(mesh.n_cells()), 0.0);

    const CellTables tab = cell_tables(p, 2 * p + 1);
    const int nq = static_cast<int>(tab.rule.points.size());
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        const double hk = mesh.geometry(c).diameter;
        const auto dofs = space.cell_dofs(c);
        double acc = 0.0;
        for (int q = 0; q < nq; ++q) {
            const double wq = tab.rule.weights[static_cast<std::size_t>(q)] * map.det;
            const Vec2 x = map.to_physical(tab.rule.points[static_cast<std::size_t>(q)]);
            double val = 0.0;
            Vec2 grad = Vec2::Zero();
            for (int i = 0; i < nl; ++i) {
                const double ci = w[dofs[static_cast<std::size_t>(i)]];
                val += ci * tab.vals(q, i);
                grad += ci * map.grad_to_physical(
                            tab.ref_grads[static_cast<std::size_t>(q) * static_cast<std::size_t>(nl) + static_cast<std::size_t>(i)]);
            }
            const Vec2 kg = kappa(x) * grad;
            double term = val * val + kg.squaredNorm();
            if (kind == GramKind::Advective) {
                const Vec2 b = beta ? beta(x) : Vec2(Vec2::Zero());
                const double bg = b.dot(grad);
                term += hk * bg * bg;
            } else {
                term += hk * grad.squaredNorm();
            }
            acc += wq * term;
        }
        eta_sq[static_cast<std::size_t>(c)] += acc;
    }

    const FaceSet faces = face_topology(mesh);
    const Quadrature edge_rule = quadrature_rule(Quadrature::Entity::Edge, 2 * p + 1);
    for (const Face& f : faces.faces()) {
        const FaceWork fw = face_work(mesh, f, edge_rule);
        const int c1 = f.cells[0];
        const SideEval s1 = eval_side(p, nl, cell_map(mesh, c1), fw.points);
        const auto d1 = space.cell_dofs(c1);
        const Eigen::Matrix2d k1 = kappa(mesh.centroid(c1));
        const ElementGeometry g1 = mesh.geometry(c1);

        auto adv_weight = [&](std::size_t q) {
            if (kind != GramKind::Advective) return 1.0;
            if (!beta) return 0.0;
            return 0.5 * std::abs(beta(fw.points[q]).dot(f.normal));
        };

        double face_term = 0.0;
        if (!f.boundary) {
            const int c2 = f.cells[1];
            const SideEval s2 = eval_side(p, nl, cell_map(mesh, c2), fw.points);
            const auto d2 = space.cell_dofs(c2);
            const Eigen::Matrix2d k2 = kappa(mesh.centroid(c2));
            const ElementGeometry g2 = mesh.geometry(c2);
            const double eta_gamma = penalty_eta_e(g1, &g2, p) * weights_or_zero(k1, k2, f.normal).gamma;
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double jump = side_state(s1, d1, w, q, nl) - side_state(s2, d2, w, q, nl);
                face_term += fw.weights[q] * (adv_weight(q) + eta_gamma) * jump * jump;
            }
            eta_sq[static_cast<std::size_t>(c1)] += 0.5 * face_term;
            eta_sq[static_cast<std::size_t>(c2)] += 0.5 * face_term;
        } else {
            const double eta_gamma = penalty_eta_e(g1, nullptr, p) * boundary_gamma(k1, f.normal);
            for (std::size_t q = 0; q < fw.points.size(); ++q) {
                const double trace = side_state(s1, d1, w, q, nl);
                face_term += fw.weights[q] * (adv_weight(q) + eta_gamma) * trace * trace;
            }
            eta_sq[static_cast<std::size_t>(c1)] += face_term;
        }
    }
    return eta_sq;
}

} // namespace resmin
