#include "resmin/fem_space.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

namespace resmin {

namespace {

// Gauss-Legendre nodes/weights on [0,1] by Newton iteration on P_n.
void gauss_legendre_unit(int n, std::vector<double>& points, std::vector<double>& weights) {
    points.resize(static_cast<std::size_t>(n));
    weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        // Chebyshev initial guess on [-1,1].
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        points[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x); // descending roots -> ascending on [0,1]
        weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    std::reverse(points.begin(), points.end());
    std::reverse(weights.begin(), weights.end());
}

} // namespace

Quadrature quadrature_rule(Quadrature::Entity entity, int degree) {
    if (degree < 0) throw InvalidInput("quadrature_rule: degree must be >= 0");
    Quadrature q;
    q.entity = entity;
    q.exactness = degree;

    if (entity == Quadrature::Entity::Edge) {
        const int n = degree / 2 + 1; // 2n-1 >= degree
        std::vector<double> pts, wts;
        gauss_legendre_unit(n, pts, wts);
        for (int i = 0; i < n; ++i) {
            q.points.emplace_back(pts[static_cast<std::size_t>(i)], 0.0);
            q.weights.push_back(wts[static_cast<std::size_t>(i)]);
        }
        return q;
    }

    if (degree <= 1) {
        q.points = {Vec2(1.0 / 3.0, 1.0 / 3.0)};
        q.weights = {0.5};
        return q;
    }
    if (degree == 2) {
        q.points = {Vec2(1.0 / 6.0, 1.0 / 6.0), Vec2(2.0 / 3.0, 1.0 / 6.0), Vec2(1.0 / 6.0, 2.0 / 3.0)};
        q.weights = {1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
        return q;
    }

    // Collapsed tensor product (Duffy): x = u(1-v), y = v, jacobian (1-v).
    // Monomial x^a y^b pulls back to degree a in u and a+b+1 in v.
    const int nu = degree / 2 + 1;
    const int nv = (degree + 1) / 2 + 1;
    std::vector<double> up, uw, vp, vw;
    gauss_legendre_unit(nu, up, uw);
    gauss_legendre_unit(nv, vp, vw);
    for (int j = 0; j < nv; ++j) {
        for (int i = 0; i < nu; ++i) {
            const double u = up[static_cast<std::size_t>(i)];
            const double v = vp[static_cast<std::size_t>(j)];
            q.points.emplace_back(u * (1.0 - v), v);
            q.weights.push_back(uw[static_cast<std::size_t>(i)] * vw[static_cast<std::size_t>(j)] * (1.0 - v));
        }
    }
    return q;
}

int lagrange_node_count(int p) { return (p + 1) * (p + 2) / 2; }

namespace {

// Barycentric multi-indices (i,j,k), i+j+k = p, in the local node order.
std::vector<std::array<int, 3>> node_multi_indices(int p) {
    std::vector<std::array<int, 3>> nodes;
    nodes.reserve(static_cast<std::size_t>(lagrange_node_count(p)));
    nodes.push_back({p, 0, 0});
    nodes.push_back({0, p, 0});
    nodes.push_back({0, 0, p});
    // Edge e is opposite vertex e, walked CCW: e0 V1->V2, e1 V2->V0, e2 V0->V1.
    for (int s = 1; s < p; ++s) nodes.push_back({0, p - s, s});
    for (int s = 1; s < p; ++s) nodes.push_back({s, 0, p - s});
    for (int s = 1; s < p; ++s) nodes.push_back({p - s, s, 0});
    for (int i = 1; i <= p - 2; ++i)
        for (int j = 1; j <= p - 1 - i; ++j)
            nodes.push_back({i, j, p - i - j});
    return nodes;
}

std::vector<Vec2> node_positions(int p) {
    std::vector<Vec2> pos;
    if (p == 0) {
        pos.emplace_back(1.0 / 3.0, 1.0 / 3.0);
        return pos;
    }
    for (const auto& n : node_multi_indices(p))
        pos.emplace_back(static_cast<double>(n[1]) / p, static_cast<double>(n[2]) / p);
    return pos;
}

// Silvester factor R_m(t) = prod_{r<m} (p t - r)/(r+1): equals 1 at t = m/p and
// vanishes at t = l/p for l < m.
void silvester(int p, int m, double t, double& value, double& deriv) {
    value = 1.0;
    deriv = 0.0;
    for (int r = 0; r < m; ++r) {
        const double factor = (p * t - r) / (r + 1.0);
        deriv = deriv * factor + value * (static_cast<double>(p) / (r + 1.0));
        value *= factor;
    }
}

} // namespace

const std::vector<Vec2>& reference_nodes(int p) {
    static std::map<int, std::vector<Vec2>> cache;
    auto it = cache.find(p);
    if (it == cache.end()) it = cache.emplace(p, node_positions(p)).first;
    return it->second;
}

void eval_basis(int p, const Vec2& ref_point, std::span<double> values, std::span<Vec2> gradients) {
    if (p < 1) throw InvalidInput("eval_basis: degree must be >= 1");
    const auto nodes = node_multi_indices(p);
    const std::size_t n = nodes.size();
    if (values.size() != n || gradients.size() != n)
        throw InvalidInput("eval_basis: output span size mismatch");

    const double l1 = ref_point.x();
    const double l2 = ref_point.y();
    const double l0 = 1.0 - l1 - l2;
    // d(lambda)/dx = (-1, 1, 0), d(lambda)/dy = (-1, 0, 1)

    for (std::size_t a = 0; a < n; ++a) {
        double r0 = 0, d0 = 0, r1 = 0, d1 = 0, r2 = 0, d2 = 0;
        silvester(p, nodes[a][0], l0, r0, d0);
        silvester(p, nodes[a][1], l1, r1, d1);
        silvester(p, nodes[a][2], l2, r2, d2);
        values[a] = r0 * r1 * r2;
        const double g0 = d0 * r1 * r2;
        const double g1 = r0 * d1 * r2;
        const double g2 = r0 * r1 * d2;
        gradients[a] = Vec2(-g0 + g1, -g0 + g2);
    }
}

CellMap cell_map(const Mesh& mesh, int cell) {
    const auto& t = mesh.cell(cell);
    CellMap m;
    m.origin = mesh.vertex(t[0]);
    m.jac.col(0) = mesh.vertex(t[1]) - m.origin;
    m.jac.col(1) = mesh.vertex(t[2]) - m.origin;
    m.det = m.jac(0, 0) * m.jac(1, 1) - m.jac(0, 1) * m.jac(1, 0);
    Eigen::Matrix2d inv;
    inv << m.jac(1, 1), -m.jac(0, 1), -m.jac(1, 0), m.jac(0, 0);
    m.jac_inv_t = inv.transpose() / m.det;
    return m;
}

FunctionSpace::FunctionSpace(std::shared_ptr<const Mesh> mesh, int degree, Continuity continuity)
    : mesh_(std::move(mesh)), degree_(degree), continuity_(continuity),
      local_dofs_(lagrange_node_count(degree)) {
    if (degree < 1) throw InvalidInput("FunctionSpace: degree must be >= 1");
    if (!mesh_) throw InvalidInput("FunctionSpace: null mesh");

    const Mesh& m = *mesh_;
    const int nc = m.n_cells();
    const int p = degree_;
    dof_map_.resize(static_cast<std::size_t>(nc) * static_cast<std::size_t>(local_dofs_));

    if (continuity_ == Continuity::Broken) {
        for (std::size_t i = 0; i < dof_map_.size(); ++i) dof_map_[i] = static_cast<int>(i);
        total_dofs_ = nc * local_dofs_;
        return;
    }

    // Conforming: identify vertex and edge nodes across cells; dofs are
    // numbered by first appearance scanning cells then local nodes.
    std::map<int, int> vertex_dof;
    std::map<std::tuple<int, int, int>, int> edge_dof; // (a, b, step from lower id)
    int next = 0;
    auto assign = [&](int cell, int local, int dof) {
        dof_map_[static_cast<std::size_t>(cell) * static_cast<std::size_t>(local_dofs_) +
                 static_cast<std::size_t>(local)] = dof;
    };

    for (int c = 0; c < nc; ++c) {
        const auto& t = m.cell(c);
        for (int v = 0; v < 3; ++v) {
            auto [it, fresh] = vertex_dof.try_emplace(t[v], next);
            if (fresh) ++next;
            assign(c, v, it->second);
        }
        int local = 3;
        for (int e = 0; e < 3; ++e) {
            const auto [a, b] = m.edge_vertices(c, e); // walked CCW from a to b
            for (int s = 1; s < p; ++s, ++local) {
                const int lo = std::min(a, b);
                const int hi = std::max(a, b);
                const int step = (a < b) ? s : p - s;
                auto [it, fresh] = edge_dof.try_emplace(std::make_tuple(lo, hi, step), next);
                if (fresh) ++next;
                assign(c, local, it->second);
            }
        }
        const int n_interior = local_dofs_ - 3 - 3 * (p - 1);
        for (int i = 0; i < n_interior; ++i, ++local) assign(c, local, next++);
    }
    total_dofs_ = next;
}

double FunctionSpace::eval(const Eigen::VectorXd& coeffs, int cell, const Vec2& ref_point) const {
    const int n = local_dofs_;
    std::vector<double> values(static_cast<std::size_t>(n));
    std::vector<Vec2> grads(static_cast<std::size_t>(n));
    eval_basis(degree_, ref_point, values, grads);
    const auto dofs = cell_dofs(cell);
    double out = 0.0;
    for (int i = 0; i < n; ++i) out += coeffs[dofs[static_cast<std::size_t>(i)]] * values[static_cast<std::size_t>(i)];
    return out;
}

Eigen::SparseMatrix<double> cg_embedding(const FunctionSpace& conforming, const FunctionSpace& broken) {
    if (conforming.continuity() != Continuity::Conforming || broken.continuity() != Continuity::Broken)
        throw InvalidInput("cg_embedding: expects (conforming, broken) spaces");
    if (conforming.mesh_ptr().get() != broken.mesh_ptr().get() || conforming.degree() != broken.degree())
        throw InvalidInput("cg_embedding: spaces must share mesh and degree");

    const int nc = broken.mesh().n_cells();
    const int nl = broken.local_dofs();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(nc) * static_cast<std::size_t>(nl));
    for (int c = 0; c < nc; ++c) {
        const auto bd = broken.cell_dofs(c);
        const auto cd = conforming.cell_dofs(c);
        for (int l = 0; l < nl; ++l)
            trips.emplace_back(bd[static_cast<std::size_t>(l)], cd[static_cast<std::size_t>(l)], 1.0);
    }
    Eigen::SparseMatrix<double> e(broken.total_dofs(), conforming.total_dofs());
    e.setFromTriplets(trips.begin(), trips.end());
    return e;
}

Eigen::VectorXd interpolate(const std::function<double(const Vec2&)>& field, const FunctionSpace& space) {
    const Mesh& mesh = space.mesh();
    const auto& ref = reference_nodes(space.degree());
    Eigen::VectorXd coeffs(space.total_dofs());
    for (int c = 0; c < mesh.n_cells(); ++c) {
        const CellMap map = cell_map(mesh, c);
        const auto dofs = space.cell_dofs(c);
        for (std::size_t l = 0; l < ref.size(); ++l) {
            const double v = field(map.to_physical(ref[l]));
            if (!std::isfinite(v)) throw InvalidInput("interpolate: non-finite field value at a node");
            coeffs[dofs[l]] = v;
        }
    }
    return coeffs;
}

} // namespace resmin
