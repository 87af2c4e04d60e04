#include "resmin/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace resmin {

namespace {

std::pair<int, int> sorted_pair(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
}

double edge_length(const Vec2& a, const Vec2& b) { return (b - a).norm(); }

// Longest edge, ties broken by lowest then highest global vertex index.
// The tie-break makes the initial labeling a strict total order on edges.
int longest_edge_index(const std::array<int, 3>& t, const std::vector<Vec2>& verts) {
    int best = -1;
    double best_len = -1.0;
    std::pair<int, int> best_key{0, 0};
    for (int e = 0; e < 3; ++e) {
        const int a = t[(e + 1) % 3];
        const int b = t[(e + 2) % 3];
        const double len = edge_length(verts[static_cast<std::size_t>(a)], verts[static_cast<std::size_t>(b)]);
        const auto key = sorted_pair(a, b);
        const bool better = len > best_len * (1.0 + 1e-12) ||
                            (len > best_len * (1.0 - 1e-12) && key < best_key);
        if (best < 0 || better) {
            best = e;
            best_len = len;
            best_key = key;
        }
    }
    return best;
}

} // namespace

ElementGeometry Mesh::geometry(int c) const {
    const auto& t = cell(c);
    const Vec2& a = vertex(t[0]);
    const Vec2& b = vertex(t[1]);
    const Vec2& d = vertex(t[2]);
    ElementGeometry g;
    g.area = signed_area(a, b, d);
    const double e0 = edge_length(b, d);
    const double e1 = edge_length(d, a);
    const double e2 = edge_length(a, b);
    g.perimeter = e0 + e1 + e2;
    g.diameter = std::max({e0, e1, e2});
    return g;
}

Vec2 Mesh::centroid(int c) const {
    const auto& t = cell(c);
    return (vertex(t[0]) + vertex(t[1]) + vertex(t[2])) / 3.0;
}

std::pair<int, int> Mesh::edge_vertices(int c, int e) const {
    const auto& t = cell(c);
    return {t[(e + 1) % 3], t[(e + 2) % 3]};
}

ElementGeometry element_geometry(const Mesh& mesh, int cell) { return mesh.geometry(cell); }

Mesh Mesh::build(std::vector<Vec2> vertices,
                 std::vector<std::array<int, 3>> cells,
                 const std::vector<BoundaryFaceSpec>& boundary_tags) {
    if (cells.empty()) throw InvalidInput("mesh: at least one cell required");
    const int nv = static_cast<int>(vertices.size());

    std::set<std::array<int, 3>> seen;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        auto& t = cells[c];
        for (int i = 0; i < 3; ++i) {
            if (t[i] < 0 || t[i] >= nv)
                throw InvalidInput("mesh: cell " + std::to_string(c) + " has vertex index out of range");
        }
        const Vec2& a = vertices[static_cast<std::size_t>(t[0])];
        const Vec2& b = vertices[static_cast<std::size_t>(t[1])];
        const Vec2& d = vertices[static_cast<std::size_t>(t[2])];
        double area = signed_area(a, b, d);
        if (area < 0.0) {
            std::swap(t[1], t[2]);
            area = -area;
        }
        const double h = std::max({edge_length(a, b), edge_length(b, d), edge_length(d, a)});
        if (!(area > 1e-14 * h * h))
            throw InvalidInput("mesh: cell " + std::to_string(c) + " is degenerate (zero or negative area)");
        std::array<int, 3> key = t;
        std::sort(key.begin(), key.end());
        if (!seen.insert(key).second)
            throw InvalidInput("mesh: duplicate cell " + std::to_string(c));
    }

    std::map<std::pair<int, int>, int> incidence;
    for (const auto& t : cells)
        for (int e = 0; e < 3; ++e)
            incidence[sorted_pair(t[(e + 1) % 3], t[(e + 2) % 3])] += 1;
    for (const auto& [edge, count] : incidence)
        if (count > 2)
            throw InvalidInput("mesh: edge (" + std::to_string(edge.first) + "," + std::to_string(edge.second) +
                               ") shared by more than two cells");

    std::map<std::pair<int, int>, std::string> tags;
    for (const auto& spec : boundary_tags) {
        if (spec.a < 0 || spec.a >= nv || spec.b < 0 || spec.b >= nv)
            throw InvalidInput("mesh: boundary face vertex index out of range");
        const auto key = sorted_pair(spec.a, spec.b);
        const auto it = incidence.find(key);
        if (it == incidence.end() || it->second != 1)
            throw InvalidInput("mesh: tagged face (" + std::to_string(spec.a) + "," + std::to_string(spec.b) +
                               ") is not a boundary face");
        if (!tags.emplace(key, spec.tag).second)
            throw InvalidInput("mesh: boundary face tagged twice");
    }
    for (const auto& [edge, count] : incidence)
        if (count == 1 && tags.find(edge) == tags.end())
            throw InvalidInput("mesh: untagged boundary face (" + std::to_string(edge.first) + "," +
                               std::to_string(edge.second) + ")");

    Mesh m;
    m.vertices_ = std::move(vertices);
    m.cells_ = std::move(cells);
    m.boundary_tags_ = std::move(tags);
    m.refinement_edge_.resize(m.cells_.size());
    m.parent_.assign(m.cells_.size(), -1);
    for (std::size_t c = 0; c < m.cells_.size(); ++c)
        m.refinement_edge_[c] = longest_edge_index(m.cells_[c], m.vertices_);
    return m;
}

FaceSet::FaceSet(std::vector<Face> faces) : faces_(std::move(faces)) {
    for (const auto& f : faces_)
        (f.boundary ? n_boundary_ : n_interior_) += 1;
}

FaceSet face_topology(const Mesh& mesh) {
    std::map<std::pair<int, int>, Face> acc;
    for (int c = 0; c < mesh.n_cells(); ++c) {
        for (int e = 0; e < 3; ++e) {
            const auto [a, b] = mesh.edge_vertices(c, e);
            const auto key = sorted_pair(a, b);
            auto it = acc.find(key);
            if (it == acc.end()) {
                Face f;
                f.vertices = {a, b}; // CCW traversal of the first incident cell
                f.cells = {c, -1};
                acc.emplace(key, std::move(f));
            } else {
                it->second.cells[1] = c;
            }
        }
    }

    std::vector<Face> faces;
    faces.reserve(acc.size());
    const auto& tags = mesh.boundary_tags();
    for (auto& [key, f] : acc) {
        const Vec2& a = mesh.vertex(f.vertices[0]);
        const Vec2& b = mesh.vertex(f.vertices[1]);
        const Vec2 t = b - a;
        f.diameter = t.norm();
        // Outward normal of the first incident cell's CCW edge direction:
        // points from cells[0] to cells[1], outward on the boundary.
        f.normal = Vec2(t.y(), -t.x()) / f.diameter;
        f.boundary = (f.cells[1] == -1);
        if (f.boundary) {
            const auto it = tags.find(key);
            if (it == tags.end()) throw InvalidInput("face_topology: untagged boundary face");
            f.tag = it->second;
        }
        faces.push_back(std::move(f));
    }
    return FaceSet(std::move(faces));
}

// ---------------------------------------------------------------------------
// Newest-vertex bisection.
//
// Closure works on the marked-edge set: a cell whose edges intersect the set
// must also have its refinement edge in the set. The fixpoint is monotone over
// a finite set, so it terminates; the per-cell split then consumes exactly the
// marked edges (at most three bisections per cell), and both cells sharing a
// marked edge split it, so the result is conforming.

namespace {

struct SplitState {
    std::vector<Vec2> vertices;
    std::map<std::pair<int, int>, std::string> tags;
    std::map<std::pair<int, int>, int> midpoints;
    const std::set<std::pair<int, int>>* marked_edges = nullptr;

    std::vector<std::array<int, 3>> out_cells;
    std::vector<int> out_refedge;
    std::vector<int> out_parent;

    int midpoint(std::pair<int, int> key) {
        auto it = midpoints.find(key);
        if (it != midpoints.end()) return it->second;
        const Vec2 m = 0.5 * (vertices[static_cast<std::size_t>(key.first)] +
                              vertices[static_cast<std::size_t>(key.second)]);
        const int idx = static_cast<int>(vertices.size());
        vertices.push_back(m);
        midpoints.emplace(key, idx);
        const auto tag_it = tags.find(key);
        if (tag_it != tags.end()) {
            const std::string tag = tag_it->second;
            tags.erase(tag_it);
            tags.emplace(sorted_pair(key.first, idx), tag);
            tags.emplace(sorted_pair(key.second, idx), tag);
        }
        return idx;
    }

    // Emits the cell, bisecting recursively while its refinement edge is marked.
    void emit(const std::array<int, 3>& v, int refedge, int root, int depth) {
        const int p = v[static_cast<std::size_t>(refedge)];
        const int a = v[static_cast<std::size_t>((refedge + 1) % 3)];
        const int b = v[static_cast<std::size_t>((refedge + 2) % 3)];
        const auto key = sorted_pair(a, b);
        if (depth < 3 && marked_edges->count(key) > 0) {
            const int m = midpoint(key);
            // Children keep the parent orientation; the newest vertex is local 0,
            // so the next refinement edge is the one opposite the midpoint.
            emit({m, p, a}, 0, root, depth + 1);
            emit({m, b, p}, 0, root, depth + 1);
        } else {
            out_cells.push_back(v);
            out_refedge.push_back(refedge);
            out_parent.push_back(root);
        }
    }
};

} // namespace

Mesh Mesh::refine(const std::vector<int>& marked) const {
    for (int c : marked)
        if (c < 0 || c >= n_cells()) throw InvalidInput("refine: marked cell index out of range");

    if (marked.empty()) {
        Mesh copy = *this;
        for (std::size_t c = 0; c < copy.parent_.size(); ++c)
            copy.parent_[c] = static_cast<int>(c);
        return copy;
    }

    auto refedge_key = [&](int c) {
        const auto [a, b] = edge_vertices(c, refinement_edge(c));
        return sorted_pair(a, b);
    };

    std::set<std::pair<int, int>> marked_edges;
    for (int c : marked) marked_edges.insert(refedge_key(c));

    bool changed = true;
    while (changed) {
        changed = false;
        for (int c = 0; c < n_cells(); ++c) {
            const auto rkey = refedge_key(c);
            if (marked_edges.count(rkey) > 0) continue;
            for (int e = 0; e < 3; ++e) {
                const auto [a, b] = edge_vertices(c, e);
                if (marked_edges.count(sorted_pair(a, b)) > 0) {
                    marked_edges.insert(rkey);
                    changed = true;
                    break;
                }
            }
        }
    }

    SplitState st;
    st.vertices = vertices_;
    st.tags = boundary_tags_;
    st.marked_edges = &marked_edges;
    st.out_cells.reserve(cells_.size() * 2);
    st.out_refedge.reserve(cells_.size() * 2);
    st.out_parent.reserve(cells_.size() * 2);
    for (int c = 0; c < n_cells(); ++c)
        st.emit(cells_[static_cast<std::size_t>(c)], refinement_edge_[static_cast<std::size_t>(c)], c, 0);

    Mesh out;
    out.vertices_ = std::move(st.vertices);
    out.cells_ = std::move(st.out_cells);
    out.refinement_edge_ = std::move(st.out_refedge);
    out.parent_ = std::move(st.out_parent);
    out.boundary_tags_ = std::move(st.tags);
    return out;
}

// ---------------------------------------------------------------------------
// Plain-text mesh file format.

void Mesh::write(std::ostream& out) const {
    out << "dim 2\n";
    out << "vertices " << n_vertices() << "\n";
    out << std::setprecision(17);
    for (const auto& v : vertices_) out << v.x() << " " << v.y() << "\n";
    out << "cells " << n_cells() << "\n";
    for (const auto& t : cells_) out << t[0] << " " << t[1] << " " << t[2] << "\n";
    out << "boundary_faces " << boundary_tags_.size() << "\n";
    for (const auto& [edge, tag] : boundary_tags_) out << edge.first << " " << edge.second << " " << tag << "\n";
}

void Mesh::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("mesh: cannot open '" + path + "' for writing");
    write(out);
    if (!out) throw Error("mesh: write to '" + path + "' failed");
}

Mesh Mesh::read(std::istream& in) {
    auto expect = [&](const std::string& keyword) -> long {
        std::string word;
        long n = 0;
        if (!(in >> word >> n) || word != keyword)
            throw InvalidInput("mesh file: expected '" + keyword + " <n>'");
        return n;
    };
    const long dim = expect("dim");
    if (dim != 2) throw InvalidInput("mesh file: only dim 2 supported");

    const long nv = expect("vertices");
    std::vector<Vec2> vertices;
    vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        double x = 0.0, y = 0.0;
        if (!(in >> x >> y)) throw InvalidInput("mesh file: bad vertex line");
        vertices.emplace_back(x, y);
    }

    const long nc = expect("cells");
    std::vector<std::array<int, 3>> cells;
    cells.reserve(static_cast<std::size_t>(nc));
    for (long i = 0; i < nc; ++i) {
        std::array<int, 3> t{};
        if (!(in >> t[0] >> t[1] >> t[2])) throw InvalidInput("mesh file: bad cell line");
        cells.push_back(t);
    }

    const long nb = expect("boundary_faces");
    std::vector<BoundaryFaceSpec> specs;
    specs.reserve(static_cast<std::size_t>(nb));
    for (long i = 0; i < nb; ++i) {
        BoundaryFaceSpec s;
        if (!(in >> s.a >> s.b >> s.tag)) throw InvalidInput("mesh file: bad boundary_faces line");
        specs.push_back(std::move(s));
    }
    return Mesh::build(std::move(vertices), std::move(cells), specs);
}

Mesh Mesh::read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("mesh: cannot open '" + path + "'");
    return read(in);
}

// ---------------------------------------------------------------------------
// Structured meshes.

Mesh rectangle_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny,
                    const std::function<std::string(const Vec2&)>& tag_of_edge) {
    if (nx < 1 || ny < 1) throw InvalidInput("rectangle_mesh: need nx, ny >= 1");
    std::vector<Vec2> vertices;
    vertices.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i <= nx; ++i)
            vertices.emplace_back(lo.x() + (hi.x() - lo.x()) * i / nx, lo.y() + (hi.y() - lo.y()) * j / ny);
    auto vid = [&](int i, int j) { return j * (nx + 1) + i; };

    std::vector<std::array<int, 3>> cells;
    cells.reserve(static_cast<std::size_t>(2 * nx * ny));
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
            cells.push_back({v00, v10, v11});
            cells.push_back({v00, v11, v01});
        }
    }

    std::vector<BoundaryFaceSpec> specs;
    auto add = [&](int a, int b) {
        const Vec2 mid = 0.5 * (vertices[static_cast<std::size_t>(a)] + vertices[static_cast<std::size_t>(b)]);
        specs.push_back({a, b, tag_of_edge(mid)});
    };
    for (int i = 0; i < nx; ++i) {
        add(vid(i, 0), vid(i + 1, 0));
        add(vid(i, ny), vid(i + 1, ny));
    }
    for (int j = 0; j < ny; ++j) {
        add(vid(0, j), vid(0, j + 1));
        add(vid(nx, j), vid(nx, j + 1));
    }
    return Mesh::build(std::move(vertices), std::move(cells), specs);
}

Mesh rectangle_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny, const std::string& tag) {
    return rectangle_mesh(lo, hi, nx, ny, [&](const Vec2&) { return tag; });
}

Mesh lshape_mesh() {
    // Six-triangle fan around the re-entrant corner of (-1,1)^2 \ (-1,0]^2.
    const std::vector<Vec2> vertices = {
        {0.0, 0.0}, {1.0, 0.0}, {1.0, 1.0}, {0.0, 1.0},
        {-1.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}, {1.0, -1.0},
    };
    const std::vector<std::array<int, 3>> cells = {
        {0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 5}, {0, 6, 7}, {0, 7, 1},
    };
    std::vector<BoundaryFaceSpec> specs;
    const int ring[] = {5, 4, 3, 2, 1, 7, 6};
    for (int k = 0; k + 1 < 7; ++k) specs.push_back({ring[k], ring[k + 1], "dirichlet"});
    specs.push_back({5, 0, "dirichlet"});
    specs.push_back({0, 6, "dirichlet"});
    return Mesh::build(std::move(vertices), std::move(cells), specs);
}

} // namespace resmin
