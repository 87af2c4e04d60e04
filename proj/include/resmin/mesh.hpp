#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "resmin/error.hpp"

namespace resmin {

using Vec2 = Eigen::Vector2d;

/// Tag assignment for one boundary face, identified by its vertex pair.
struct BoundaryFaceSpec {
    int a = 0;
    int b = 0;
    std::string tag;
};

/// Geometric quantities of a single triangle.
struct ElementGeometry {
    double area = 0.0;      ///< V(K)
    double perimeter = 0.0; ///< A(dK)
    double diameter = 0.0;  ///< h_K, the longest edge
};

/// Conforming 2D simplicial triangulation.
///
/// Cells are stored counter-clockwise. Each cell carries a refinement edge
/// (local index of the edge opposite the newest vertex) driving
/// newest-vertex bisection. Immutable after construction; refine() returns
/// a new mesh and records the parent cell of every child.
class Mesh {
public:
    /// An empty mesh; assign one produced by build(), refine() or read().
    Mesh() = default;

    /// Validates and builds a mesh. Cells are reordered counter-clockwise if
    /// needed; refinement edges are initialized to the longest edge of each
    /// cell (ties broken by lowest vertex index). Throws InvalidInput on
    /// degenerate cells, duplicate cells, untagged boundary faces or
    /// out-of-range indices.
    static Mesh build(std::vector<Vec2> vertices,
                      std::vector<std::array<int, 3>> cells,
                      const std::vector<BoundaryFaceSpec>& boundary_tags);

    int n_vertices() const { return static_cast<int>(vertices_.size()); }
    int n_cells() const { return static_cast<int>(cells_.size()); }

    const Vec2& vertex(int v) const { return vertices_[static_cast<std::size_t>(v)]; }
    const std::array<int, 3>& cell(int c) const { return cells_[static_cast<std::size_t>(c)]; }
    const std::vector<Vec2>& vertices() const { return vertices_; }
    const std::vector<std::array<int, 3>>& cells() const { return cells_; }

    /// Local index (0..2) of the edge bisected next; edge i is opposite vertex i.
    int refinement_edge(int c) const { return refinement_edge_[static_cast<std::size_t>(c)]; }

    /// For meshes produced by refine(): index of the ancestor cell in the
    /// refine() input mesh. -1 for meshes from build().
    int parent_cell(int c) const { return parent_[static_cast<std::size_t>(c)]; }

    /// Boundary tag lookup keyed by sorted vertex pair; empty map entry means
    /// interior edge.
    const std::map<std::pair<int, int>, std::string>& boundary_tags() const { return boundary_tags_; }

    ElementGeometry geometry(int c) const;
    Vec2 centroid(int c) const;

    /// Global endpoints of local edge e (opposite vertex e) of cell c,
    /// in the cell's counter-clockwise traversal order.
    std::pair<int, int> edge_vertices(int c, int e) const;

    /// Conforming newest-vertex bisection: every marked cell is bisected at
    /// least once, neighbors are bisected recursively as needed so the result
    /// has no hanging nodes. Child boundary faces inherit the parent tag.
    Mesh refine(const std::vector<int>& marked) const;

    /// Plain-text mesh format: "dim 2", then vertex/cell/boundary_faces blocks.
    static Mesh read(std::istream& in);
    static Mesh read_file(const std::string& path);
    void write(std::ostream& out) const;
    void write_file(const std::string& path) const;

private:
    std::vector<Vec2> vertices_;
    std::vector<std::array<int, 3>> cells_;
    std::vector<int> refinement_edge_;
    std::vector<int> parent_;
    std::map<std::pair<int, int>, std::string> boundary_tags_;
};

/// One face (edge) of the triangulation with incidence and geometry.
struct Face {
    std::array<int, 2> vertices{};  ///< oriented with the normal convention below
    std::array<int, 2> cells{-1, -1}; ///< cells[1] = -1 on the boundary; cells[0] < cells[1] otherwise
    Vec2 normal = Vec2::Zero();     ///< unit; from cells[0] to cells[1], outward on the boundary
    double diameter = 0.0;          ///< h_F
    bool boundary = false;
    std::string tag;                ///< boundary tag; empty on interior faces
};

/// All faces of a mesh, interior first ordering not guaranteed; query kind per face.
class FaceSet {
public:
    explicit FaceSet(std::vector<Face> faces);

    int n_faces() const { return static_cast<int>(faces_.size()); }
    int n_interior() const { return n_interior_; }
    int n_boundary() const { return n_boundary_; }
    const Face& face(int f) const { return faces_[static_cast<std::size_t>(f)]; }
    const std::vector<Face>& faces() const { return faces_; }

private:
    std::vector<Face> faces_;
    int n_interior_ = 0;
    int n_boundary_ = 0;
};

/// Extracts the face topology of a valid mesh. Interior normals point from
/// the lower-index to the higher-index incident cell.
FaceSet face_topology(const Mesh& mesh);

/// Area, perimeter and diameter of one cell.
ElementGeometry element_geometry(const Mesh& mesh, int cell);

/// Structured triangulations used by the benchmarks and tests. The functional
/// overload receives each boundary edge midpoint and returns its tag.
Mesh rectangle_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny,
                    const std::function<std::string(const Vec2&)>& tag_of_edge);
Mesh rectangle_mesh(const Vec2& lo, const Vec2& hi, int nx, int ny, const std::string& tag = "dirichlet");
Mesh lshape_mesh();

} // namespace resmin
