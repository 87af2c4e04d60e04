#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "resmin/mesh.hpp"

namespace resmin {

enum class Continuity { Broken, Conforming };

/// Quadrature rule on the reference triangle {x,y >= 0, x+y <= 1} or the
/// reference edge [0,1] (edge rules store the parameter in points[i].x()).
struct Quadrature {
    enum class Entity { Triangle, Edge };
    Entity entity = Entity::Triangle;
    std::vector<Vec2> points;
    std::vector<double> weights;
    int exactness = 0;
};

/// Rule integrating polynomials up to the given total degree exactly.
Quadrature quadrature_rule(Quadrature::Entity entity, int degree);

/// Number of Lagrange nodes of degree p on a triangle: (p+1)(p+2)/2.
int lagrange_node_count(int p);

/// Equispaced Lagrange nodes of degree p in reference coordinates, ordered
/// vertices (3), then edge-interior nodes per local edge 0,1,2 walked in the
/// cell's counter-clockwise direction, then interior nodes.
const std::vector<Vec2>& reference_nodes(int p);

/// Lagrange basis values and reference-coordinate gradients at one point.
/// values/gradients must have lagrange_node_count(p) entries.
void eval_basis(int p, const Vec2& ref_point, std::span<double> values, std::span<Vec2> gradients);

/// Affine map between the reference triangle and a physical cell.
struct CellMap {
    Vec2 origin = Vec2::Zero();
    Eigen::Matrix2d jac = Eigen::Matrix2d::Zero();      ///< columns: v1-v0, v2-v0
    Eigen::Matrix2d jac_inv_t = Eigen::Matrix2d::Zero();///< transforms reference gradients
    double det = 0.0;                                   ///< = 2 area

    Vec2 to_physical(const Vec2& ref) const { return origin + jac * ref; }
    Vec2 to_reference(const Vec2& x) const { return jac_inv_t.transpose() * (x - origin); }
    Vec2 grad_to_physical(const Vec2& ref_grad) const { return jac_inv_t * ref_grad; }
};

CellMap cell_map(const Mesh& mesh, int cell);

/// Piecewise polynomial space on a triangulation, broken (dG) or conforming (CG).
class FunctionSpace {
public:
    FunctionSpace(std::shared_ptr<const Mesh> mesh, int degree, Continuity continuity);

    const Mesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
    int degree() const { return degree_; }
    Continuity continuity() const { return continuity_; }
    int local_dofs() const { return local_dofs_; }
    int total_dofs() const { return total_dofs_; }

    std::span<const int> cell_dofs(int cell) const {
        return {dof_map_.data() + static_cast<std::size_t>(cell) * static_cast<std::size_t>(local_dofs_),
                static_cast<std::size_t>(local_dofs_)};
    }

    /// Value of the FE function with the given coefficients at a reference
    /// point of one cell.
    double eval(const Eigen::VectorXd& coeffs, int cell, const Vec2& ref_point) const;

private:
    std::shared_ptr<const Mesh> mesh_;
    int degree_;
    Continuity continuity_;
    int local_dofs_;
    int total_dofs_ = 0;
    std::vector<int> dof_map_; // n_cells * local_dofs
};

/// Sparse matrix E mapping conforming coefficients into broken coefficients of
/// the same mesh and degree; one unit entry per row.
Eigen::SparseMatrix<double> cg_embedding(const FunctionSpace& conforming, const FunctionSpace& broken);

/// Nodal Lagrange interpolation of a scalar field.
Eigen::VectorXd interpolate(const std::function<double(const Vec2&)>& field, const FunctionSpace& space);

} // namespace resmin
