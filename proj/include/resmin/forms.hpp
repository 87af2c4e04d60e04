#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "resmin/fem_space.hpp"
#include "resmin/mesh.hpp"

namespace resmin {

enum class BcType { Dirichlet, Neumann };
using BcMap = std::map<std::string, BcType>;

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;
using TensorField = std::function<Eigen::Matrix2d(const Vec2&)>;
using FluxFunction = std::function<Vec2(double)>;

/// Coefficients, boundary data and (optionally) the exact solution of one
/// problem. Linear advection-diffusion when flux is absent; a scalar
/// conservation law div(f(u) - kappa grad u) = source when flux is present.
struct ProblemDef {
    TensorField kappa;            ///< SPD diffusion tensor, possibly piecewise
    VectorField beta;             ///< velocity; null means zero
    ScalarField source;           ///< null means zero
    FluxFunction flux;            ///< f(u); null for linear problems
    FluxFunction flux_deriv;      ///< f'(u)
    FluxFunction flux_deriv2;     ///< f''(u); optional, sharpens the Jacobian
    ScalarField dirichlet;        ///< u_D; null means zero
    ScalarField neumann;          ///< h_N; null means zero
    BcMap bc;                     ///< boundary tag -> condition

    ScalarField exact;            ///< optional
    VectorField exact_grad;       ///< optional

    bool nonlinear() const { return static_cast<bool>(flux); }
    bool has_advection() const { return static_cast<bool>(beta); }
    BcType bc_of(const std::string& tag) const;
};

/// Assembled bilinear form; rows are test dofs, columns trial dofs.
struct AssembledOperator {
    Eigen::SparseMatrix<double> matrix;
    const FunctionSpace* test = nullptr;
    const FunctionSpace* trial = nullptr;
};

/// Diffusion-weighted average data of an interior face:
/// w1 = d1/(d1+d2), w2 = d2/(d1+d2) with di = n . kappa_i n, and the penalty
/// scale gamma = 2 d1 d2/(d1+d2) (harmonic mean of the normal diffusivities).
struct DiffusionWeights {
    double w1 = 0.5;
    double w2 = 0.5;
    double gamma = 0.0;
};
DiffusionWeights diffusion_weights(const Eigen::Matrix2d& kappa1, const Eigen::Matrix2d& kappa2, const Vec2& normal);

/// Shahbazi penalty: (p+1)(p+d)/d times the (averaged) perimeter/area ratio of
/// the incident cells. Pass geometry2 = nullptr on boundary faces.
double penalty_eta_e(const ElementGeometry& geometry1, const ElementGeometry* geometry2, int p, int d = 2);

enum class LfFaceKind { Interior, Dirichlet, Neumann };

/// Lax-Friedrichs numerical flux and its dissipation parameter. u2 is ignored
/// on boundary faces; u_dirichlet is used only for Dirichlet faces. On Neumann
/// faces the flux degenerates to the consistency flux f(u1) . n.
struct LaxFriedrichsFlux {
    double value = 0.0;
    double eta = 0.0;
};
LaxFriedrichsFlux lax_friedrichs_flux(double u1, double u2, const Vec2& normal,
                                      const FluxFunction& flux, const FluxFunction& flux_deriv,
                                      LfFaceKind kind, double u_dirichlet = 0.0);

/// Symmetric weighted interior penalty diffusion form.
AssembledOperator assemble_swip(const FunctionSpace& test, const FunctionSpace& trial,
                                const TensorField& kappa, const BcMap& bc);

/// Upwind advection form; inflow is detected per quadrature point.
AssembledOperator assemble_upwind(const FunctionSpace& test, const FunctionSpace& trial,
                                  const VectorField& beta, const BcMap& bc);

/// Which volume/jump scaling the discrete norm uses: the advective norm of the
/// linear theory (|beta.n| jump weights, streamline derivative) or the
/// convective norm of the conservation-law setting (unit jump weights, full
/// gradient).
enum class GramKind { Advective, Convective };

/// Gram matrix of the inner product inducing the discrete norm; SPD.
AssembledOperator assemble_gram(const FunctionSpace& space, const TensorField& kappa,
                                const VectorField& beta, GramKind kind);

/// Right-hand side of the linear problem, including weak Dirichlet and
/// Neumann data terms.
Eigen::VectorXd assemble_rhs(const FunctionSpace& test, const ProblemDef& problem);

/// Residual n_h(.; u) - l_h(.) of the nonlinear conservation-law form at a
/// broken state vector.
Eigen::VectorXd assemble_nonlinear_residual(const FunctionSpace& space, const Eigen::VectorXd& state,
                                            const ProblemDef& problem);

/// Gateaux derivative of the nonlinear form at a broken state vector.
AssembledOperator assemble_nonlinear_jacobian(const FunctionSpace& space, const Eigen::VectorXd& state,
                                              const ProblemDef& problem);

/// Cellwise split of the squared discrete norm of a broken function: volume
/// terms per cell, interior face terms halved between the incident cells,
/// boundary face terms assigned to the incident cell. Sums to the full
/// squared norm.
std::vector<double> gram_norm_cellwise(const FunctionSpace& space, const TensorField& kappa,
                                       const VectorField& beta, GramKind kind, const Eigen::VectorXd& w);

/// Caches the state-independent parts of the nonlinear form so Newton
/// iterations only reassemble the flux terms.
class NonlinearForm {
public:
    NonlinearForm(const FunctionSpace& space, const ProblemDef& problem);

    const FunctionSpace& space() const { return space_; }

    Eigen::VectorXd residual(const Eigen::VectorXd& state) const;
    Eigen::SparseMatrix<double> jacobian(const Eigen::VectorXd& state) const;

    /// Hessian of u -> eps . n_h(eps-as-test; u): the curvature block coupling
    /// the residual representative into the trial equation of the exact Newton
    /// system. Exact for fluxes with constant second derivative; zero when
    /// flux_deriv2 is absent.
    Eigen::SparseMatrix<double> hessian_contraction(const Eigen::VectorXd& state,
                                                    const Eigen::VectorXd& eps) const;

private:
    const FunctionSpace& space_;
    const ProblemDef& problem_;
    FaceSet faces_;
    Eigen::SparseMatrix<double> swip_;
    Eigen::VectorXd data_; // source + SWIP Dirichlet data (state independent)
};

} // namespace resmin
