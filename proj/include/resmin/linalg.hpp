#pragma once

#include <memory>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "resmin/error.hpp"

namespace resmin {

using SparseMat = Eigen::SparseMatrix<double>;

/// Direct SPD solve; verifies the residual to 1e-10 relative.
Eigen::VectorXd solve_spd(const SparseMat& matrix, const Eigen::VectorXd& rhs);

/// Direct general square solve; verifies the residual to 1e-9 relative.
Eigen::VectorXd solve_square(const SparseMat& matrix, const Eigen::VectorXd& rhs);

/// The symmetric saddle system of the residual minimization:
/// [ G   Bbar ] [eps ]   [ ell ]
/// [ Bbar^T 0 ] [ubar] = [  0  ]
/// with G the n x n SPD Gram matrix and Bbar = B E the n x m coarse operator.
struct SaddleSystem {
    SparseMat gram;
    SparseMat coarse_op;
    Eigen::VectorXd rhs;
};

struct SaddlePoint {
    Eigen::VectorXd eps;
    Eigen::VectorXd u_bar;
};

/// Sparse direct factorization of the full indefinite block matrix. Verifies
/// both block residuals to 1e-9 relative and throws SolverError otherwise.
SaddlePoint solve_saddle(const SaddleSystem& system);

/// Newton-step variant with a nonzero second block right-hand side.
SaddlePoint solve_saddle(const SparseMat& gram, const SparseMat& coarse_op,
                         const Eigen::VectorXd& rhs1, const Eigen::VectorXd& rhs2);

/// Newton-step variant with a curvature block in the (2,2) slot:
/// [ G        Bbar ] [x]   [rhs1]
/// [ Bbar^T   C    ] [y] = [rhs2].
SaddlePoint solve_saddle(const SparseMat& gram, const SparseMat& coarse_op, const SparseMat& curvature,
                         const Eigen::VectorXd& rhs1, const Eigen::VectorXd& rhs2);

/// Factors a square sparse matrix once for repeated solves.
class SquareSolver {
public:
    explicit SquareSolver(const SparseMat& matrix);
    ~SquareSolver();
    SquareSolver(SquareSolver&&) noexcept;
    SquareSolver& operator=(SquareSolver&&) noexcept;

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace resmin
