#include "resmin/linalg.hpp"

#include <Eigen/SparseCholesky>

#include <string>
#include <vector>

namespace resmin {

namespace {

void check_residual(const SparseMat& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b,
                    double rel_tol, const char* what) {
    const double res = (a * x - b).lpNorm<Eigen::Infinity>();
    const double scale = b.lpNorm<Eigen::Infinity>() + 1.0;
    if (!(res <= rel_tol * scale))
        throw SolverError(std::string(what) + ": residual " + std::to_string(res) + " exceeds tolerance " +
                          std::to_string(rel_tol * scale));
}

} // namespace

Eigen::VectorXd solve_spd(const SparseMat& matrix, const Eigen::VectorXd& rhs) {
    Eigen::SimplicialLDLT<SparseMat> ldlt(matrix);
    if (ldlt.info() != Eigen::Success) throw SolverError("solve_spd: factorization failed (matrix not SPD?)");
    if (ldlt.vectorD().minCoeff() <= 0.0) throw SolverError("solve_spd: matrix is not positive definite");
    Eigen::VectorXd x = ldlt.solve(rhs);
    check_residual(matrix, x, rhs, 1e-10, "solve_spd");
    return x;
}

struct SquareSolver::Impl {
    Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
    SparseMat owned;
};

SquareSolver::SquareSolver(const SparseMat& matrix) : impl_(std::make_unique<Impl>()) {
    impl_->owned = matrix;
    impl_->owned.makeCompressed();
    impl_->lu.compute(impl_->owned);
    if (impl_->lu.info() != Eigen::Success)
        throw SolverError("SquareSolver: factorization failed (singular matrix?)");
}

SquareSolver::~SquareSolver() = default;
SquareSolver::SquareSolver(SquareSolver&&) noexcept = default;
SquareSolver& SquareSolver::operator=(SquareSolver&&) noexcept = default;

Eigen::VectorXd SquareSolver::solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = impl_->lu.solve(rhs);
    check_residual(impl_->owned, x, rhs, 1e-9, "SquareSolver");
    return x;
}

Eigen::VectorXd solve_square(const SparseMat& matrix, const Eigen::VectorXd& rhs) {
    return SquareSolver(matrix).solve(rhs);
}

SaddlePoint solve_saddle(const SparseMat& gram, const SparseMat& coarse_op, const SparseMat& curvature,
                         const Eigen::VectorXd& rhs1, const Eigen::VectorXd& rhs2) {
    const Eigen::Index n = gram.rows();
    const Eigen::Index m = coarse_op.cols();
    if (gram.cols() != n || coarse_op.rows() != n || rhs1.size() != n || rhs2.size() != m)
        throw InvalidInput("solve_saddle: inconsistent block dimensions");
    const bool with_curvature = curvature.nonZeros() > 0;
    if (with_curvature && (curvature.rows() != m || curvature.cols() != m))
        throw InvalidInput("solve_saddle: curvature block dimension mismatch");

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(gram.nonZeros() + 2 * coarse_op.nonZeros() + curvature.nonZeros()));
    for (int k = 0; k < gram.outerSize(); ++k)
        for (SparseMat::InnerIterator it(gram, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    for (int k = 0; k < coarse_op.outerSize(); ++k)
        for (SparseMat::InnerIterator it(coarse_op, k); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(n + it.col()), it.value());
            trips.emplace_back(static_cast<int>(n + it.col()), static_cast<int>(it.row()), it.value());
        }
    if (with_curvature)
        for (int k = 0; k < curvature.outerSize(); ++k)
            for (SparseMat::InnerIterator it(curvature, k); it; ++it)
                trips.emplace_back(static_cast<int>(n + it.row()), static_cast<int>(n + it.col()), it.value());

    SparseMat block(n + m, n + m);
    block.setFromTriplets(trips.begin(), trips.end());
    block.makeCompressed();

    Eigen::VectorXd rhs(n + m);
    rhs.head(n) = rhs1;
    rhs.tail(m) = rhs2;

    Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(block);
    if (lu.info() != Eigen::Success)
        throw SolverError("solve_saddle: factorization of the block system failed (singular saddle system?)");
    const Eigen::VectorXd sol = lu.solve(rhs);

    SaddlePoint out;
    out.eps = sol.head(n);
    out.u_bar = sol.tail(m);

    const double scale = rhs1.lpNorm<Eigen::Infinity>() + rhs2.lpNorm<Eigen::Infinity>() + 1.0;
    const double res1 = (gram * out.eps + coarse_op * out.u_bar - rhs1).lpNorm<Eigen::Infinity>();
    Eigen::VectorXd second = coarse_op.transpose() * out.eps - rhs2;
    if (with_curvature) second += curvature * out.u_bar;
    const double res2 = second.lpNorm<Eigen::Infinity>();
    if (!(res1 <= 1e-9 * scale) || !(res2 <= 1e-9 * scale))
        throw SolverError("solve_saddle: block residuals " + std::to_string(res1) + ", " + std::to_string(res2) +
                          " exceed 1e-9 relative tolerance");
    return out;
}

SaddlePoint solve_saddle(const SparseMat& gram, const SparseMat& coarse_op,
                         const Eigen::VectorXd& rhs1, const Eigen::VectorXd& rhs2) {
    return solve_saddle(gram, coarse_op, SparseMat(coarse_op.cols(), coarse_op.cols()), rhs1, rhs2);
}

SaddlePoint solve_saddle(const SaddleSystem& system) {
    return solve_saddle(system.gram, system.coarse_op, system.rhs,
                        Eigen::VectorXd::Zero(system.coarse_op.cols()));
}

} // namespace resmin
