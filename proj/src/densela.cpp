#include "qfs/densela.hpp"

namespace qfs {

template <class Scalar>
auto StableSolveOperator<Scalar>::apply_solve(const Vector& rhs) const -> Vector
{
    if (rhs.size() != rows)
        throw std::invalid_argument("apply_solve: rhs length " + std::to_string(rhs.size()) +
                                    " does not match operator rows " + std::to_string(rows));
    if (kind == Kind::Svd) {
        Vector t = U.adjoint() * rhs;
        double smax = sigma.size() ? sigma[0] : 0.;
        for (Eigen::Index i = 0; i < sigma.size(); ++i) {
            if (cutoff > 0. && sigma[i] < cutoff * smax) { t[i] = Scalar(0.); continue; }
            if (sigma[i] == 0.)
                throw std::runtime_error("apply_solve: exactly zero singular value at index " +
                                         std::to_string(i));
            t[i] /= Scalar(sigma[i]);
        }
        return V * t;
    }
    Vector y = lu.permutationP() * rhs;
    lu.matrixLU().template triangularView<Eigen::UnitLower>().solveInPlace(y);
    lu.matrixLU().template triangularView<Eigen::Upper>().solveInPlace(y);
    return y;
}

template <class Scalar>
StableSolveOperator<Scalar>
svd_factor(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& M, double cutoff)
{
    if (M.rows() < M.cols())
        throw std::invalid_argument("svd_factor: matrix must be square or tall");
    Eigen::BDCSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>>
        svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.info() != Eigen::Success)
        throw std::runtime_error("svd_factor: SVD did not converge");
    StableSolveOperator<Scalar> op;
    op.kind = StableSolveOperator<Scalar>::Kind::Svd;
    op.rows = M.rows();
    op.cols = M.cols();
    op.U = svd.matrixU();
    op.V = svd.matrixV();
    op.sigma = svd.singularValues();
    op.cutoff = cutoff;
    return op;
}

template <class Scalar>
StableSolveOperator<Scalar>
lu_factor(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& M)
{
    if (M.rows() != M.cols())
        throw std::invalid_argument("lu_factor: matrix must be square");
    StableSolveOperator<Scalar> op;
    op.kind = StableSolveOperator<Scalar>::Kind::Lu;
    op.rows = M.rows();
    op.cols = M.cols();
    op.lu.compute(M);
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        if (op.lu.matrixLU()(i, i) == Scalar(0.))
            throw std::runtime_error("lu_factor: zero pivot at index " + std::to_string(i));
    return op;
}

template struct StableSolveOperator<double>;
template struct StableSolveOperator<std::complex<double>>;
template StableSolveOperator<double> svd_factor(const Eigen::MatrixXd&, double);
template StableSolveOperator<std::complex<double>> svd_factor(const Eigen::MatrixXcd&, double);
template StableSolveOperator<double> lu_factor(const Eigen::MatrixXd&);
template StableSolveOperator<std::complex<double>> lu_factor(const Eigen::MatrixXcd&);

} // namespace qfs
