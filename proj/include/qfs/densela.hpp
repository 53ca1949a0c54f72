#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace qfs {

// Factorized dense operator used for all stability-critical solves.
// Holds either a thin SVD (rectangular or rank-deficient-tolerant path)
// or a partially-pivoted LU (square fast path). Immutable once built.
template <class Scalar>
struct StableSolveOperator {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    enum class Kind { Svd, Lu };

    Kind kind = Kind::Svd;
    Eigen::Index rows = 0, cols = 0;

    // svd factors
    Matrix U, V;
    Eigen::VectorXd sigma;
    // relative cutoff: singular values below cutoff*sigma_max are dropped.
    // Zero (the default) means no truncation; an exactly zero singular
    // value then makes apply_solve throw.
    double cutoff = 0.;

    // lu factors
    Eigen::PartialPivLU<Matrix> lu;

    // x minimizing |M x - rhs| applied factor by factor: V (S^-1 (U* rhs))
    // or U^-1 (L^-1 (P rhs)). No inverse matrix is ever formed.
    Vector apply_solve(const Vector& rhs) const;
};

template <class Scalar>
StableSolveOperator<Scalar>
svd_factor(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& M,
           double cutoff = 0.);

template <class Scalar>
StableSolveOperator<Scalar>
lu_factor(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& M);

template <class Scalar>
struct GmresResult {
    Eigen::Vector<Scalar, Eigen::Dynamic> x;
    int iters = 0;
    std::vector<double> res_history;   // relative residuals, one per iteration
    bool converged = false;
};

namespace detail {
inline double abs2(double v) { return v * v; }
inline double abs2(std::complex<double> v) { return std::norm(v); }
inline double conj_(double v) { return v; }
inline std::complex<double> conj_(std::complex<double> v) { return std::conj(v); }
}

// Non-restarted GMRES. Arnoldi uses modified Gram-Schmidt with a second
// orthogonalization pass whenever the first pass removes most of the new
// vector, which keeps the basis orthogonal through long iterations.
template <class Scalar, class MatVec>
GmresResult<Scalar> gmres(MatVec&& apply,
                          const Eigen::Vector<Scalar, Eigen::Dynamic>& b,
                          double tol, int max_iter)
{
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (!(tol > 0.)) throw std::invalid_argument("gmres: tol must be positive");
    const Eigen::Index n = b.size();
    GmresResult<Scalar> out;
    double bnorm = b.norm();
    if (bnorm == 0.) {
        out.x = Vector::Zero(n);
        out.converged = true;
        return out;
    }

    int m = std::min<int>(max_iter, int(n));
    Matrix V(n, m + 1);
    Matrix H = Matrix::Zero(m + 1, m);
    std::vector<Scalar> cs(m), sn(m);
    Vector g = Vector::Zero(m + 1);

    V.col(0) = b / bnorm;
    g[0] = Scalar(bnorm);

    int k = 0;
    for (; k < m; ++k) {
        Vector w = apply(Vector(V.col(k)));
        double w0 = w.norm();
        for (int i = 0; i <= k; ++i) {
            Scalar h = V.col(i).dot(w);
            H(i, k) = h;
            w -= h * V.col(i);
        }
        if (w.norm() < 0.7 * w0) {
            for (int i = 0; i <= k; ++i) {
                Scalar h = V.col(i).dot(w);
                H(i, k) += h;
                w -= h * V.col(i);
            }
        }
        double wnorm = w.norm();
        H(k + 1, k) = Scalar(wnorm);
        bool happy = wnorm < 1e-14 * bnorm;
        if (!happy) V.col(k + 1) = w / wnorm;

        // apply stored Givens rotations, then generate a new one
        for (int i = 0; i < k; ++i) {
            Scalar t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
            H(i + 1, k) = -detail::conj_(sn[i]) * H(i, k) + detail::conj_(cs[i]) * H(i + 1, k);
            H(i, k) = t;
        }
        double denom = std::sqrt(detail::abs2(H(k, k)) + detail::abs2(H(k + 1, k)));
        if (denom == 0.) { cs[k] = Scalar(1.); sn[k] = Scalar(0.); }
        else { cs[k] = detail::conj_(H(k, k)) / Scalar(denom); sn[k] = detail::conj_(H(k + 1, k)) / Scalar(denom); }
        H(k, k) = cs[k] * H(k, k) + sn[k] * H(k + 1, k);
        H(k + 1, k) = Scalar(0.);
        g[k + 1] = -detail::conj_(sn[k]) * g[k];
        g[k] = cs[k] * g[k];

        double res = std::abs(g[k + 1]) / bnorm;
        out.res_history.push_back(res);
        if (res <= tol || happy) { ++k; out.converged = true; break; }
    }

    int kk = std::max(k, 1);
    Vector y = H.topLeftCorner(kk, kk)
                   .template triangularView<Eigen::Upper>()
                   .solve(g.head(kk));
    out.x = V.leftCols(kk) * y;
    out.iters = k;
    return out;
}

} // namespace qfs
