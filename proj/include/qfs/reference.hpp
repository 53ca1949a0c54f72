#pragma once

#include "qfs/kernels.hpp"

namespace qfs {

// Which one-sided limit of the layer potential the on-surface matrix
// represents: None gives the principal value, Interior/Exterior add the
// -/+ beta/2 identity jump of the double layer.
enum class BoundaryLimit { None, Interior, Exterior };

// On-surface Nystrom matrix by global product quadrature: the kernel is
// split as K1(t,s) log(4 sin^2((t-s)/2)) + K2(t,s), the log factor
// integrated with its spectral weights and K2 with the trapezoid rule.
// Smooth kernels (double layers, the Stokes rank-one part) take plain
// trapezoid with their analytic diagonal limits. Acts on density samples,
// returns potential values at the nodes.
Eigen::MatrixXd kress_nystrom_real(const AnalyticCurve& curve, int N,
                                   const KernelSpec& spec, BoundaryLimit limit);
Eigen::MatrixXcd kress_nystrom_complex(const AnalyticCurve& curve, int N,
                                       const KernelSpec& spec, BoundaryLimit limit);

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
kress_nystrom(const AnalyticCurve& curve, int N, const KernelSpec& spec,
              BoundaryLimit limit)
{
    if constexpr (std::is_same_v<Scalar, double>)
        return kress_nystrom_real(curve, N, spec, limit);
    else
        return kress_nystrom_complex(curve, N, spec, limit);
}

// Log-quadrature weight R_j(t) for int log(4 sin^2((t-s)/2)) f(s) ds
// with f sampled at s_j = 2 pi j / N.
double kress_log_weight(int N, double t, double sj);

// Adaptive Gauss-Kronrod evaluation of the layer potential of the
// trigonometric interpolant of tau at one off-surface target, to
// tolerance tol. Slow; test oracle only. Returns `block` components.
Eigen::VectorXcd adaptive_near_oracle(const AnalyticCurve& curve,
                                      const Eigen::VectorXcd& tau,
                                      const KernelSpec& spec,
                                      const Eigen::Vector2d& target,
                                      double tol);

// Plain weighted kernel sum at well-separated targets (the smooth rule
// whose near-boundary breakdown QFS repairs).
Eigen::VectorXcd plain_far_eval(const BoundaryQuadrature& quad,
                                const Eigen::VectorXcd& tau,
                                const KernelSpec& spec,
                                const Eigen::MatrixXd& targets);

} // namespace qfs
