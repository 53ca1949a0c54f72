#pragma once

#include "qfs/densela.hpp"
#include "qfs/kernels.hpp"

#include <cstdint>
#include <vector>

namespace qfs {

// Product quadrature on a triaxial ellipsoid: Gauss-Legendre loops in the
// polar parameter v, a periodic trapezoid rule of n_j nodes along each
// loop, with n_j scaled to the loop circumference (never below 8, rounded
// up to even). Node count comes out near 0.9 Nv^2.
struct EllipsoidQuadrature {
    Eigen::Vector3d semiaxes = {1., 1., 1.};
    int Nv = 0;
    Eigen::VectorXd vnodes, vweights;   // Gauss-Legendre rule over v in [-1,1]
    std::vector<int> loops;             // trapezoid nodes per loop
    Eigen::MatrixXd nodes, normals;     // N0 x 3, outward unit normals
    Eigen::VectorXd weights;            // N0 surface weights
    int size() const { return int(nodes.rows()); }
};

EllipsoidQuadrature ellipsoid_quadrature(const Eigen::Vector3d& semiaxes, int Nv);

// Gauss-Legendre rule on [-1,1] (Newton on the Legendre recurrence)
void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w);

// Spectral resample of node values from resolution Nv to round(rho*Nv):
// per-loop DFTs, zero-padding to the largest azimuthal frequency present,
// barycentric Lagrange interpolation across loops done mode by mode (odd
// modes interpolated after dividing by sqrt(1-v^2)), then zero-padded
// inverse DFTs onto the output loops.
Eigen::MatrixXd surface_upsample_matrix(const Eigen::Vector3d& semiaxes, int Nv,
                                        double rho);

// Smallest radius of curvature of the ellipsoid, min(axis)^2 / max(axis);
// source and check displacements must stay below it.
double min_curvature_radius(const Eigen::Vector3d& semiaxes);

// One-body 3D operator. Sources sit at constant normal displacement delta
// inside the surface, check points at delta_c outside; the matching system
// is square, solved by LU with the solve map X stored explicitly (3D runs
// do not chase eps_mach). The self matrix averages the interior- and
// exterior-limit discretizations and adds the jump term explicitly, which
// keeps its condition number near 3.
struct Qfs3dOperator {
    Eigen::Vector3d semiaxes;
    KernelSpec spec;               // user mixture (alpha, beta)
    KernelSpec mixture;            // proxy mixture, pure SLP by default
    double delta = 0., delta_c = 0., rho = 1.;
    EllipsoidQuadrature quad;
    Eigen::MatrixXd sources;       // N0 x 3, inside the body
    Eigen::MatrixXd source_normals;
    Eigen::MatrixXd X;             // density samples -> proxy strengths
    Eigen::MatrixXd nystrom;       // N0 x N0 self matrix
};

Qfs3dOperator qfs3d_precompute(const Eigen::Vector3d& semiaxes, int Nv,
                               const KernelSpec& spec, double delta,
                               double delta_c, double rho, bool two_sided = true);

// weightless proxy sum at arbitrary exterior targets
Eigen::VectorXd evaluate_potential3d(const Qfs3dOperator& op,
                                     const Eigen::VectorXd& sigma,
                                     const Eigen::MatrixXd& targets);

// Rigid placement of one body: node x maps to rot * x + center.
struct RigidPlacement {
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

struct EllipsoidCluster {
    Eigen::Vector3d semiaxes;
    double dmin = 0.;
    std::uint64_t seed = 0;
    std::vector<RigidPlacement> bodies;
    int size() const { return int(bodies.size()); }
};

// Distance between two placed copies of the ellipsoid: alternating
// projection between the bodies, each projection a Newton iteration on the
// Lagrange multiplier of the closest-point problem. Returns ~0 on overlap.
double ellipsoid_separation(const Eigen::Vector3d& semiaxes,
                            const RigidPlacement& a, const RigidPlacement& b);

// Grow a cluster: each new body gets a random SO(3) orientation and slides
// towards the origin along a random ray until its minimum distance to the
// existing bodies matches dmin to 1e-6.
EllipsoidCluster grow_ellipsoid_cluster(const Eigen::Vector3d& semiaxes, int K,
                                        double dmin, std::uint64_t seed,
                                        int max_attempts = 1000);

struct Bvp3dSolution {
    EllipsoidCluster cluster;
    Qfs3dOperator op;              // shared one-body operator (rigid motion
                                   // leaves the kernel invariant)
    std::vector<Eigen::VectorXd> tau;
    std::vector<Eigen::VectorXd> sigma;
    int iters = 0;
    bool converged = true;
};

// Exterior Dirichlet electrostatics on the cluster: body j held at voltage
// V_j inside an applied field, data f = V_j - E_inc . x, completed blocks
// 1/2 + D + S, dense block matrix with off-diagonal blocks synthesized
// through the shared X, unpreconditioned GMRES. Zero delta/delta_c/rho pick
// the reference configuration (0.08, 0.01, 3 for the unit-aspect scale)
// scaled by the smallest curvature radius.
Bvp3dSolution solve_ellipsoid_cluster(const EllipsoidCluster& cluster,
                                      const std::vector<double>& voltages,
                                      const Eigen::Vector3d& E_inc, int Nv,
                                      double gmres_tol = 1e-8, double delta = 0.,
                                      double delta_c = 0., double rho = 0.);

// scattered potential u (excludes the incident part E_inc . x)
Eigen::VectorXd evaluate_cluster_field(const Bvp3dSolution& sol,
                                       const Eigen::MatrixXd& targets);

} // namespace qfs
