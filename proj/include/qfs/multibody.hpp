#pragma once

#include "qfs/qfs2d.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace qfs {

// Geometry of a multi-body problem: K wobbly bodies, optionally confined by
// an enclosing circle (Stokes driven flow). Node counts are per body.
struct BodyCollection {
    std::vector<AnalyticCurve> curves;
    std::vector<int> nodes;
    double dmin = 0.;
    std::uint64_t seed = 0;
    double outer_radius = 0.;    // 0: unbounded problem
    int outer_nodes = 0;
    int size() const { return int(curves.size()); }
};

using CenterSampler = std::function<Eigen::Vector2d(std::mt19937_64&)>;

// centers near (a s + b)^p (cos(s+xi), sin(s+xi)) with xi drawn from {0, pi},
// s uniform in [s_lo, s_hi], plus uniform noise in [-1,1]^2
CenterSampler spiral_center_sampler(double a, double b, double p,
                                    double s_lo, double s_hi);
// uniform in [-rbox, rbox]^2, rejecting |c| > rmax
CenterSampler disk_center_sampler(double rbox, double rmax);

// place K bodies with pairwise clearance dmin: accept centers >= 2 r0 apart,
// draw wobble frequency/amplitude/rotation per body, rescale all to max
// radius r0 + dmin/2, run three expansion/rescue rounds on random 10%
// subsets, then a final Newton-refined rescue pass. A positive outer_radius
// adds a confining ring that every body must clear by dmin as well.
BodyCollection generate_bodies(int K, double dmin, double r0,
                               const CenterSampler& sampler, std::uint64_t seed,
                               int max_attempts = 100000, double outer_radius = 0.);

// Newton-refined minimal boundary-to-boundary distance (1e-10), seeded from
// a coarse parameter grid; falls back to a fine grid with a warning
double minimum_separation(const AnalyticCurve& a, const AnalyticCurve& b);

// per-body node counts: local spacing 2 pi R_i / N_i matched to sqrt(dmin),
// scaled by the refinement multiplier, rounded up to even
void assign_resolution(BodyCollection& coll, double multiplier = 1.);

// Pluggable point-summation contract: potential of weightless mixture
// sources at arbitrary targets. The direct implementation is the default;
// an FMM drops into the same slot.
struct SummationBackend {
    std::string name = "direct";
    std::function<Eigen::VectorXcd(const KernelSpec& mixture, const SourceSet& src,
                                   const Eigen::VectorXcd& strength,
                                   const Eigen::MatrixXd& targets)> eval;
};
SummationBackend direct_backend();
// same arithmetic, but reuses the dense kernel matrix while the source and
// target geometry are unchanged (the common case inside GMRES)
SummationBackend cached_direct_backend();

struct BvpSolution {
    KernelSpec spec;                           // BIE kernel of the blocks
    KernelSpec mixture;                        // proxy mixture behind sources
    std::vector<SourceSet> sources;            // per body (outer first, Stokes)
    std::vector<Eigen::VectorXcd> tau;
    std::vector<Eigen::VectorXcd> sigma;
    int iters = 0;
    std::vector<double> res_history;
    bool converged = true;
};

// Exterior Dirichlet scattering of a plane wave exp(i k d.x); a zero
// direction vector means no incident field. Combined-field
// blocks 1/2 + D - ikS, per-body QFS-D self matrices, stored dense block
// inverses for right preconditioning, and a single summation call per matvec
BvpSolution solve_helmholtz_scattering(const BodyCollection& coll, double k,
                                       const Eigen::Vector2d& incident_dir,
                                       double gmres_tol, QfsConfig cfg,
                                       const SummationBackend& backend,
                                       bool precondition = true);

// Interior Stokes QFS operator for an origin-centered circle, built by
// solving the matching system mode by mode in polar Fourier components
// instead of one large SVD; includes the nullspace fix. Agrees with the
// dense construction to the scheme's own aliasing floor at a fraction of
// the cost, which is what makes large enclosing circles affordable.
QfsOperator<double> circulant_stokes_outer(double radius, int N,
                                           const KernelSpec& spec, QfsConfig cfg);

// Confined driven flow: velocity (1,0) on the enclosing circle, no-slip
// inclusions; outer block -1/2 + D + n n^T (interior QFS with the nullspace
// fix), inclusion blocks 1/2 + D + S. circulant_outer swaps the enclosing
// circle's operator for the fast path above; the dense route stays the
// correctness reference.
BvpSolution solve_stokes_driven_flow(const BodyCollection& coll, QfsConfig cfg,
                                     double gmres_tol,
                                     const SummationBackend& backend,
                                     bool precondition = true,
                                     bool circulant_outer = false);

// the same summation pipeline with targets in place of boundary nodes; valid
// on, near, and far from every body with no special-casing
Eigen::VectorXcd evaluate_field(const BvpSolution& sol,
                                const Eigen::MatrixXd& targets,
                                const SummationBackend& backend);

// Stokes pressure from the stored strengths (constant already pinned by the
// outer body's apply-time correction)
Eigen::VectorXd evaluate_field_pressure(const BvpSolution& sol,
                                        const Eigen::MatrixXd& targets);

} // namespace qfs
