#pragma once

#include "qfs/densela.hpp"
#include "qfs/kernels.hpp"

#include <iosfwd>
#include <optional>

namespace qfs {

enum class QfsVariant { B, D };
enum class Factorization { Auto, Svd, Lu };   // Auto: lu if square, svd otherwise

struct QfsConfig {
    double eps = 1e-12;          // target tolerance, in (1e-14, 1e-2)
    double upsilon = 1.;         // source upsampling (Stokes wants 1.3)
    double upsilon_c = 1.;       // check upsampling (Stokes wants 1.5)
    double eps_mach = 1e-16;     // formula constant, not the platform epsilon
    bool interior = false;
    // also require offset-curve speeds >= half the boundary speed when
    // testing validity (multi-body solvers turn this on)
    bool half_speed_check = false;
    QfsVariant variant = QfsVariant::D;
    Factorization factorization = Factorization::Auto;

    void validate() const;
    // defaults with the PDE-dependent upsampling filled in
    static QfsConfig defaults_for(Pde pde);
};

// default proxy mixture: Laplace (1,0), Helmholtz (-ik,1), Stokes (1,1)
KernelSpec default_qfs_mixture(const KernelSpec& user);

struct SourceChoice {
    int P = 0;
    double delta = 0.;
    bool fallback = false;       // separation was capped by curve geometry
    OffsetCurveSamples sources;
};
// separation delta = log(1/eps)/N capped at the largest geometrically valid
// shift, then P = ceil(upsilon * log(1/eps)/delta) rounded up to even
SourceChoice choose_sources(const AnalyticCurve& curve, int N, const QfsConfig& cfg);

struct CheckChoice {
    int Nc = 0;
    double delta_c = 0.;
    double rho = 1.;             // boundary upsampling factor
    bool capped = false;
    OffsetCurveSamples checks;
};
CheckChoice choose_check_points(const AnalyticCurve& curve, int N, int P,
                                double delta, const QfsConfig& cfg);

template <class Scalar>
struct QfsOperator {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;

    KernelSpec spec;             // user mixture (alpha, beta)
    KernelSpec mixture;          // proxy mixture (alpha~, beta~)
    QfsConfig cfg;
    AnalyticCurve curve;
    BoundaryQuadrature bq;       // N boundary nodes
    OffsetCurveSamples sources;  // P proxy points
    OffsetCurveSamples checks;   // Nc check points (variant D)
    int N = 0, P = 0, Nc = 0;
    double delta = 0., delta_c = 0., rho = 1.;

    // matching system: E sigma = C tau (variant D) or B sigma = A tau (B).
    // Psys is the source count actually solved for; when P exceeds the
    // number of matching rows the sources are spectrally downsampled to
    // Psys for the solve and sigma upsampled back to P afterwards.
    int Psys = 0;
    Matrix match;                // E (D) or B (B variant), pre-augmentation
    Matrix rhs_map;              // C (D) or the user's A (B variant)
    Matrix B;                    // boundary nodes from solved sources
    Matrix nystrom;              // synthesized (or user) self matrix
    StableSolveOperator<Scalar> solve;
    Matrix Y;                    // V Sigma^-1 (svd path only)
    Matrix Z;                    // U^* rhs_map (svd path only)
    Eigen::MatrixXd sigma_upsample;  // per-component, empty if P == Psys
    bool svd_path = false;
    bool rank_deficient = false;     // exactly zero singular value truncated

    bool charge_fix = false;
    Eigen::VectorXd charge_row;  // density-side augmentation row
    bool nullspace_fix = false;
    Eigen::Vector2d pressure_ref = Eigen::Vector2d::Zero();
};

template <class Scalar>
QfsOperator<Scalar> qfsd_precompute(const AnalyticCurve& curve, int N,
                                    const KernelSpec& spec, const QfsConfig& cfg,
                                    std::optional<KernelSpec> qfs_mixture = {});

template <class Scalar>
QfsOperator<Scalar> qfsb_precompute(const AnalyticCurve& curve, int N,
                                    const KernelSpec& spec,
                                    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A,
                                    const QfsConfig& cfg,
                                    std::optional<KernelSpec> qfs_mixture = {});

// density samples -> proxy strengths, applied factor by factor with the
// innermost product first; length P (x2 for Stokes)
template <class Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic>
qfs_apply(const QfsOperator<Scalar>& op, const Eigen::Vector<Scalar, Eigen::Dynamic>& tau);

// weightless proxy sum at arbitrary targets (far, near, or on-surface;
// the representation's one-sided limit holds on the boundary itself)
template <class Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic>
evaluate_potential(const QfsOperator<Scalar>& op,
                   const Eigen::Vector<Scalar, Eigen::Dynamic>& sigma,
                   const Eigen::MatrixXd& targets);

// Stokes pressure from the same strengths
Eigen::VectorXd evaluate_pressure(const QfsOperator<double>& op,
                                  const Eigen::VectorXd& sigma,
                                  const Eigen::MatrixXd& targets);

// append the total-charge row that restores full rank on curves of unit
// logarithmic capacity (forces the svd path)
template <class Scalar>
QfsOperator<Scalar> apply_laplace_charge_fix(QfsOperator<Scalar> op);

// rank-one correction of the interior Stokes matching system plus the
// pressure-constant adjustment applied at every qfs_apply
QfsOperator<double> apply_stokes_nullspace_fix(QfsOperator<double> op);

// operator cache: versioned binary dump of geometry and factors
template <class Scalar>
void save_operator(const QfsOperator<Scalar>& op, std::ostream& out);
template <class Scalar>
QfsOperator<Scalar> load_operator(std::istream& in);

} // namespace qfs
