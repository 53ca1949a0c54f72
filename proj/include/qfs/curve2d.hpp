#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>

namespace qfs {

using cdouble = std::complex<double>;

// Closed analytic curve stored as complex Fourier coefficients of
// Z(t) = x1(t) + i x2(t), t in [0,2pi), counterclockwise.
class AnalyticCurve {
public:
    // coeffs[j] multiplies e^{i(nmin+j)t}
    AnalyticCurve(Eigen::VectorXcd coeffs, int nmin, std::string metadata = "");
    AnalyticCurve() : AnalyticCurve(Eigen::VectorXcd::Ones(1), 1) {}  // unit circle

    // polar wobble r(t) = r0(1 + a cos(f t + phi)) about center; |a| < 1
    static AnalyticCurve starfish(double r0, double a, int f, double phi,
                                  const Eigen::Vector2d& center = {0., 0.});
    static AnalyticCurve circle(double radius,
                                const Eigen::Vector2d& center = {0., 0.});
    // trigonometric interpolation of equispaced samples (even count)
    static AnalyticCurve from_samples(const Eigen::MatrixX2d& pts,
                                      std::string metadata = "");

    cdouble z(double t, int deriv = 0) const;  // d^deriv Z / dt^deriv
    Eigen::Vector2d point(double t) const;
    Eigen::Vector2d normal(double t) const;    // outward unit normal
    double speed(double t) const;              // |Z'(t)|
    double curvature(double t) const;          // signed, >0 for the circle

    int nmin() const { return nmin_; }
    int nmax() const { return nmin_ + int(coeffs_.size()) - 1; }
    int bandwidth() const;                     // max |n| with |c_n| above noise
    const Eigen::VectorXcd& coeffs() const { return coeffs_; }
    const std::string& metadata() const { return metadata_; }

    Eigen::Vector2d centroid_coeff() const;    // the n=0 coefficient
    AnalyticCurve translated(const Eigen::Vector2d& d) const;
    // scale all modes except n=0 about the n=0 coefficient
    AnalyticCurve scaled(double s) const;
    AnalyticCurve rotated(double angle) const;

private:
    Eigen::VectorXcd coeffs_;
    int nmin_;
    std::string metadata_;
};

struct BoundaryQuadrature {
    Eigen::VectorXd params;      // t-values 2*pi*j/N
    Eigen::MatrixX2d nodes;
    Eigen::MatrixX2d normals;    // unit outward
    Eigen::VectorXd weights;     // (2pi/N) * speed
    Eigen::VectorXd speeds;
    Eigen::VectorXd curvatures;
    int size() const { return int(params.size()); }
};

BoundaryQuadrature ptr_quadrature(const AnalyticCurve& curve, int N);

enum class CurveSide { Interior, Exterior };

struct OffsetOptions {
    // replace the default quadratic term -(delta^2/2) x'' (which tracks the
    // analytically continued curve to third order) with +delta^2 x''
    bool full_square = false;
    // additionally require the offset-curve speed >= half the boundary speed
    bool check_speed = false;
};

struct OffsetCurveSamples {
    Eigen::VectorXd params;
    Eigen::MatrixX2d points;
    Eigen::MatrixX2d normals;    // unit normals of the offset curve
    Eigen::VectorXd weights;     // arclength weights of the offset curve
    double shift = 0.;           // signed: >0 interior, <0 exterior
    CurveSide side = CurveSide::Interior;
    bool valid = false;
    int size() const { return int(params.size()); }
};

// Offset curve y(t) = x(t) -/+ delta |x'| n - (delta^2/2) x'' sampled at M
// equispaced parameters (minus: interior, plus: exterior). Validity flags are
// set from polyline self-intersection and winding-number containment tests
// (and optionally the half-speed criterion).
OffsetCurveSamples shifted_curve_samples(const AnalyticCurve& curve,
                                         double delta, int M, CurveSide side,
                                         const OffsetOptions& opt = {});

// Samples of Z(t + i delta): mode-n coefficient scaled by e^{-delta n}.
// Positive delta moves inside for counterclockwise curves. Throws if the
// scaled coefficients blow up by more than 1e6 relative to the curve scale.
OffsetCurveSamples imaginary_shift_samples(const AnalyticCurve& curve,
                                           double delta, int M);

// Supremum of delta for which shifted_curve_samples stays valid, found by
// bisection to 1e-3 absolute. The search interval is capped at delta = 1
// (returned when even the cap is valid, e.g. for circles). Returns 0 when
// tiny shifts already fail.
double estimate_max_shift(const AnalyticCurve& curve, CurveSide side, int M,
                          const OffsetOptions& opt = {});

// Dirichlet-kernel resampling matrix from N to Nbig equispaced nodes,
// exact on trigonometric polynomials of degree < N/2 plus the Nyquist cosine.
Eigen::MatrixXd upsampling_matrix(int Nbig, int N);

// |tau_hat_{N/2}| / |tau_hat_0| of the DFT of the samples; +inf when the
// mean vanishes.
double nyquist_decay_ratio(const Eigen::VectorXcd& samples);
double nyquist_decay_ratio(const Eigen::VectorXd& samples);

} // namespace qfs
