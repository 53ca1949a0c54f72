#include "qfs/curve2d.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qfs {

namespace {

constexpr double two_pi = 2. * std::numbers::pi;

Eigen::Vector2d to_vec(cdouble z) { return {z.real(), z.imag()}; }

// proper or touching intersection of segments [a,b] and [c,d]
bool segments_intersect(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                        const Eigen::Vector2d& c, const Eigen::Vector2d& d)
{
    auto cross = [](const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
        return u.x() * v.y() - u.y() * v.x();
    };
    double d1 = cross(b - a, c - a);
    double d2 = cross(b - a, d - a);
    double d3 = cross(d - c, a - c);
    double d4 = cross(d - c, b - c);
    return (d1 * d2 < 0.) && (d3 * d4 < 0.);
}

int winding_number(const Eigen::MatrixX2d& poly, const Eigen::Vector2d& p)
{
    double total = 0.;
    int n = int(poly.rows());
    for (int i = 0; i < n; ++i) {
        Eigen::Vector2d u = poly.row(i).transpose() - p;
        Eigen::Vector2d v = poly.row((i + 1) % n).transpose() - p;
        total += std::atan2(u.x() * v.y() - u.y() * v.x(), u.dot(v));
    }
    return int(std::lround(total / two_pi));
}

} // namespace

AnalyticCurve::AnalyticCurve(Eigen::VectorXcd coeffs, int nmin,
                             std::string metadata)
    : coeffs_(std::move(coeffs)), nmin_(nmin), metadata_(std::move(metadata))
{
    if (coeffs_.size() == 0) throw std::invalid_argument("empty coefficients");
}

AnalyticCurve AnalyticCurve::starfish(double r0, double a, int f, double phi,
                                      const Eigen::Vector2d& center)
{
    if (r0 <= 0.) throw std::invalid_argument("starfish: r0 must be positive");
    if (std::abs(a) >= 1.)
        throw std::invalid_argument("starfish: |a| >= 1 self-intersects");
    if (f < 1) throw std::invalid_argument("starfish: f must be >= 1");
    // r0(1 + a cos(f t + phi)) e^{it} expands into modes 1-f, 0, 1, 1+f
    int nmin = 1 - f;
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(2 * f + 1);
    c[-nmin] = cdouble(center.x(), center.y());        // n = 0
    c[1 - nmin] = r0;                                  // n = 1
    c[1 + f - nmin] += 0.5 * r0 * a * std::polar(1., phi);
    c[1 - f - nmin] += 0.5 * r0 * a * std::polar(1., -phi);
    return AnalyticCurve(std::move(c), nmin, "starfish");
}

AnalyticCurve AnalyticCurve::circle(double radius, const Eigen::Vector2d& center)
{
    Eigen::VectorXcd c(2);
    c[0] = cdouble(center.x(), center.y());
    c[1] = radius;
    return AnalyticCurve(std::move(c), 0, "circle");
}

AnalyticCurve AnalyticCurve::from_samples(const Eigen::MatrixX2d& pts,
                                          std::string metadata)
{
    int n = int(pts.rows());
    if (n < 4 || n % 2 != 0)
        throw std::invalid_argument("from_samples: need an even number >= 4");
    Eigen::VectorXcd zs(n);
    for (int j = 0; j < n; ++j) zs[j] = cdouble(pts(j, 0), pts(j, 1));
    int nmin = -n / 2 + 1;
    Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n);
    for (int m = nmin; m <= n / 2; ++m) {
        cdouble acc = 0.;
        for (int j = 0; j < n; ++j)
            acc += zs[j] * std::polar(1., -m * two_pi * j / n);
        c[m - nmin] = acc / double(n);
    }
    return AnalyticCurve(std::move(c), nmin, std::move(metadata));
}

cdouble AnalyticCurve::z(double t, int deriv) const
{
    cdouble acc = 0.;
    for (int j = 0; j < coeffs_.size(); ++j) {
        int n = nmin_ + j;
        cdouble term = coeffs_[j] * std::polar(1., n * t);
        for (int d = 0; d < deriv; ++d) term *= cdouble(0., n);
        acc += term;
    }
    return acc;
}

Eigen::Vector2d AnalyticCurve::point(double t) const { return to_vec(z(t)); }

Eigen::Vector2d AnalyticCurve::normal(double t) const
{
    cdouble zp = z(t, 1);
    return to_vec(cdouble(0., -1.) * zp / std::abs(zp));
}

double AnalyticCurve::speed(double t) const { return std::abs(z(t, 1)); }

double AnalyticCurve::curvature(double t) const
{
    cdouble zp = z(t, 1), zpp = z(t, 2);
    double sp = std::abs(zp);
    return (std::conj(zp) * zpp).imag() / (sp * sp * sp);
}

int AnalyticCurve::bandwidth() const
{
    double scale = coeffs_.cwiseAbs().maxCoeff();
    int bw = 1;
    for (int j = 0; j < coeffs_.size(); ++j) {
        int n = nmin_ + j;
        if (std::abs(coeffs_[j]) > 1e-14 * scale)
            bw = std::max(bw, std::abs(n));
    }
    return bw;
}

Eigen::Vector2d AnalyticCurve::centroid_coeff() const
{
    if (nmin_ > 0 || nmax() < 0) return {0., 0.};
    return to_vec(coeffs_[-nmin_]);
}

AnalyticCurve AnalyticCurve::translated(const Eigen::Vector2d& d) const
{
    AnalyticCurve out = *this;
    if (nmin_ > 0 || nmax() < 0)
        throw std::logic_error("translated: curve lacks an n=0 mode slot");
    out.coeffs_[-nmin_] += cdouble(d.x(), d.y());
    return out;
}

AnalyticCurve AnalyticCurve::scaled(double s) const
{
    AnalyticCurve out = *this;
    for (int j = 0; j < coeffs_.size(); ++j)
        if (nmin_ + j != 0) out.coeffs_[j] *= s;
    return out;
}

AnalyticCurve AnalyticCurve::rotated(double angle) const
{
    // rotate the shape about its n=0 coefficient
    AnalyticCurve out = *this;
    cdouble r = std::polar(1., angle);
    for (int j = 0; j < coeffs_.size(); ++j)
        if (nmin_ + j != 0) out.coeffs_[j] *= r;
    return out;
}

BoundaryQuadrature ptr_quadrature(const AnalyticCurve& curve, int N)
{
    if (N < 8 || N % 2 != 0)
        throw std::invalid_argument("ptr_quadrature: N must be even and >= 8");
    BoundaryQuadrature q;
    q.params.resize(N);
    q.nodes.resize(N, 2);
    q.normals.resize(N, 2);
    q.weights.resize(N);
    q.speeds.resize(N);
    q.curvatures.resize(N);
    for (int j = 0; j < N; ++j) {
        double t = two_pi * j / N;
        q.params[j] = t;
        cdouble zp = curve.z(t, 1);
        double sp = std::abs(zp);
        q.nodes.row(j) = curve.point(t).transpose();
        q.normals.row(j) = to_vec(cdouble(0., -1.) * zp / sp).transpose();
        q.speeds[j] = sp;
        q.weights[j] = two_pi / N * sp;
        q.curvatures[j] = curve.curvature(t);
    }
    return q;
}

namespace {

AnalyticCurve imaginary_shift_curve(const AnalyticCurve& curve, double delta)
{
    double scale = curve.coeffs().cwiseAbs().maxCoeff();
    Eigen::VectorXcd c = curve.coeffs();
    for (int j = 0; j < c.size(); ++j) {
        int n = curve.nmin() + j;
        c[j] *= std::exp(-delta * n);
        if (std::abs(c[j]) > 1e6 * scale)
            throw std::invalid_argument(
                "imaginary shift: coefficient blowup, shift too large");
    }
    return AnalyticCurve(std::move(c), curve.nmin());
}

// Validity of the offset family at signed shift delta (>0 interior): the
// analytically continued curve Z(t+i delta) must stay simple, on the right
// side of the boundary, and (optionally) keep at least half the boundary
// speed. The max-shift values this reproduces for the reference starfish
// (0.168 inside, 0.09 outside) refer to this continued curve, not to the
// quadratic offset approximation of its samples.
bool offset_valid(const AnalyticCurve& curve, double delta, int M,
                  bool check_speed)
{
    AnalyticCurve g = [&] {
        try {
            return imaginary_shift_curve(curve, delta);
        } catch (const std::invalid_argument&) {
            return AnalyticCurve(Eigen::VectorXcd::Zero(1), 0);
        }
    }();
    if (g.coeffs().size() == 1 && g.coeffs()[0] == 0.) return false;
    Eigen::MatrixX2d pts(M, 2);
    for (int j = 0; j < M; ++j)
        pts.row(j) = to_vec(g.z(two_pi * j / M)).transpose();
    for (int i = 0; i < M; ++i) {
        Eigen::Vector2d a = pts.row(i), b = pts.row((i + 1) % M);
        for (int j = i + 2; j < M; ++j) {
            if (i == 0 && j == M - 1) continue;
            Eigen::Vector2d c = pts.row(j), d = pts.row((j + 1) % M);
            if (segments_intersect(a, b, c, d)) return false;
        }
    }
    int Mb = std::max({64, 4 * curve.bandwidth(), M});
    Eigen::MatrixX2d poly(Mb, 2);
    for (int j = 0; j < Mb; ++j)
        poly.row(j) = curve.point(two_pi * j / Mb).transpose();
    int want = (delta > 0.) ? 1 : 0;
    for (int j = 0; j < M; ++j)
        if (winding_number(poly, pts.row(j).transpose()) != want) return false;
    if (check_speed) {
        for (int j = 0; j < M; ++j) {
            double t = two_pi * j / M;
            if (g.speed(t) < 0.5 * curve.speed(t)) return false;
        }
    }
    return true;
}

} // namespace

OffsetCurveSamples shifted_curve_samples(const AnalyticCurve& curve,
                                         double delta, int M, CurveSide side,
                                         const OffsetOptions& opt)
{
    if (delta <= 0.) throw std::invalid_argument("shifted_curve_samples: delta <= 0");
    if (M < 8) throw std::invalid_argument("shifted_curve_samples: M < 8");
    OffsetCurveSamples s;
    s.side = side;
    s.shift = (side == CurveSide::Interior) ? delta : -delta;
    s.params.resize(M);
    s.points.resize(M, 2);
    s.normals.resize(M, 2);
    s.weights.resize(M);
    // interior offset in complex form: y = Z + i delta Z' + q Z'' with
    // q = -delta^2/2 (the Taylor expansion of Z(t + i delta), default) or
    // +delta^2; exterior flips the sign of the linear term, q is even in delta
    double lin = (side == CurveSide::Interior) ? delta : -delta;
    double q = opt.full_square ? delta * delta : -0.5 * delta * delta;
    for (int j = 0; j < M; ++j) {
        double t = two_pi * j / M;
        s.params[j] = t;
        cdouble y = curve.z(t) + cdouble(0., lin) * curve.z(t, 1) + q * curve.z(t, 2);
        cdouble yp = curve.z(t, 1) + cdouble(0., lin) * curve.z(t, 2) + q * curve.z(t, 3);
        double sp = std::abs(yp);
        s.points.row(j) = to_vec(y).transpose();
        s.normals.row(j) = to_vec(cdouble(0., -1.) * yp / sp).transpose();
        s.weights[j] = two_pi / M * sp;
    }
    s.valid = offset_valid(curve, s.shift, M, opt.check_speed);
    return s;
}

OffsetCurveSamples imaginary_shift_samples(const AnalyticCurve& curve,
                                           double delta, int M)
{
    if (M < 8) throw std::invalid_argument("imaginary_shift_samples: M < 8");
    AnalyticCurve shifted = imaginary_shift_curve(curve, delta);
    OffsetCurveSamples s;
    s.side = (delta >= 0.) ? CurveSide::Interior : CurveSide::Exterior;
    s.shift = delta;
    s.params.resize(M);
    s.points.resize(M, 2);
    s.normals.resize(M, 2);
    s.weights.resize(M);
    for (int j = 0; j < M; ++j) {
        double t = two_pi * j / M;
        s.params[j] = t;
        cdouble yp = shifted.z(t, 1);
        double sp = std::abs(yp);
        s.points.row(j) = to_vec(shifted.z(t)).transpose();
        s.normals.row(j) = to_vec(cdouble(0., -1.) * yp / sp).transpose();
        s.weights[j] = two_pi / M * sp;
    }
    s.valid = offset_valid(curve, delta, M, false);
    return s;
}

double estimate_max_shift(const AnalyticCurve& curve, CurveSide side, int M,
                          const OffsetOptions& opt)
{
    const double cap = 1.0;
    double sign = (side == CurveSide::Interior) ? 1. : -1.;
    auto ok = [&](double d) {
        return offset_valid(curve, sign * d, M, opt.check_speed);
    };
    double lo = 1e-4;
    if (!ok(lo)) return 0.;
    if (ok(cap)) return cap;
    double hi = cap;
    while (hi - lo > 1e-3) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Eigen::MatrixXd upsampling_matrix(int Nbig, int N)
{
    if (N % 2 != 0 || Nbig % 2 != 0)
        throw std::invalid_argument("upsampling_matrix: sizes must be even");
    if (Nbig < N)
        throw std::invalid_argument("upsampling_matrix: downsampling unsupported");
    Eigen::MatrixXd L(Nbig, N);
    for (int l = 0; l < Nbig; ++l) {
        for (int j = 0; j < N; ++j) {
            double sarg = two_pi * (double(l) / Nbig - double(j) / N);
            double phi = 1.;
            for (int k = 1; k <= N / 2 - 1; ++k) phi += 2. * std::cos(k * sarg);
            phi += std::cos(N / 2 * sarg);
            L(l, j) = phi / N;
        }
    }
    return L;
}

double nyquist_decay_ratio(const Eigen::VectorXcd& samples)
{
    int n = int(samples.size());
    if (n % 2 != 0) throw std::invalid_argument("nyquist_decay_ratio: odd length");
    cdouble hat0 = 0., hatn = 0.;
    for (int j = 0; j < n; ++j) {
        hat0 += samples[j];
        hatn += samples[j] * ((j % 2 == 0) ? 1. : -1.);  // e^{-i(N/2)t_j}
    }
    if (std::abs(hat0) == 0.) return std::numeric_limits<double>::infinity();
    return std::abs(hatn) / std::abs(hat0);
}

double nyquist_decay_ratio(const Eigen::VectorXd& samples)
{
    return nyquist_decay_ratio(Eigen::VectorXcd(samples.cast<cdouble>()));
}

} // namespace qfs
