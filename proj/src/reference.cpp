#include "qfs/reference.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qfs {

namespace {

constexpr double pi = std::numbers::pi;
constexpr double euler_gamma = 0.57721566490153286;

double log4sin2(double dt)
{
    double s = 2. * std::sin(0.5 * dt);
    return std::log(s * s);
}

double jump_coeff(BoundaryLimit limit)
{
    switch (limit) {
        case BoundaryLimit::Interior: return -0.5;
        case BoundaryLimit::Exterior: return 0.5;
        default: return 0.;
    }
}

double require_real(cdouble c, const char* what)
{
    if (std::abs(c.imag()) > 1e-14 * (1. + std::abs(c)))
        throw std::invalid_argument(std::string("complex mixture coefficient for a real PDE: ") + what);
    return c.real();
}

} // namespace

double kress_log_weight(int N, double t, double sj)
{
    double acc = 0.;
    double dt = t - sj;
    for (int k = 1; k <= N / 2 - 1; ++k) acc += std::cos(k * dt) / k;
    acc += std::cos((N / 2.) * dt) / N;
    return -4. * pi / N * acc;
}

Eigen::MatrixXd kress_nystrom_real(const AnalyticCurve& curve, int N,
                                   const KernelSpec& spec, BoundaryLimit limit)
{
    if (spec.pde == Pde::Helmholtz2D)
        throw std::invalid_argument("Helmholtz on-surface matrices are complex valued");
    if (spec.pde == Pde::Laplace3D)
        throw std::invalid_argument("product quadrature is 2D only");
    spec.validate();
    auto q = ptr_quadrature(curve, N);
    double w = 2. * pi / N;
    // translation invariance on the equispaced grid: one weight per offset
    Eigen::VectorXd Rvec(N);
    for (int d = 0; d < N; ++d) Rvec[d] = kress_log_weight(N, 2. * pi * d / N, 0.);
    double alpha = require_real(spec.alpha, "alpha");
    double beta = require_real(spec.beta, "beta");
    double jump = jump_coeff(limit) * beta;

    if (spec.pde == Pde::Laplace2D) {
        Eigen::MatrixXd A(N, N);
        for (int i = 0; i < N; ++i) {
            for (int j = 0; j < N; ++j) {
                double R = Rvec[(i - j + N) % N];
                double S, D;
                if (i == j) {
                    double K1 = -q.speeds[i] / (4. * pi);
                    double K2 = -std::log(q.speeds[i]) * q.speeds[i] / (2. * pi);
                    S = R * K1 + w * K2;
                    D = w * (-q.curvatures[i] / (4. * pi)) * q.speeds[i];
                } else {
                    Eigen::Vector2d r = (q.nodes.row(i) - q.nodes.row(j)).transpose();
                    double rn = r.norm();
                    double K1 = -q.speeds[j] / (4. * pi);
                    double K = -std::log(rn) * q.speeds[j] / (2. * pi);
                    S = R * K1 + w * (K - K1 * log4sin2(q.params[i] - q.params[j]));
                    D = w * r.dot(q.normals.row(j)) / (2. * pi * rn * rn) * q.speeds[j];
                }
                A(i, j) = alpha * S + beta * D + (i == j ? jump : 0.);
            }
        }
        return A;
    }

    // Stokes
    double mu = spec.mu;
    Eigen::MatrixXd A(2 * N, 2 * N);
    for (int i = 0; i < N; ++i) {
        Eigen::Vector2d ti(-q.normals(i, 1), q.normals(i, 0));  // unit tangent
        Eigen::Matrix2d tt = ti * ti.transpose();
        for (int j = 0; j < N; ++j) {
            double R = Rvec[(i - j + N) % N];
            Eigen::Matrix2d S, D;
            Eigen::Matrix2d K1 = -q.speeds[j] / (8. * pi * mu) * Eigen::Matrix2d::Identity();
            if (i == j) {
                Eigen::Matrix2d K2 = (-std::log(q.speeds[i]) * Eigen::Matrix2d::Identity() + tt)
                                     * (q.speeds[i] / (4. * pi * mu));
                S = R * K1 + w * K2;
                D = w * (-q.curvatures[i] / (2. * pi)) * tt * q.speeds[i];
            } else {
                Eigen::Vector2d r = (q.nodes.row(i) - q.nodes.row(j)).transpose();
                double r2 = r.squaredNorm();
                Eigen::Matrix2d rr = r * r.transpose();
                Eigen::Matrix2d G = (-std::log(std::sqrt(r2)) * Eigen::Matrix2d::Identity()
                                     + rr / r2) / (4. * pi * mu);
                S = R * K1 + w * (G * q.speeds[j] - K1 * log4sin2(q.params[i] - q.params[j]));
                double rdn = r.dot(q.normals.row(j));
                D = w * (rdn / (pi * r2 * r2)) * rr * q.speeds[j];
            }
            Eigen::Matrix2d blk = alpha * S + beta * D;
            if (i == j) blk += jump * Eigen::Matrix2d::Identity();
            A.block<2, 2>(2 * i, 2 * j) = blk;
        }
    }
    return A;
}

Eigen::MatrixXcd kress_nystrom_complex(const AnalyticCurve& curve, int N,
                                       const KernelSpec& spec, BoundaryLimit limit)
{
    if (spec.pde != Pde::Helmholtz2D)
        return kress_nystrom_real(curve, N, spec, limit).cast<cdouble>();
    spec.validate();
    auto q = ptr_quadrature(curve, N);
    double w = 2. * pi / N;
    // translation invariance on the equispaced grid: one weight per offset
    Eigen::VectorXd Rvec(N);
    for (int d = 0; d < N; ++d) Rvec[d] = kress_log_weight(N, 2. * pi * d / N, 0.);
    double k = spec.k;
    cdouble jump = jump_coeff(limit) * spec.beta;
    const cdouble i4(0., 0.25);

    Eigen::MatrixXcd A(N, N);
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < N; ++j) {
            double R = Rvec[(i - j + N) % N];
            cdouble S, D;
            if (i == j) {
                double K1s = -q.speeds[i] / (4. * pi);
                cdouble K2s = (i4 - cdouble(euler_gamma / (2. * pi))
                               - std::log(0.5 * k * q.speeds[i]) / (2. * pi)) * q.speeds[i];
                S = R * K1s + w * K2s;
                // the log-split double layer has zero log part on the
                // diagonal and the Laplace curvature limit as remainder
                D = w * (-q.curvatures[i] / (4. * pi)) * q.speeds[i];
            } else {
                Eigen::Vector2d r = (q.nodes.row(i) - q.nodes.row(j)).transpose();
                double rn = r.norm();
                double ls = log4sin2(q.params[i] - q.params[j]);
                double K1s = -bessel_j0(k * rn) * q.speeds[j] / (4. * pi);
                cdouble Ks = i4 * hankel1_0(k * rn) * q.speeds[j];
                S = R * K1s + w * (Ks - K1s * ls);
                double rdn_r = r.dot(q.normals.row(j)) / rn;
                double K1d = -k / (4. * pi) * bessel_j1(k * rn) * rdn_r * q.speeds[j];
                cdouble Kd = i4 * k * hankel1_1(k * rn) * rdn_r * q.speeds[j];
                D = R * K1d + w * (Kd - K1d * ls);
            }
            A(i, j) = spec.alpha * S + spec.beta * D + (i == j ? jump : cdouble(0.));
        }
    }
    return A;
}

namespace {

// trigonometric interpolant of equispaced samples, component-wise
Eigen::VectorXcd trig_interp(const Eigen::VectorXcd& tau, int N, int block, double s)
{
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(block);
    for (int j = 0; j < N; ++j) {
        double d = s - 2. * pi * j / N;
        double phi = 1.;
        for (int m = 1; m <= N / 2 - 1; ++m) phi += 2. * std::cos(m * d);
        phi += std::cos((N / 2.) * d);
        for (int c = 0; c < block; ++c) out[c] += phi / N * tau[block * j + c];
    }
    return out;
}

// 7-point Gauss / 15-point Kronrod pair on [-1,1]
const double kron_x[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.};
const double kron_w[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
const double gauss_w[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

} // namespace

Eigen::VectorXcd adaptive_near_oracle(const AnalyticCurve& curve,
                                      const Eigen::VectorXcd& tau,
                                      const KernelSpec& spec,
                                      const Eigen::Vector2d& target,
                                      double tol)
{
    spec.validate();
    if (spec.pde == Pde::Laplace3D)
        throw std::invalid_argument("near oracle is 2D only");
    int block = spec.block();
    if (tau.size() % block != 0)
        throw std::invalid_argument("density length incompatible with kernel block size");
    int N = int(tau.size()) / block;
    Eigen::MatrixXd tgt = target.transpose();

    auto integrand = [&](double s) -> Eigen::VectorXcd {
        SourceSet src;
        src.points = curve.point(s).transpose();
        src.normals = curve.normal(s).transpose();
        Eigen::MatrixXcd K = potential_matrix_complex(spec, tgt, src);
        return K * trig_interp(tau, N, block, s) * curve.speed(s);
    };

    struct Panel { double a, b; Eigen::VectorXcd val; double err; };
    auto eval_panel = [&](double a, double b) {
        double c = 0.5 * (a + b), h = 0.5 * (b - a);
        Eigen::VectorXcd k15 = Eigen::VectorXcd::Zero(block);
        Eigen::VectorXcd g7 = Eigen::VectorXcd::Zero(block);
        for (int i = 0; i < 8; ++i) {
            Eigen::VectorXcd fp = integrand(c + h * kron_x[i]);
            Eigen::VectorXcd fm = (i < 7) ? integrand(c - h * kron_x[i]) : Eigen::VectorXcd::Zero(block);
            if (i == 7) {
                k15 += kron_w[i] * fp;
                g7 += gauss_w[3] * fp;
            } else {
                k15 += kron_w[i] * (fp + fm);
                if (i % 2 == 1) g7 += gauss_w[i / 2] * (fp + fm);
            }
        }
        return Panel{a, b, h * k15, h * (k15 - g7).norm()};
    };

    std::vector<Panel> panels;
    for (int p = 0; p < 4; ++p)
        panels.push_back(eval_panel(2. * pi * p / 4., 2. * pi * (p + 1) / 4.));
    const int max_panels = 4000;
    while (true) {
        double total_err = 0.;
        size_t worst = 0;
        for (size_t i = 0; i < panels.size(); ++i) {
            total_err += panels[i].err;
            if (panels[i].err > panels[worst].err) worst = i;
        }
        if (total_err <= tol) break;
        if (int(panels.size()) >= max_panels) {
            Eigen::VectorXcd est = Eigen::VectorXcd::Zero(block);
            for (auto& p : panels) est += p.val;
            throw std::runtime_error("near oracle did not converge: error estimate " +
                                     std::to_string(total_err) + ", value norm " +
                                     std::to_string(est.norm()));
        }
        Panel p = panels[worst];
        double mid = 0.5 * (p.a + p.b);
        panels[worst] = eval_panel(p.a, mid);
        panels.push_back(eval_panel(mid, p.b));
    }
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(block);
    for (auto& p : panels) out += p.val;
    return out;
}

Eigen::VectorXcd plain_far_eval(const BoundaryQuadrature& quad,
                                const Eigen::VectorXcd& tau,
                                const KernelSpec& spec,
                                const Eigen::MatrixXd& targets)
{
    return potential_matrix_complex(spec, targets, SourceSet::from(quad)) * tau;
}

} // namespace qfs
