#include "qfs/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qfs {

namespace {

constexpr double pi = std::numbers::pi;

double real_coeff(cdouble c, const char* what)
{
    if (std::abs(c.imag()) > 1e-14 * (1. + std::abs(c)))
        throw std::invalid_argument(std::string("complex mixture coefficient for a real PDE: ") + what);
    return c.real();
}

double coincidence_scale(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& srcs)
{
    double s = 1.;
    if (targets.size()) s = std::max(s, targets.cwiseAbs().maxCoeff());
    if (srcs.size()) s = std::max(s, srcs.cwiseAbs().maxCoeff());
    return s;
}

[[noreturn]] void coincident(int i, int j)
{
    throw std::invalid_argument("coincident target/source pair (target " +
                               std::to_string(i) + ", source " + std::to_string(j) + ")");
}

} // namespace

void KernelSpec::validate() const
{
    if (alpha == cdouble(0.) && beta == cdouble(0.))
        throw std::invalid_argument("kernel mixture (alpha,beta) = (0,0)");
    if (pde == Pde::Helmholtz2D && !(k > 0.))
        throw std::invalid_argument("Helmholtz wavenumber must be positive");
    if (pde == Pde::Stokes2D && !(mu > 0.))
        throw std::invalid_argument("Stokes viscosity must be positive");
}

SourceSet SourceSet::from(const BoundaryQuadrature& q)
{
    return {q.nodes, q.normals, q.weights};
}

SourceSet SourceSet::from(const OffsetCurveSamples& s, bool keep_weights)
{
    SourceSet out{s.points, s.normals, {}};
    if (keep_weights) out.weights = s.weights;
    return out;
}

Eigen::MatrixXd potential_matrix_real(const KernelSpec& spec,
                                      const Eigen::MatrixXd& targets,
                                      const SourceSet& src)
{
    spec.validate();
    if (spec.pde == Pde::Helmholtz2D)
        throw std::invalid_argument("Helmholtz matrices are complex valued");
    int nt = int(targets.rows()), ns = src.size(), b = spec.block();
    bool weighted = src.weights.size() > 0;
    double tol = 1e-14 * coincidence_scale(targets, src.points);
    Eigen::MatrixXd out(nt * b, ns * b);
    double alpha = real_coeff(spec.alpha, "alpha");
    double beta = real_coeff(spec.beta, "beta");

    for (int i = 0; i < nt; ++i) {
        for (int j = 0; j < ns; ++j) {
            double w = weighted ? src.weights[j] : 1.;
            if (spec.pde == Pde::Laplace2D) {
                Eigen::Vector2d r = targets.row(i).head<2>() - src.points.row(j).head<2>();
                double rn = r.norm();
                if (rn <= tol) coincident(i, j);
                double g = -std::log(rn) / (2. * pi);
                double d = r.dot(src.normals.row(j).head<2>()) / (2. * pi * rn * rn);
                out(i, j) = w * (alpha * g + beta * d);
            } else if (spec.pde == Pde::Laplace3D) {
                Eigen::Vector3d r = targets.row(i).head<3>() - src.points.row(j).head<3>();
                double rn = r.norm();
                if (rn <= tol) coincident(i, j);
                double g = 1. / (4. * pi * rn);
                double d = r.dot(src.normals.row(j).head<3>()) / (4. * pi * rn * rn * rn);
                out(i, j) = w * (alpha * g + beta * d);
            } else {  // Stokes2D
                Eigen::Vector2d r = targets.row(i).head<2>() - src.points.row(j).head<2>();
                double r2 = r.squaredNorm();
                double rn = std::sqrt(r2);
                if (rn <= tol) coincident(i, j);
                Eigen::Matrix2d rr = r * r.transpose();
                Eigen::Matrix2d G = (-std::log(rn) * Eigen::Matrix2d::Identity() + rr / r2)
                                    / (4. * pi * spec.mu);
                double rdn = r.dot(src.normals.row(j).head<2>());
                Eigen::Matrix2d D = (rdn / (pi * r2 * r2)) * rr;
                out.block<2, 2>(2 * i, 2 * j) = w * (alpha * G + beta * D);
            }
        }
    }
    return out;
}

Eigen::MatrixXcd potential_matrix_complex(const KernelSpec& spec,
                                          const Eigen::MatrixXd& targets,
                                          const SourceSet& src)
{
    if (spec.pde != Pde::Helmholtz2D)
        return potential_matrix_real(spec, targets, src).cast<cdouble>();
    spec.validate();
    int nt = int(targets.rows()), ns = src.size();
    bool weighted = src.weights.size() > 0;
    double tol = 1e-14 * coincidence_scale(targets, src.points);
    Eigen::MatrixXcd out(nt, ns);
    const cdouble i4(0., 0.25);
    for (int i = 0; i < nt; ++i) {
        for (int j = 0; j < ns; ++j) {
            Eigen::Vector2d r = targets.row(i).head<2>() - src.points.row(j).head<2>();
            double rn = r.norm();
            if (rn <= tol) coincident(i, j);
            double w = weighted ? src.weights[j] : 1.;
            cdouble g = i4 * hankel1_0(spec.k * rn);
            cdouble d = i4 * spec.k * hankel1_1(spec.k * rn)
                        * (r.dot(src.normals.row(j).head<2>()) / rn);
            out(i, j) = w * (spec.alpha * g + spec.beta * d);
        }
    }
    return out;
}

Eigen::MatrixXd stokes_pressure_matrix(double mu, cdouble alpha_c, cdouble beta_c,
                                       const Eigen::MatrixXd& targets,
                                       const SourceSet& src)
{
    if (!(mu > 0.)) throw std::invalid_argument("Stokes viscosity must be positive");
    double alpha = real_coeff(alpha_c, "alpha");
    double beta = real_coeff(beta_c, "beta");
    int nt = int(targets.rows()), ns = src.size();
    bool weighted = src.weights.size() > 0;
    double tol = 1e-14 * coincidence_scale(targets, src.points);
    Eigen::MatrixXd out(nt, 2 * ns);
    for (int i = 0; i < nt; ++i) {
        for (int j = 0; j < ns; ++j) {
            Eigen::Vector2d r = targets.row(i).head<2>() - src.points.row(j).head<2>();
            double r2 = r.squaredNorm();
            if (std::sqrt(r2) <= tol) coincident(i, j);
            double w = weighted ? src.weights[j] : 1.;
            Eigen::Vector2d ny = src.normals.row(j).head<2>();
            Eigen::Vector2d gp = r / (2. * pi * r2);
            Eigen::Vector2d dp = (mu / pi) * (-ny / r2 + 2. * r.dot(ny) * r / (r2 * r2));
            out.block<1, 2>(i, 2 * j) = w * (alpha * gp + beta * dp).transpose();
        }
    }
    return out;
}

Eigen::MatrixXd laplace3d_potential_matrix(cdouble alpha, cdouble beta,
                                           const Eigen::MatrixXd& targets,
                                           const SourceSet& src)
{
    KernelSpec spec{Pde::Laplace3D, alpha, beta};
    return potential_matrix_real(spec, targets, src);
}

} // namespace qfs
