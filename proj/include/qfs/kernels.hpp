#pragma once

#include "qfs/bessel.hpp"
#include "qfs/curve2d.hpp"

#include <Eigen/Dense>
#include <complex>

namespace qfs {

enum class Pde { Laplace2D, Laplace3D, Helmholtz2D, Stokes2D };

// Layer-potential mixture alpha*SLP + beta*DLP for one PDE.
struct KernelSpec {
    Pde pde = Pde::Laplace2D;
    cdouble alpha{1., 0.};
    cdouble beta{0., 0.};
    double k = 0.;    // Helmholtz wavenumber
    double mu = 1.;   // Stokes viscosity

    void validate() const;
    // dofs per point: 2 for Stokes, else 1
    int block() const { return pde == Pde::Stokes2D ? 2 : 1; }
    int dim() const { return pde == Pde::Laplace3D ? 3 : 2; }
    bool complex_valued() const { return pde == Pde::Helmholtz2D; }
};

// Generic point-source set: points with normals (needed for double layers)
// and optional quadrature weights. Empty weights mean unit weights (the
// proxy-source convention: weights live inside the strengths).
struct SourceSet {
    Eigen::MatrixXd points;    // (#src) x dim
    Eigen::MatrixXd normals;   // (#src) x dim
    Eigen::VectorXd weights;   // empty or (#src)
    int size() const { return int(points.rows()); }

    static SourceSet from(const BoundaryQuadrature& q);
    static SourceSet from(const OffsetCurveSamples& s, bool keep_weights = false);
};

// Dense kernel matrix, entry (i,j) = w_j [alpha G(x_i,y_j) + beta D(x_i,y_j)],
// with 2x2 blocks per point pair for Stokes. Throws when a target coincides
// with a source.
Eigen::MatrixXd potential_matrix_real(const KernelSpec& spec,
                                      const Eigen::MatrixXd& targets,
                                      const SourceSet& src);
Eigen::MatrixXcd potential_matrix_complex(const KernelSpec& spec,
                                          const Eigen::MatrixXd& targets,
                                          const SourceSet& src);

template <class Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>
potential_matrix(const KernelSpec& spec, const Eigen::MatrixXd& targets,
                 const SourceSet& src)
{
    if constexpr (std::is_same_v<Scalar, double>)
        return potential_matrix_real(spec, targets, src);
    else
        return potential_matrix_complex(spec, targets, src);
}

// Pressure rows of the Stokes mixture: (#targets) x 2(#src), entry block
// w_j [alpha G_p + beta D_p]^T.
Eigen::MatrixXd stokes_pressure_matrix(double mu, cdouble alpha, cdouble beta,
                                       const Eigen::MatrixXd& targets,
                                       const SourceSet& src);

// 3D Laplace mixture: entry = w_j [alpha/(4 pi r) + beta (r.n_y)/(4 pi r^3)].
Eigen::MatrixXd laplace3d_potential_matrix(cdouble alpha, cdouble beta,
                                           const Eigen::MatrixXd& targets,
                                           const SourceSet& src);

} // namespace qfs
