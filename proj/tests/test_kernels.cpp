#include <doctest.h>
#include <qfs/kernels.hpp>

#include <cmath>
#include <numbers>

using namespace qfs;
constexpr double pi = std::numbers::pi;

namespace {

SourceSet single_source(Eigen::Vector2d y, Eigen::Vector2d n)
{
    SourceSet s;
    s.points = y.transpose();
    s.normals = n.transpose();
    return s;
}

// Gauss-Legendre nodes/weights on [-1,1] by Newton iteration
void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w)
{
    x.resize(n); w.resize(n);
    for (int i = 0; i < n; ++i) {
        double t = std::cos(pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1., p1 = t;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2. * k - 1.) * t * p1 - (k - 1.) * p0) / k;
                p0 = p1; p1 = p2;
            }
            double dp = n * (t * p1 - p0) / (t * t - 1.);
            double dt = p1 / dp;
            t -= dt;
            if (std::abs(dt) < 1e-15) break;
        }
        double p0 = 1., p1 = t;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2. * k - 1.) * t * p1 - (k - 1.) * p0) / k;
            p0 = p1; p1 = p2;
        }
        double dp = n * (t * p1 - p0) / (t * t - 1.);
        x[i] = t;
        w[i] = 2. / ((1. - t * t) * dp * dp);
    }
}

// simple product quadrature on the unit sphere
SourceSet sphere_quadrature(int nv, int nu)
{
    Eigen::VectorXd v, wv;
    gauss_legendre(nv, v, wv);
    SourceSet s;
    s.points.resize(nv * nu, 3);
    s.normals.resize(nv * nu, 3);
    s.weights.resize(nv * nu);
    int idx = 0;
    for (int i = 0; i < nv; ++i) {
        double rho = std::sqrt(1. - v[i] * v[i]);
        for (int j = 0; j < nu; ++j) {
            double u = 2. * pi * j / nu;
            Eigen::Vector3d p(rho * std::cos(u), rho * std::sin(u), v[i]);
            s.points.row(idx) = p.transpose();
            s.normals.row(idx) = p.transpose();
            s.weights[idx] = wv[i] * (2. * pi / nu);
            ++idx;
        }
    }
    return s;
}

} // namespace

TEST_CASE("Laplace SLP vanishes at unit distance") {
    KernelSpec spec{Pde::Laplace2D, 1., 0.};
    Eigen::MatrixXd t(1, 2);
    t << 1., 0.;
    auto M = potential_matrix_real(spec, t, single_source({0., 0.}, {1., 0.}));
    CHECK(std::abs(M(0, 0)) < 1e-15);
}

TEST_CASE("Helmholtz SLP at k*r=1 equals (i/4)H0(1)") {
    KernelSpec spec{Pde::Helmholtz2D, 1., 0.};
    spec.k = 1.;
    Eigen::MatrixXd t(1, 2);
    t << 1., 0.;
    auto M = potential_matrix_complex(spec, t, single_source({0., 0.}, {1., 0.}));
    CHECK(M(0, 0).real() == doctest::Approx(-0.0220642).epsilon(1e-5));
    CHECK(M(0, 0).imag() == doctest::Approx(0.1912994).epsilon(1e-5));
}

TEST_CASE("Stokes SLP block at r=(1,0)") {
    KernelSpec spec{Pde::Stokes2D, 1., 0.};
    Eigen::MatrixXd t(1, 2);
    t << 1., 0.;
    auto M = potential_matrix_real(spec, t, single_source({0., 0.}, {0., 1.}));
    Eigen::Matrix2d expect;
    expect << 1. / (4. * pi), 0., 0., 0.;
    CHECK((M - expect).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("Gauss law for the Laplace double layer") {
    KernelSpec spec{Pde::Laplace2D, 0., 1.};
    auto q = ptr_quadrature(AnalyticCurve::starfish(1., 0.3, 5, 0.2), 256);
    Eigen::MatrixXd t(2, 2);
    t << 0.1, -0.2,   // inside
         3.0, 1.0;    // outside
    auto M = potential_matrix_real(spec, t, SourceSet::from(q));
    double inside = M.row(0).sum(), outside = M.row(1).sum();
    CHECK(inside == doctest::Approx(-1.).epsilon(1e-12));
    CHECK(std::abs(outside) < 1e-12);
}

TEST_CASE("pressure kernels at pinned arguments") {
    SourceSet s1 = single_source({0., 0.}, {0., 1.});
    Eigen::MatrixXd t1(1, 2);
    t1 << 1., 0.;
    auto P1 = stokes_pressure_matrix(1., 1., 0., t1, s1);
    CHECK(P1(0, 0) == doctest::Approx(1. / (2. * pi)).epsilon(1e-14));
    CHECK(std::abs(P1(0, 1)) < 1e-15);

    Eigen::MatrixXd t2(1, 2);
    t2 << 0., 2.;
    auto P2 = stokes_pressure_matrix(1., 0., 1., t2, s1);
    CHECK(std::abs(P2(0, 0)) < 1e-15);
    CHECK(P2(0, 1) == doctest::Approx(0.25 / pi).epsilon(1e-14));
}

TEST_CASE("completed-representation pressure decays like 1/r") {
    double mu = 0.7;
    auto q = ptr_quadrature(AnalyticCurve::circle(1.), 64);
    auto src = SourceSet::from(q);
    // translation density
    Eigen::VectorXd tau(2 * q.size());
    for (int j = 0; j < q.size(); ++j) {
        tau[2 * j] = 1.;
        tau[2 * j + 1] = 0.5;
    }
    std::vector<double> lr, lp;
    for (double R : {10., 100., 1000.}) {
        Eigen::MatrixXd t(1, 2);
        t << R, 0.3 * R;
        auto P = stokes_pressure_matrix(mu, 1., 1., t, src);
        lr.push_back(std::log(R));
        lp.push_back(std::log(std::abs((P * tau)(0))));
    }
    double slope = (lp.back() - lp.front()) / (lr.back() - lr.front());
    CHECK(std::abs(-slope - 1.) < 0.05);
}

TEST_CASE("Helmholtz kernel reciprocity") {
    KernelSpec spec{Pde::Helmholtz2D, 1., 0.};
    spec.k = 2.3;
    Eigen::MatrixXd a(1, 2), b(1, 2);
    a << 0.3, -0.1;
    b << 1.4, 0.8;
    auto Mab = potential_matrix_complex(spec, a, single_source({1.4, 0.8}, {0., 1.}));
    auto Mba = potential_matrix_complex(spec, b, single_source({0.3, -0.1}, {0., 1.}));
    CHECK(std::abs(Mab(0, 0) - Mba(0, 0)) < 1e-15);
}

TEST_CASE("Stokes DLP maps a translation density to minus the translation inside") {
    KernelSpec spec{Pde::Stokes2D, 0., 1.};
    spec.mu = 1.;
    auto q = ptr_quadrature(AnalyticCurve::starfish(1., 0.3, 5, 0.2), 256);
    Eigen::MatrixXd t(1, 2);
    t << 0.05, 0.1;
    auto M = potential_matrix_real(spec, t, SourceSet::from(q));
    Eigen::VectorXd tau(2 * q.size());
    for (int j = 0; j < q.size(); ++j) {
        tau[2 * j] = 0.7;
        tau[2 * j + 1] = -0.2;
    }
    Eigen::VectorXd u = M * tau;
    CHECK(u[0] == doctest::Approx(-0.7).epsilon(1e-11));
    CHECK(u[1] == doctest::Approx(0.2).epsilon(1e-11));
}

TEST_CASE("3D Laplace kernel values and Gauss law") {
    Eigen::MatrixXd t(1, 3);
    t << 1., 0., 0.;
    SourceSet s;
    s.points = Eigen::RowVector3d(0., 0., 0.);
    s.normals = Eigen::RowVector3d(0., 0., 1.);
    auto M = laplace3d_potential_matrix(1., 0., t, s);
    CHECK(M(0, 0) == doctest::Approx(1. / (4. * pi)).epsilon(1e-14));

    auto sph = sphere_quadrature(24, 48);
    CHECK(sph.weights.sum() == doctest::Approx(4. * pi).epsilon(1e-13));
    Eigen::MatrixXd inside(1, 3), outside(1, 3);
    inside << 0.2, 0.1, -0.3;
    outside << 0., 0., 2.;
    CHECK(laplace3d_potential_matrix(0., 1., inside, sph).sum()
          == doctest::Approx(-1.).epsilon(1e-12));
    CHECK(std::abs(laplace3d_potential_matrix(0., 1., outside, sph).sum()) < 1e-12);
    // SLP of the unit density on the unit sphere at radius 2 equals 1/2
    CHECK(laplace3d_potential_matrix(1., 0., outside, sph).sum()
          == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("coincident points are rejected with the offending pair") {
    KernelSpec spec{Pde::Laplace2D, 1., 0.};
    Eigen::MatrixXd t(1, 2);
    t << 0.5, 0.5;
    CHECK_THROWS_WITH_AS(potential_matrix_real(spec, t, single_source({0.5, 0.5}, {1., 0.})),
                         doctest::Contains("source 0"), std::invalid_argument);
    CHECK_THROWS(potential_matrix_real(KernelSpec{Pde::Laplace2D, 0., 0.}, t,
                                       single_source({0., 0.}, {1., 0.})));
}
