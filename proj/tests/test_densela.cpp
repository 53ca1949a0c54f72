#include <doctest.h>
#include <qfs/densela.hpp>
#include <qfs/kernels.hpp>

#include <random>

using namespace qfs;

namespace {
Eigen::MatrixXd random_matrix(int rows, int cols, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd M(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) M(i, j) = gauss(rng);
    return M;
}
} // namespace

TEST_CASE("SVD of the identity has unit singular values") {
    auto op = svd_factor<double>(Eigen::MatrixXd::Identity(4, 4));
    CHECK((op.sigma - Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("tiny singular values survive unregularized") {
    Eigen::MatrixXd M = Eigen::Vector2d(1., 1e-8).asDiagonal();
    auto op = svd_factor<double>(M);
    CHECK(op.sigma[0] == doctest::Approx(1.).epsilon(1e-14));
    CHECK(op.sigma[1] == doctest::Approx(1e-8).epsilon(1e-12));
    // solve actually divides by 1e-8
    Eigen::Vector2d x = op.apply_solve(Eigen::Vector2d(1., 1.));
    CHECK(x[1] == doctest::Approx(1e8).epsilon(1e-12));
}

TEST_CASE("SVD factors are orthonormal and reconstruct") {
    Eigen::MatrixXd M = random_matrix(20, 10, 7);
    auto op = svd_factor<double>(M);
    CHECK((op.U.transpose() * op.U - Eigen::MatrixXd::Identity(10, 10)).norm() < 1e-13);
    CHECK((op.V.transpose() * op.V - Eigen::MatrixXd::Identity(10, 10)).norm() < 1e-13);
    Eigen::MatrixXd R = op.U * op.sigma.asDiagonal() * op.V.transpose();
    CHECK((R - M).norm() < 1e-13 * M.norm());
    // nonincreasing singular values
    for (int i = 1; i < 10; ++i) CHECK(op.sigma[i] <= op.sigma[i - 1]);
    CHECK_THROWS(svd_factor<double>(random_matrix(5, 8, 1)));
}

TEST_CASE("LU pivoting and residual") {
    auto id = lu_factor<double>(Eigen::MatrixXd::Identity(3, 3));
    Eigen::Vector3d r(1., 2., 3.);
    CHECK((id.apply_solve(r) - r).norm() < 1e-15);

    Eigen::MatrixXd S(2, 2);
    S << 0., 1., 1., 0.;
    auto sw = lu_factor<double>(S);
    Eigen::Vector2d x = sw.apply_solve(Eigen::Vector2d(3., 7.));
    CHECK(x[0] == doctest::Approx(7.).epsilon(1e-15));
    CHECK(x[1] == doctest::Approx(3.).epsilon(1e-15));

    // ill-conditioned Vandermonde still factors accurately
    int n = 12;
    Eigen::MatrixXd Vm(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) Vm(i, j) = std::pow(double(i) / (n - 1), j);
    auto op = lu_factor<double>(Vm);
    Eigen::MatrixXd L = op.lu.matrixLU().triangularView<Eigen::UnitLower>();
    Eigen::MatrixXd Uf = op.lu.matrixLU().triangularView<Eigen::Upper>();
    Eigen::MatrixXd PM = op.lu.permutationP() * Vm;
    CHECK((PM - L * Uf).norm() < 1e-13 * Vm.norm());

    CHECK_THROWS(lu_factor<double>(Eigen::MatrixXd::Zero(2, 2)));
    CHECK_THROWS(lu_factor<double>(random_matrix(3, 4, 2)));
}

TEST_CASE("apply_solve on a diagonal operator") {
    Eigen::MatrixXd M = Eigen::Vector2d(2., 4.).asDiagonal();
    for (auto op : {svd_factor<double>(M), lu_factor<double>(M)}) {
        Eigen::Vector2d x = op.apply_solve(Eigen::Vector2d(2., 4.));
        CHECK((x - Eigen::Vector2d::Ones()).norm() < 1e-15);
    }
}

TEST_CASE("round trip through the proxy-to-boundary matrix on concentric circles") {
    int N = 64;
    double delta = 0.2;
    // radius 2: a unit-radius boundary sits exactly at the zero of the
    // single-layer log potential and the constant mode degenerates
    auto curve = AnalyticCurve::circle(2.);
    auto bq = ptr_quadrature(curve, N);
    auto src = SourceSet::from(shifted_curve_samples(curve, delta, N, CurveSide::Interior));
    KernelSpec spec{Pde::Laplace2D, 1., 0.};
    Eigen::MatrixXd E = potential_matrix_real(spec, bq.nodes, src);
    auto op = svd_factor(E);
    Eigen::VectorXd rhs(N);
    for (int j = 0; j < N; ++j) rhs[j] = std::exp(std::cos(2. * M_PI * j / N));
    Eigen::VectorXd x = op.apply_solve(rhs);
    CHECK((E * x - rhs).norm() < 1e-10 * rhs.norm());
}

TEST_CASE("zero singular value triggers an error, cutoff silences it") {
    Eigen::MatrixXd M = Eigen::Vector2d(1., 0.).asDiagonal();
    auto op = svd_factor<double>(M);
    CHECK_THROWS(op.apply_solve(Eigen::Vector2d(1., 1.)));
    auto trunc = svd_factor<double>(M, 1e-12);
    Eigen::Vector2d x = trunc.apply_solve(Eigen::Vector2d(1., 1.));
    CHECK(x[0] == doctest::Approx(1.).epsilon(1e-14));
    CHECK(x[1] == 0.);
}

TEST_CASE("svd and lu solves agree on random systems") {
    Eigen::MatrixXd M = random_matrix(30, 30, 11) + 10. * Eigen::MatrixXd::Identity(30, 30);
    Eigen::VectorXd rhs = random_matrix(30, 1, 12);
    auto xs = svd_factor<double>(M).apply_solve(rhs);
    auto xl = lu_factor<double>(M).apply_solve(rhs);
    CHECK((xs - xl).norm() < 1e-12 * xs.norm());
    // consistency: solving M x against a manufactured solution
    Eigen::VectorXd xr = random_matrix(30, 1, 13);
    CHECK((svd_factor<double>(M).apply_solve(M * xr) - xr).norm() < 1e-12 * xr.norm());
}

TEST_CASE("gmres basics") {
    auto ident = [](const Eigen::VectorXd& v) { return v; };
    Eigen::VectorXd b = random_matrix(8, 1, 3);
    auto r = gmres<double>(ident, b, 1e-12, 50);
    CHECK(r.converged);
    CHECK(r.iters == 1);
    CHECK((r.x - b).norm() < 1e-12);

    Eigen::VectorXd d(10);
    for (int i = 0; i < 10; ++i) d[i] = i + 1.;
    auto diagop = [&](const Eigen::VectorXd& v) { return (d.array() * v.array()).matrix().eval(); };
    auto r2 = gmres<double>(diagop, Eigen::VectorXd::Ones(10), 1e-12, 50);
    CHECK(r2.converged);
    CHECK(r2.iters <= 10);
    CHECK((d.array() * r2.x.array() - 1.).matrix().norm() < 1e-11);
    // residual history never increases
    for (size_t i = 1; i < r2.res_history.size(); ++i)
        CHECK(r2.res_history[i] <= r2.res_history[i - 1] * (1. + 1e-14));
}

TEST_CASE("gmres matches a dense solve and flags non-convergence") {
    int n = 40;
    Eigen::MatrixXd M = random_matrix(n, n, 21) + 8. * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd b = random_matrix(n, 1, 22);
    auto mv = [&](const Eigen::VectorXd& v) { return (M * v).eval(); };
    auto r = gmres<double>(mv, b, 1e-12, 200);
    CHECK(r.converged);
    Eigen::VectorXd xd = lu_factor<double>(M).apply_solve(b);
    CHECK((r.x - xd).norm() < 1e-10 * xd.norm());

    auto r2 = gmres<double>(mv, b, 1e-14, 3);
    CHECK(!r2.converged);
    CHECK(r2.iters == 3);
}

TEST_CASE("complex gmres on a Helmholtz-like shifted system") {
    int n = 25;
    Eigen::MatrixXcd M = random_matrix(n, n, 31).cast<std::complex<double>>();
    M += std::complex<double>(6., 2.) * Eigen::MatrixXcd::Identity(n, n);
    Eigen::VectorXcd b = random_matrix(n, 1, 32).cast<std::complex<double>>();
    auto mv = [&](const Eigen::VectorXcd& v) { return (M * v).eval(); };
    auto r = gmres<std::complex<double>>(mv, b, 1e-12, 100);
    CHECK(r.converged);
    CHECK((M * r.x - b).norm() < 1e-11 * b.norm());
}
