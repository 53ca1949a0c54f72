#include <doctest.h>
#include <qfs/curve2d.hpp>

#include <cmath>
#include <numbers>

using namespace qfs;
constexpr double pi = std::numbers::pi;

TEST_CASE("starfish point at t=0") {
    auto c = AnalyticCurve::starfish(1., 0.3, 5, 0.2);
    double r0 = 1. + 0.3 * std::cos(0.2);
    CHECK(c.point(0.).x() == doctest::Approx(r0).epsilon(1e-14));
    CHECK(std::abs(c.point(0.).y()) < 1e-14);
    // 2pi periodicity
    CHECK(std::abs(c.z(0.) - c.z(2. * pi)) < 1e-13);
}

TEST_CASE("zero wobble starfish is the unit circle") {
    auto c = AnalyticCurve::starfish(1., 0., 3, 0.);
    for (double t : {0.3, 1.7, 4.4})
        CHECK(std::abs(c.z(t) - std::polar(1., t)) < 1e-14);
    CHECK_THROWS(AnalyticCurve::starfish(1., 1.0, 3, 0.));
}

TEST_CASE("perimeter against adaptive arclength oracle") {
    // reference values from adaptive quadrature of |x'(t)| at 30 digits
    auto c1 = AnalyticCurve::starfish(2., 0.1, 3, 0.);
    auto q1 = ptr_quadrature(c1, 64);
    CHECK(q1.weights.sum() == doctest::Approx(12.8451786661022008).epsilon(1e-13));
    auto c2 = AnalyticCurve::starfish(1., 0.3, 5, 0.2);
    auto q2 = ptr_quadrature(c2, 128);
    CHECK(q2.weights.sum() == doctest::Approx(9.01720350051514368).epsilon(1e-13));
}

TEST_CASE("circle quadrature weights and normals") {
    auto q = ptr_quadrature(AnalyticCurve::circle(1.), 16);
    for (int j = 0; j < 16; ++j) {
        CHECK(q.weights[j] == doctest::Approx(2. * pi / 16).epsilon(1e-14));
        // radial normals
        CHECK((q.normals.row(j) - q.nodes.row(j)).norm() < 1e-13);
        CHECK(q.normals.row(j).norm() == doctest::Approx(1.).epsilon(1e-14));
        CHECK(q.curvatures[j] == doctest::Approx(1.).epsilon(1e-13));
    }
    CHECK_THROWS(ptr_quadrature(AnalyticCurve::circle(1.), 15));
}

TEST_CASE("PTR is spectrally accurate for exp(cos t)") {
    // integral of exp(cos t) dt = 2*pi*I0(1)
    double exact = 2. * pi * 1.2660658777520083356;
    auto q = ptr_quadrature(AnalyticCurve::circle(1.), 32);
    double acc = 0.;
    for (int j = 0; j < q.size(); ++j) acc += q.weights[j] * std::exp(std::cos(q.params[j]));
    CHECK(std::abs(acc - exact) < 1e-14 * exact);
}

TEST_CASE("PTR error rate matches the pole location of 1/(1.5-cos t)") {
    // exact integral: 2*pi/sqrt(1.5^2-1)
    double exact = 2. * pi / std::sqrt(1.25);
    auto curve = AnalyticCurve::circle(1.);
    std::vector<double> logerr, ns;
    for (int N = 8; N <= 28; N += 4) {
        auto q = ptr_quadrature(curve, N);
        double acc = 0.;
        for (int j = 0; j < N; ++j)
            acc += 2. * pi / N / (1.5 - std::cos(q.params[j]));
        double err = std::abs(acc - exact);
        if (err < 1e-15 * exact) break;
        ns.push_back(N);
        logerr.push_back(std::log(err));
    }
    // least-squares slope of log(err) vs N
    double n = ns.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < ns.size(); ++i) {
        sx += ns[i]; sy += logerr[i]; sxx += ns[i] * ns[i]; sxy += ns[i] * logerr[i];
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double d = std::acosh(1.5);
    CHECK(std::abs(-slope - d) < 0.1 * d);
}

TEST_CASE("interior shift of the unit circle lands at radius 0.905") {
    // 1 - delta + delta^2/2, the Taylor truncation of e^{-delta}
    auto c = AnalyticCurve::circle(1.);
    auto s = shifted_curve_samples(c, 0.1, 32, CurveSide::Interior);
    CHECK(s.valid);
    for (int j = 0; j < s.size(); ++j)
        CHECK(s.points.row(j).norm() == doctest::Approx(0.905).epsilon(1e-13));
    auto e = shifted_curve_samples(c, 0.1, 32, CurveSide::Exterior);
    CHECK(e.valid);
    for (int j = 0; j < e.size(); ++j)
        CHECK(e.points.row(j).norm() == doctest::Approx(1.105).epsilon(1e-13));
}

TEST_CASE("starfish interior shift flips invalid past 0.168") {
    auto c = AnalyticCurve::starfish(1., 0.3, 5, 0.2);
    CHECK(shifted_curve_samples(c, 0.1, 256, CurveSide::Interior).valid);
    CHECK(!shifted_curve_samples(c, 0.2, 256, CurveSide::Interior).valid);
}

TEST_CASE("max interior shift of the paper starfish is near 0.168") {
    auto c = AnalyticCurve::starfish(1., 0.3, 5, 0.2);
    double d0 = estimate_max_shift(c, CurveSide::Interior, 256);
    CHECK(std::abs(d0 - 0.168) < 0.05 * 0.168);
    double dc0 = estimate_max_shift(c, CurveSide::Exterior, 256);
    CHECK(std::abs(dc0 - 0.09) < 0.10 * 0.09);
    // circles never self-intersect: bisection cap is returned
    CHECK(estimate_max_shift(AnalyticCurve::circle(1.), CurveSide::Interior, 64) == 1.0);
}

TEST_CASE("imaginary shift of the circle scales the radius by exp(-shift)") {
    auto c = AnalyticCurve::circle(1.);
    for (double d : {0.3, -0.3}) {
        auto s = imaginary_shift_samples(c, d, 32);
        for (int j = 0; j < s.size(); ++j)
            CHECK(s.points.row(j).norm() == doctest::Approx(std::exp(-d)).epsilon(1e-13));
    }
}

TEST_CASE("imaginary and Taylor shifts agree to third order") {
    auto c = AnalyticCurve::starfish(1., 0.3, 5, 0.2);
    double prev = 0.;
    int step = 0;
    for (double d : {0.1, 0.05, 0.025}) {
        auto a = imaginary_shift_samples(c, d, 64);
        auto b = shifted_curve_samples(c, d, 64, CurveSide::Interior);
        double gap = (a.points - b.points).cwiseAbs().maxCoeff();
        if (step > 0) {
            double shrink = prev / gap;
            CHECK(shrink > 6.);   // third order: factor 8 per halving
            CHECK(shrink < 10.);
        }
        prev = gap;
        ++step;
    }
    // the alternative +delta^2 x'' term lands far from the continued curve
    OffsetOptions fs{.full_square = true};
    auto a = imaginary_shift_samples(c, 0.1, 64);
    auto b = shifted_curve_samples(c, 0.1, 64, CurveSide::Interior, fs);
    CHECK((a.points - b.points).cwiseAbs().maxCoeff() > 0.05);
}

TEST_CASE("coefficient blowup guard for large imaginary shifts") {
    auto c = AnalyticCurve::starfish(1., 0.3, 5, 0.2);
    CHECK_THROWS(imaginary_shift_samples(c, -6., 64));
}

TEST_CASE("upsampling matrix is exact on band-limited samples") {
    int N = 16, Nbig = 48;
    auto L = upsampling_matrix(Nbig, N);
    // rows sum to one (constant reproduction)
    for (int l = 0; l < Nbig; ++l)
        CHECK(L.row(l).sum() == doctest::Approx(1.).epsilon(1e-13));
    Eigen::VectorXd f(N), g(Nbig);
    for (int j = 0; j < N; ++j) f[j] = std::cos(3. * (2. * pi * j / N) + 0.7);
    for (int l = 0; l < Nbig; ++l) g[l] = std::cos(3. * (2. * pi * l / Nbig) + 0.7);
    CHECK((L * f - g).cwiseAbs().maxCoeff() < 1e-13);
    CHECK_THROWS(upsampling_matrix(8, 16));
}

TEST_CASE("upsampling of the Nyquist cosine follows the kernel convention") {
    int N = 16, Nbig = 40;
    auto L = upsampling_matrix(Nbig, N);
    Eigen::VectorXd f(N);
    for (int j = 0; j < N; ++j) f[j] = std::cos(N / 2. * (2. * pi * j / N));
    Eigen::VectorXd g = L * f;
    for (int l = 0; l < Nbig; ++l) {
        // direct evaluation of the resampling sum
        double direct = 0.;
        for (int j = 0; j < N; ++j) {
            double sarg = 2. * pi * (double(l) / Nbig - double(j) / N);
            double phi = 1.;
            for (int k = 1; k <= N / 2 - 1; ++k) phi += 2. * std::cos(k * sarg);
            phi += std::cos(N / 2. * sarg);
            direct += phi / N * f[j];
        }
        CHECK(g[l] == doctest::Approx(direct).epsilon(1e-12));
        // the single-cosine convention reproduces cos((N/2)t) itself
        CHECK(std::abs(g[l] - std::cos(N / 2. * (2. * pi * l / Nbig))) < 1e-12);
    }
}

namespace {
// boundary density with a nearby pole pair: [0.5+sin(3t+1)] Re cot((t-t*)/2)
double pole_density(double t, double tstar_im = 0.15) {
    std::complex<double> ts(0.5, tstar_im);
    std::complex<double> half = 0.5 * (t - ts);
    std::complex<double> cotv = std::cos(half) / std::sin(half);
    return (0.5 + std::sin(3. * t + 1.)) * cotv.real();
}
} // namespace

TEST_CASE("nyquist decay ratio tracks the density's pole distance") {
    for (int N : {100, 200, 300, 400}) {
        Eigen::VectorXd f(N);
        for (int j = 0; j < N; ++j) f[j] = pole_density(2. * pi * j / N);
        double r = nyquist_decay_ratio(f);
        double predicted = std::exp(-0.15 * N / 2.);
        // asymptotic agreement of the decay exponent
        CHECK(std::abs(std::log(r) - std::log(predicted)) < 0.15 * std::abs(std::log(predicted)));
    }
    Eigen::VectorXd c = Eigen::VectorXd::Constant(32, 3.7);
    CHECK(nyquist_decay_ratio(c) == 0.);
    Eigen::VectorXd zmean(4);
    zmean << 1., -1., 1., -1.;
    CHECK(std::isinf(nyquist_decay_ratio(zmean)));
}

TEST_CASE("nyquist ratio of the Nyquist cosine against a direct DFT") {
    int N = 32;
    Eigen::VectorXcd f(N);
    for (int j = 0; j < N; ++j)
        f[j] = std::cos(N / 2. * (2. * pi * j / N)) + 2.;  // offset so mean != 0
    // direct O(N^2) DFT
    std::complex<double> hat0 = 0., hatn = 0.;
    for (int j = 0; j < N; ++j) {
        double t = 2. * pi * j / N;
        hat0 += f[j];
        hatn += f[j] * std::polar(1., -(N / 2.) * t);
    }
    CHECK(nyquist_decay_ratio(f) == doctest::Approx(std::abs(hatn) / std::abs(hat0)).epsilon(1e-13));
}

TEST_CASE("samples round-trip through trigonometric interpolation") {
    auto c = AnalyticCurve::starfish(1., 0.3, 5, 0.2);
    int N = 32;
    Eigen::MatrixX2d pts(N, 2);
    for (int j = 0; j < N; ++j) pts.row(j) = c.point(2. * pi * j / N).transpose();
    auto c2 = AnalyticCurve::from_samples(pts);
    for (double t : {0.1, 2.2, 5.5})
        CHECK(std::abs(c.z(t) - c2.z(t)) < 1e-12);
}
