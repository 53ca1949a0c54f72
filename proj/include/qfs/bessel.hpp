#pragma once
#include <complex>

namespace qfs {

// Bessel functions of the first and second kind, orders 0 and 1, for x > 0.
// Chebyshev series on [0,4] plus amplitude/phase asymptotic expansions with
// crossover at x = 8 (FNLIB style).
double bessel_j0(double x);
double bessel_j1(double x);
double bessel_y0(double x);
double bessel_y1(double x);

// Hankel functions of the first kind, H_n = J_n + i Y_n, real argument.
std::complex<double> hankel1_0(double x);
std::complex<double> hankel1_1(double x);

} // namespace qfs
