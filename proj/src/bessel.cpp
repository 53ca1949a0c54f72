#include "qfs/bessel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace qfs {

namespace {

#include "bessel_tables.inc"

const double pi4 = 0.785398163397448309615660845819876;
const double twodpi = 0.636619772367581343075535053490057;

// Split representations of pi/4, 3*pi/4 and 2*pi for compensated phase
// arithmetic.
const double pi4_hi = 0x1.921fb54442d18p-1;
const double pi4_lo = 0x1.1a62633145c07p-55;
const double pi43_hi = 0x1.2d97c7f3321d2p+1;
const double pi43_lo = 0x1.a79394c9e8a0ap-54;
const double twopi_hi = 0x1.921fb54442d18p+2;
const double twopi_lo = 0x1.1a62633145c07p-52;

struct dd { double hi, lo; };

dd two_sum(double a, double b)
{
    double s = a + b;
    double bb = s - a;
    double err = (a - (s - bb)) + (b - bb);
    return {s, err};
}

// cos and sin of (x - phase0 + corr) with the whole phase carried in
// double-double precision; keeps the absolute error near 1e-17 even when x
// is large enough that plain summation loses digits past the oscillation.
void cos_sin_phase(double x, double phase_hi, double phase_lo, double corr,
                   double& c, double& s)
{
    dd t = two_sum(x, -phase_hi);
    t.lo += -phase_lo + corr;
    double n = std::nearbyint(t.hi / twopi_hi);
    double p1 = std::fma(n, -twopi_hi, t.hi);
    double p2 = std::fma(n, -twopi_lo, t.lo);
    dd r = two_sum(p1, p2);
    double ch = std::cos(r.hi), sh = std::sin(r.hi);
    c = ch - r.lo * sh;
    s = sh + r.lo * ch;
}

// Evaluate an n-term Chebyshev series at x; only half of cs[0] is summed.
double csevl(double x, const double* cs, int n)
{
    double b0 = 0., b1 = 0., b2 = 0.;
    double twox = 2. * x;
    for (int i = n - 1; i >= 0; --i) {
        b2 = b1;
        b1 = b0;
        b0 = twox * b1 - b2 + cs[i];
    }
    return 0.5 * (b0 - b2);
}

// Amplitude and cos/sin of the phase of the order-0 asymptotic form, valid
// for x > 4: J0 = ampl*cos(theta), Y0 = ampl*sin(theta).
void ampl_phase0(double x, double& ampl, double& c, double& s)
{
    double corr;
    if (x <= 8.) {
        double z = (128. / (x * x) - 5.) / 3.;
        ampl = (csevl(z, bm0cs, 37) + 0.75) / std::sqrt(x);
        corr = csevl(z, bt02cs, 39) / x;
    } else {
        double z = 128. / (x * x) - 1.;
        ampl = (csevl(z, bm02cs, 40) + 0.75) / std::sqrt(x);
        corr = csevl(z, bth0cs, 44) / x;
    }
    cos_sin_phase(x, pi4_hi, pi4_lo, corr, c, s);
}

void ampl_phase1(double x, double& ampl, double& c, double& s)
{
    double corr;
    if (x <= 8.) {
        double z = (128. / (x * x) - 5.) / 3.;
        ampl = (csevl(z, bm1cs, 37) + 0.75) / std::sqrt(x);
        corr = csevl(z, bt12cs, 39) / x;
    } else {
        double z = 128. / (x * x) - 1.;
        ampl = (csevl(z, bm12cs, 40) + 0.75) / std::sqrt(x);
        corr = csevl(z, bth1cs, 44) / x;
    }
    cos_sin_phase(x, pi43_hi, pi43_lo, corr, c, s);
}

const double xsml = std::sqrt(std::numeric_limits<double>::epsilon() * 8.);

} // namespace

double bessel_j0(double x)
{
    if (!(x >= 0.)) throw std::domain_error("bessel_j0: x must be >= 0");
    if (x <= 4.) {
        if (x < xsml) return 1.;
        return csevl(0.125 * x * x - 1., bj0cs, 19);
    }
    double ampl, c, s;
    ampl_phase0(x, ampl, c, s);
    return ampl * c;
}

double bessel_j1(double x)
{
    if (!(x >= 0.)) throw std::domain_error("bessel_j1: x must be >= 0");
    if (x <= 4.) {
        if (x <= xsml) return 0.5 * x;
        return x * (csevl(0.125 * x * x - 1., bj1cs, 19) + 0.25);
    }
    double ampl, c, s;
    ampl_phase1(x, ampl, c, s);
    return ampl * c;
}

double bessel_y0(double x)
{
    if (!(x > 0.)) throw std::domain_error("bessel_y0: x must be > 0");
    if (x < 4.) {
        return twodpi * std::log(0.5 * x) * bessel_j0(x) + 0.375
            + csevl(0.125 * x * x - 1., by0cs, 19);
    }
    double ampl, c, s;
    ampl_phase0(x, ampl, c, s);
    return ampl * s;
}

double bessel_y1(double x)
{
    if (!(x > 0.)) throw std::domain_error("bessel_y1: x must be > 0");
    if (x <= 4.) {
        return twodpi * std::log(0.5 * x) * bessel_j1(x)
            + (csevl(0.125 * x * x - 1., by1cs, 20) + 0.5) / x;
    }
    double ampl, c, s;
    ampl_phase1(x, ampl, c, s);
    return ampl * s;
}

std::complex<double> hankel1_0(double x)
{
    return {bessel_j0(x), bessel_y0(x)};
}

std::complex<double> hankel1_1(double x)
{
    return {bessel_j1(x), bessel_y1(x)};
}

} // namespace qfs
