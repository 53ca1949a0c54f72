#include "qfs/laplace3d.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace qfs {

namespace {

constexpr double pi = std::numbers::pi;

int even_ceil(double x)
{
    int n = int(std::ceil(x));
    return n % 2 ? n + 1 : n;
}

} // namespace

void gauss_legendre(int n, Eigen::VectorXd& x, Eigen::VectorXd& w)
{
    x.resize(n);
    w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        // Chebyshev-based initial guess, then Newton on P_n
        double z = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1., p1 = 0.;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2. * j + 1.) * z * p1 - j * p2) / (j + 1.);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2. / ((1. - z * z) * pp * pp);
    }
}

EllipsoidQuadrature ellipsoid_quadrature(const Eigen::Vector3d& semiaxes, int Nv)
{
    if (Nv < 8) throw std::invalid_argument("ellipsoid quadrature needs Nv >= 8");
    if (!(semiaxes.minCoeff() > 0.))
        throw std::invalid_argument("semiaxes must be positive");
    EllipsoidQuadrature q;
    q.semiaxes = semiaxes;
    q.Nv = Nv;
    gauss_legendre(Nv, q.vnodes, q.vweights);
    double a = semiaxes[0], b = semiaxes[1], c = semiaxes[2];
    int total = 0;
    q.loops.resize(Nv);
    for (int j = 0; j < Nv; ++j) {
        double s = std::sqrt(1. - q.vnodes[j] * q.vnodes[j]);
        q.loops[j] = std::max(even_ceil(4. * Nv / 3. * s), 8);
        total += q.loops[j];
    }
    q.nodes.resize(total, 3);
    q.normals.resize(total, 3);
    q.weights.resize(total);
    int r = 0;
    for (int j = 0; j < Nv; ++j) {
        double v = q.vnodes[j], s = std::sqrt(1. - v * v);
        int n = q.loops[j];
        for (int l = 0; l < n; ++l, ++r) {
            double u = 2. * pi * l / n;
            q.nodes.row(r) << a * s * std::cos(u), b * s * std::sin(u), c * v;
            // r_u x r_v = (b c s cos u, a c s sin u, a b v), outward
            Eigen::Vector3d cr(b * c * s * std::cos(u), a * c * s * std::sin(u),
                               a * b * v);
            double jac = cr.norm();
            q.normals.row(r) = cr.transpose() / jac;
            q.weights[r] = q.vweights[j] * (2. * pi / n) * jac;
        }
    }
    return q;
}

double min_curvature_radius(const Eigen::Vector3d& semiaxes)
{
    double lo = semiaxes.minCoeff(), hi = semiaxes.maxCoeff();
    return lo * lo / hi;
}

Eigen::MatrixXd surface_upsample_matrix(const Eigen::Vector3d& semiaxes, int Nv,
                                        double rho)
{
    if (rho < 1.) throw std::invalid_argument("upsampling factor must be >= 1");
    auto fine = ellipsoid_quadrature(semiaxes, int(std::lround(rho * Nv)));
    auto coarse = ellipsoid_quadrature(semiaxes, Nv);
    int N = coarse.size(), Nf = fine.size();
    int Nv2 = fine.Nv;

    // barycentric weights on the coarse v-grid (differences scaled by 2 to
    // keep the products in range)
    Eigen::VectorXd bw = Eigen::VectorXd::Ones(Nv);
    for (int i = 0; i < Nv; ++i)
        for (int j = 0; j < Nv; ++j)
            if (j != i) bw[i] /= 2. * (coarse.vnodes[i] - coarse.vnodes[j]);
    Eigen::MatrixXd B(Nv2, Nv);   // Lagrange interpolation coarse -> fine v
    for (int t = 0; t < Nv2; ++t) {
        double vt = fine.vnodes[t], denom = 0.;
        int hit = -1;
        for (int i = 0; i < Nv; ++i) {
            double d = vt - coarse.vnodes[i];
            if (std::abs(d) < 1e-14) { hit = i; break; }
            B(t, i) = bw[i] / d;
            denom += B(t, i);
        }
        if (hit >= 0) {
            B.row(t).setZero();
            B(t, hit) = 1.;
        } else {
            B.row(t) /= denom;
        }
    }
    // odd azimuthal modes ride on sqrt(1-v^2); interpolate the polynomial part
    Eigen::MatrixXd Bodd = B;
    for (int t = 0; t < Nv2; ++t)
        for (int i = 0; i < Nv; ++i)
            Bodd(t, i) *= std::sqrt((1. - fine.vnodes[t] * fine.vnodes[t]) /
                                    (1. - coarse.vnodes[i] * coarse.vnodes[i]));

    std::vector<int> coff(Nv + 1, 0), foff(Nv2 + 1, 0);
    for (int j = 0; j < Nv; ++j) coff[j + 1] = coff[j] + coarse.loops[j];
    for (int j = 0; j < Nv2; ++j) foff[j + 1] = foff[j] + fine.loops[j];

    int K = 0;
    for (int n : coarse.loops) K = std::max(K, n / 2);

    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(Nf, N);
    Eigen::MatrixXd Ga(Nv, N), Gb(Nv, N);
    for (int m = 0; m <= K; ++m) {
        // analysis: cosine/sine coefficients of mode m on every coarse loop
        Ga.setZero();
        Gb.setZero();
        for (int j = 0; j < Nv; ++j) {
            int n = coarse.loops[j];
            if (m > n / 2) continue;
            double fac = (m == 0 || m == n / 2) ? 1. / n : 2. / n;
            for (int l = 0; l < n; ++l) {
                double u = 2. * pi * l / n;
                Ga(j, coff[j] + l) = fac * std::cos(m * u);
                if (m > 0 && m < n / 2) Gb(j, coff[j] + l) = fac * std::sin(m * u);
            }
        }
        const Eigen::MatrixXd& Bm = (m % 2) ? Bodd : B;
        Eigen::MatrixXd Ma = Bm * Ga;
        Eigen::MatrixXd Mb = (m == 0) ? Eigen::MatrixXd() : Eigen::MatrixXd(Bm * Gb);
        // synthesis onto each fine loop that can carry the mode
        for (int t = 0; t < Nv2; ++t) {
            int n = fine.loops[t];
            if (m > n / 2) continue;
            Eigen::VectorXd cs(n), sn(n);
            for (int l = 0; l < n; ++l) {
                double u = 2. * pi * l / n;
                cs[l] = std::cos(m * u);
                sn[l] = std::sin(m * u);
            }
            L.middleRows(foff[t], n).noalias() += cs * Ma.row(t);
            if (m > 0 && m < n / 2)
                L.middleRows(foff[t], n).noalias() += sn * Mb.row(t);
        }
    }
    return L;
}

namespace {

Eigen::MatrixXd kernel3d(const KernelSpec& spec, const Eigen::MatrixXd& targets,
                         const Eigen::MatrixXd& pts, const Eigen::MatrixXd& nrm,
                         const Eigen::VectorXd& wts = {})
{
    SourceSet src;
    src.points = pts;
    src.normals = nrm;
    src.weights = wts;
    return laplace3d_potential_matrix(spec.alpha, spec.beta, targets, src);
}

} // namespace

Qfs3dOperator qfs3d_precompute(const Eigen::Vector3d& semiaxes, int Nv,
                               const KernelSpec& spec, double delta,
                               double delta_c, double rho, bool two_sided)
{
    if (spec.pde != Pde::Laplace3D)
        throw std::invalid_argument("qfs3d_precompute is a 3D Laplace operation");
    double rmin = min_curvature_radius(semiaxes);
    if (!(delta > 0.) || delta >= rmin)
        throw std::invalid_argument("source displacement must sit below the "
                                    "smallest curvature radius");
    if (!(delta_c > 0.) || delta_c >= delta)
        throw std::invalid_argument("check displacement must sit below the "
                                    "source displacement");

    Qfs3dOperator op;
    op.semiaxes = semiaxes;
    op.spec = spec;
    op.mixture = spec;
    op.mixture.alpha = 1.;   // pure charge proxies
    op.mixture.beta = 0.;
    op.delta = delta;
    op.delta_c = delta_c;
    op.rho = rho;
    op.quad = ellipsoid_quadrature(semiaxes, Nv);
    int N = op.quad.size();

    Eigen::MatrixXd L = surface_upsample_matrix(semiaxes, Nv, rho);
    auto up = ellipsoid_quadrature(semiaxes, int(std::lround(rho * Nv)));

    op.sources = op.quad.nodes - delta * op.quad.normals;
    op.source_normals = op.quad.normals;

    auto one_side = [&](double sgn) {
        // sgn +1: interior sources, exterior checks (the exterior limit)
        Eigen::MatrixXd src = op.quad.nodes - sgn * delta * op.quad.normals;
        Eigen::MatrixXd chk = op.quad.nodes + sgn * delta_c * op.quad.normals;
        Eigen::MatrixXd E = kernel3d(op.mixture, chk, src, op.quad.normals);
        Eigen::MatrixXd C = kernel3d(spec, chk, up.nodes, up.normals, up.weights) * L;
        Eigen::MatrixXd X = E.partialPivLu().solve(C);
        Eigen::MatrixXd Bmat = kernel3d(op.mixture, op.quad.nodes, src,
                                        op.quad.normals);
        Eigen::MatrixXd A = Bmat * X;
        return std::pair<Eigen::MatrixXd, Eigen::MatrixXd>(std::move(X),
                                                           std::move(A));
    };
    auto [Xext, Aext] = one_side(+1.);
    op.X = std::move(Xext);
    if (two_sided) {
        auto [Xint, Aint] = one_side(-1.);
        op.nystrom = 0.5 * (Aext + Aint);
        op.nystrom.diagonal().array() += 0.5 * spec.beta.real();
    } else {
        op.nystrom = std::move(Aext);
    }
    return op;
}

Eigen::VectorXd evaluate_potential3d(const Qfs3dOperator& op,
                                     const Eigen::VectorXd& sigma,
                                     const Eigen::MatrixXd& targets)
{
    return kernel3d(op.mixture, targets, op.sources, op.source_normals) * sigma;
}

namespace {

// closest point on the axis-aligned ellipsoid to p (body frame): Newton on
// the Lagrange multiplier of min |x-p| s.t. sum (x_i/a_i)^2 = 1, with a
// bisection bracket as safety net
Eigen::Vector3d project_onto_ellipsoid(const Eigen::Vector3d& semiaxes,
                                       const Eigen::Vector3d& p)
{
    Eigen::Vector3d d = semiaxes.cwiseProduct(semiaxes).cwiseInverse();
    auto g = [&](double lam) {
        double s = 0.;
        for (int i = 0; i < 3; ++i) {
            double x = p[i] / (1. + lam * d[i]);
            s += d[i] * x * x;
        }
        return s - 1.;
    };
    double lo, hi;
    if (g(0.) >= 0.) {      // p outside or on: lambda >= 0
        lo = 0.;
        hi = 1.;
        while (g(hi) > 0.) hi *= 2.;
    } else {                // p inside: lambda in (-min a^2, 0)
        hi = 0.;
        lo = -0.5 / d.maxCoeff();
        while (g(lo) < 0.) lo = 0.5 * (lo - 1. / d.maxCoeff());
    }
    double lam = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        double val = g(lam);
        if (std::abs(val) < 1e-14) break;
        if (val > 0.) lo = lam; else hi = lam;
        double grad = 0.;
        for (int i = 0; i < 3; ++i) {
            double den = 1. + lam * d[i];
            grad += -2. * d[i] * d[i] * p[i] * p[i] / (den * den * den);
        }
        double next = grad != 0. ? lam - val / grad : lam;
        lam = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
    }
    Eigen::Vector3d x;
    for (int i = 0; i < 3; ++i) x[i] = p[i] / (1. + lam * d[i]);
    return x;
}

Eigen::Vector3d project_world(const Eigen::Vector3d& semiaxes,
                              const RigidPlacement& body, const Eigen::Vector3d& p)
{
    Eigen::Vector3d q = body.rot.transpose() * (p - body.center);
    return body.rot * project_onto_ellipsoid(semiaxes, q) + body.center;
}

} // namespace

double ellipsoid_separation(const Eigen::Vector3d& semiaxes,
                            const RigidPlacement& a, const RigidPlacement& b)
{
    Eigen::Vector3d p = b.center, x = a.center;
    for (int it = 0; it < 500; ++it) {
        Eigen::Vector3d xn = project_world(semiaxes, a, p);
        Eigen::Vector3d pn = project_world(semiaxes, b, xn);
        double move = (xn - x).norm() + (pn - p).norm();
        x = xn;
        p = pn;
        if (move < 1e-12) break;
    }
    return (x - p).norm();
}

EllipsoidCluster grow_ellipsoid_cluster(const Eigen::Vector3d& semiaxes, int K,
                                        double dmin, std::uint64_t seed,
                                        int max_attempts)
{
    if (K < 1) throw std::invalid_argument("cluster needs at least one body");
    EllipsoidCluster cl;
    cl.semiaxes = semiaxes;
    cl.dmin = dmin;
    cl.seed = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> G(0., 1.);
    auto random_rotation = [&]() {
        Eigen::Quaterniond q(G(rng), G(rng), G(rng), G(rng));
        q.normalize();
        return q.toRotationMatrix();
    };

    RigidPlacement first;
    first.rot = random_rotation();
    cl.bodies.push_back(first);

    double reach = semiaxes.maxCoeff();
    for (int k = 1; k < K; ++k) {
        bool placed = false;
        for (int att = 0; att < max_attempts && !placed; ++att) {
            RigidPlacement body;
            body.rot = random_rotation();
            Eigen::Vector3d dir(G(rng), G(rng), G(rng));
            dir.normalize();
            auto minsep = [&](double lam) {
                body.center = lam * dir;
                double m = 1e18;
                for (const auto& other : cl.bodies)
                    m = std::min(m, ellipsoid_separation(semiaxes, body, other));
                return m;
            };
            double hi = 0.;
            for (const auto& other : cl.bodies)
                hi = std::max(hi, other.center.norm());
            hi += 2. * reach + dmin + 1.;
            if (minsep(hi) <= dmin) continue;
            double lo = 0.;
            if (minsep(lo) >= dmin) continue;   // ray misses the cluster
            for (int it = 0; it < 80; ++it) {
                double mid = 0.5 * (lo + hi);
                double s = minsep(mid);
                if (std::abs(s - dmin) < 1e-6) { lo = hi = mid; break; }
                (s < dmin ? lo : hi) = mid;
            }
            body.center = 0.5 * (lo + hi) * dir;
            cl.bodies.push_back(body);
            placed = true;
        }
        if (!placed)
            throw std::runtime_error("cluster growth exhausted its attempts");
    }
    return cl;
}

Bvp3dSolution solve_ellipsoid_cluster(const EllipsoidCluster& cluster,
                                      const std::vector<double>& voltages,
                                      const Eigen::Vector3d& E_inc, int Nv,
                                      double gmres_tol, double delta,
                                      double delta_c, double rho)
{
    int K = cluster.size();
    if (int(voltages.size()) != K)
        throw std::invalid_argument("one voltage per body required");
    double rmin = min_curvature_radius(cluster.semiaxes);
    // reference configuration: the aspect-3 study used (0.08, 0.01, 3) at
    // smallest curvature radius 1/6; scale the displacements accordingly
    if (delta <= 0.) delta = 0.48 * rmin;
    if (delta_c <= 0.) delta_c = 0.06 * rmin;
    if (rho < 1.) rho = 3.;

    KernelSpec spec{Pde::Laplace3D, 1., 1.};
    Bvp3dSolution sol;
    sol.cluster = cluster;
    sol.op = qfs3d_precompute(cluster.semiaxes, Nv, spec, delta, delta_c, rho);
    int N0 = sol.op.quad.size();

    std::vector<Eigen::MatrixXd> nodes(K), sources(K), normals(K);
    for (int i = 0; i < K; ++i) {
        const auto& b = cluster.bodies[i];
        nodes[i] = (sol.op.quad.nodes * b.rot.transpose()).rowwise() +
                   b.center.transpose();
        sources[i] = (sol.op.sources * b.rot.transpose()).rowwise() +
                     b.center.transpose();
        normals[i] = sol.op.quad.normals * b.rot.transpose();
    }

    Eigen::MatrixXd A(K * N0, K * N0);
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            if (i == j) {
                A.block(i * N0, j * N0, N0, N0) = sol.op.nystrom;
            } else {
                Eigen::MatrixXd Bij = kernel3d(sol.op.mixture, nodes[i],
                                               sources[j], normals[j]);
                A.block(i * N0, j * N0, N0, N0).noalias() = Bij * sol.op.X;
            }
        }

    Eigen::VectorXd f(K * N0);
    for (int i = 0; i < K; ++i)
        f.segment(i * N0, N0) =
            Eigen::VectorXd::Constant(N0, voltages[i]) - nodes[i] * E_inc;

    auto r = gmres<double>([&](const Eigen::VectorXd& v) {
        return Eigen::VectorXd(A * v);
    }, f, gmres_tol, K * N0);
    if (!r.converged)
        std::fprintf(stderr, "warning: gmres did not reach tolerance, returning partial solution\n");
    sol.iters = r.iters;
    sol.converged = r.converged;
    for (int i = 0; i < K; ++i) {
        sol.tau.push_back(r.x.segment(i * N0, N0));
        sol.sigma.push_back(sol.op.X * sol.tau.back());
    }
    return sol;
}

Eigen::VectorXd evaluate_cluster_field(const Bvp3dSolution& sol,
                                       const Eigen::MatrixXd& targets)
{
    Eigen::VectorXd u = Eigen::VectorXd::Zero(targets.rows());
    int N0 = sol.op.quad.size();
    for (int i = 0; i < sol.cluster.size(); ++i) {
        const auto& b = sol.cluster.bodies[i];
        Eigen::MatrixXd src = (sol.op.sources * b.rot.transpose()).rowwise() +
                              b.center.transpose();
        Eigen::MatrixXd nrm = sol.op.source_normals * b.rot.transpose();
        u += kernel3d(sol.op.mixture, targets, src, nrm) * sol.sigma[i];
    }
    return u;
}

} // namespace qfs
