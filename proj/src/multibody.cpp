#include "qfs/multibody.hpp"

#include "qfs/reference.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace qfs {

namespace {

constexpr double pi = std::numbers::pi;

// uniform double in [0,1) straight from the engine, so the draw sequence
// does not depend on the standard library's distribution internals
double urand(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

int even_ceil(double x)
{
    int n = int(std::ceil(x));
    return n % 2 ? n + 1 : n;
}

Eigen::Vector2d center_of(const AnalyticCurve& c) { return c.centroid_coeff(); }

double max_radius(const AnalyticCurve& c, int M = 256)
{
    Eigen::Vector2d ctr = center_of(c);
    double R = 0.;
    for (int j = 0; j < M; ++j)
        R = std::max(R, (c.point(2. * pi * j / M) - ctr).norm());
    return R;
}

AnalyticCurve with_max_radius(const AnalyticCurve& c, double R)
{
    return c.scaled(R / max_radius(c));
}

// barely-resolved pointwise distance used inside the expansion/rescue loops
double coarse_separation(const AnalyticCurve& a, const AnalyticCurve& b, int M = 64)
{
    double d = std::numeric_limits<double>::infinity();
    Eigen::MatrixX2d pb(M, 2);
    for (int j = 0; j < M; ++j) pb.row(j) = b.point(2. * pi * j / M).transpose();
    for (int i = 0; i < M; ++i) {
        Eigen::Vector2d pa = a.point(2. * pi * i / M);
        for (int j = 0; j < M; ++j)
            d = std::min(d, (pa - pb.row(j).transpose()).norm());
    }
    return d;
}

double ring_clearance(const AnalyticCurve& c, double outer_radius, int M = 1024)
{
    double reach = 0.;
    for (int j = 0; j < M; ++j)
        reach = std::max(reach, c.point(2. * pi * j / M).norm());
    return outer_radius - reach;
}

// --- block-circulant machinery for origin-centered circles ---------------
// vector fields on a circle, split into polar components, diagonalize
// rotation-invariant kernels mode by mode in 2x2 blocks

// response of the angular mode exp(i n phi) (polar components) at a
// reference point sitting at angle zero, from one block row of the kernel
// matrix; rotational symmetry extends it everywhere
Eigen::Matrix2cd mode_symbol(const Eigen::MatrixXd& row, int n)
{
    int Q = int(row.cols()) / 2;
    Eigen::Matrix2cd M = Eigen::Matrix2cd::Zero();
    for (int m = 0; m < Q; ++m) {
        double phi = 2. * pi * m / Q;
        double cp = std::cos(phi), sp = std::sin(phi);
        cdouble ph(std::cos(n * phi), std::sin(n * phi));
        Eigen::Matrix2d K = row.middleCols(2 * m, 2);
        Eigen::Vector2d er(cp, sp), et(-sp, cp);
        M.col(0) += (K * er) * ph;
        M.col(1) += (K * et) * ph;
    }
    return M;
}

// coefficient layout per mode n (components r, theta): n=0 cosine only,
// 0<n<H cosine and sine, n=H=N/2 cosine only unless nyq_sine (the sine
// vanishes on the analysis grid but not on a finer synthesis grid)
int mode_offset(int n) { return n == 0 ? 0 : 2 + 4 * (n - 1); }

// Cartesian node values on the N-point circle grid -> coefficients
Eigen::MatrixXd polar_analysis_matrix(int N)
{
    int H = N / 2;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * N, 2 * N);
    for (int j = 0; j < N; ++j) {
        double t = 2. * pi * j / N;
        double ct = std::cos(t), st = std::sin(t);
        for (int n = 0; n <= H; ++n) {
            double fac = (n == 0 || n == H) ? 1. / N : 2. / N;
            double cn = std::cos(n * t), sn = std::sin(n * t);
            int r = mode_offset(n);
            A(r, 2 * j) += fac * cn * ct;        // alpha_r
            A(r, 2 * j + 1) += fac * cn * st;
            if (n > 0 && n < H) {
                A(r + 1, 2 * j) += fac * sn * ct;    // beta_r
                A(r + 1, 2 * j + 1) += fac * sn * st;
            }
            int q = (n > 0 && n < H) ? r + 2 : r + 1;
            A(q, 2 * j) += fac * cn * -st;       // alpha_theta
            A(q, 2 * j + 1) += fac * cn * ct;
            if (n > 0 && n < H) {
                A(q + 1, 2 * j) += fac * sn * -st;   // beta_theta
                A(q + 1, 2 * j + 1) += fac * sn * ct;
            }
        }
    }
    return A;
}

// coefficients -> Cartesian values on a Q-point circle grid
Eigen::MatrixXd polar_synthesis_matrix(int Q, int H, bool nyq_sine)
{
    int ncols = nyq_sine ? 2 + 4 * H : 2 * 2 * H;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(2 * Q, ncols);
    for (int m = 0; m < Q; ++m) {
        double phi = 2. * pi * m / Q;
        double cp = std::cos(phi), sp = std::sin(phi);
        for (int n = 0; n <= H; ++n) {
            bool sines = n > 0 && (n < H || nyq_sine);
            double cn = std::cos(n * phi), sn = std::sin(n * phi);
            int c = mode_offset(n);
            S(2 * m, c) += cp * cn;              // alpha_r
            S(2 * m + 1, c) += sp * cn;
            if (sines) {
                S(2 * m, c + 1) += cp * sn;      // beta_r
                S(2 * m + 1, c + 1) += sp * sn;
            }
            int q = sines ? c + 2 : c + 1;
            S(2 * m, q) += -sp * cn;             // alpha_theta
            S(2 * m + 1, q) += cp * cn;
            if (sines) {
                S(2 * m, q + 1) += -sp * sn;     // beta_theta
                S(2 * m + 1, q + 1) += cp * sn;
            }
        }
    }
    return S;
}

// a complex 2x2 symbol g acts on (cos, sin) coefficient pairs as
// [[Re g, Im g], [-Im g, Re g]]
Eigen::Matrix4d realify(const Eigen::Matrix2cd& G)
{
    Eigen::Matrix4d B;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            cdouble g = G(i, j);
            B(2 * i, 2 * j) = g.real();
            B(2 * i, 2 * j + 1) = g.imag();
            B(2 * i + 1, 2 * j) = -g.imag();
            B(2 * i + 1, 2 * j + 1) = g.real();
        }
    return B;
}

// inverse of a block-circulant matrix, reconstructed from its first block
// row and applied through the mode basis; used to precondition with the
// enclosing circle's self matrix without a dense factorization
std::function<Eigen::VectorXd(const Eigen::VectorXd&)>
circulant_inverse_apply(const Eigen::MatrixXd& top2, int N)
{
    int H = N / 2;
    auto A = std::make_shared<Eigen::MatrixXd>(polar_analysis_matrix(N));
    auto S = std::make_shared<Eigen::MatrixXd>(polar_synthesis_matrix(N, H, false));
    auto blocks = std::make_shared<std::vector<Eigen::Matrix4d>>();
    auto b0 = std::make_shared<Eigen::Matrix2d>(
        Eigen::Matrix2d(mode_symbol(top2, 0).real().inverse()));
    auto bH = std::make_shared<Eigen::Matrix2d>(
        Eigen::Matrix2d(mode_symbol(top2, H).real().inverse()));
    for (int n = 1; n < H; ++n)
        blocks->push_back(realify(mode_symbol(top2, n).inverse()));
    return [A, S, blocks, b0, bH, H](const Eigen::VectorXd& v) {
        Eigen::VectorXd c = *A * v;
        c.head<2>() = *b0 * c.head<2>().eval();
        for (int n = 1; n < H; ++n)
            c.segment<4>(mode_offset(n)) =
                (*blocks)[n - 1] * c.segment<4>(mode_offset(n)).eval();
        c.tail<2>() = *bH * c.tail<2>().eval();
        return Eigen::VectorXd(*S * c);
    };
}

double coarse_nearest(const BodyCollection& coll, int i)
{
    double d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < coll.size(); ++j)
        if (j != i) d = std::min(d, coarse_separation(coll.curves[i], coll.curves[j]));
    if (coll.outer_radius > 0.) {
        // clearance to the confining ring
        Eigen::Vector2d ctr = center_of(coll.curves[i]);
        d = std::min(d, coll.outer_radius - ctr.norm() - max_radius(coll.curves[i]));
    }
    return d;
}

} // namespace

CenterSampler spiral_center_sampler(double a, double b, double p,
                                    double s_lo, double s_hi)
{
    return [=](std::mt19937_64& rng) {
        double xi = (rng() & 1) ? pi : 0.;
        double s = s_lo + (s_hi - s_lo) * urand(rng);
        double r = std::pow(a * s + b, p);
        Eigen::Vector2d c(r * std::cos(s + xi), r * std::sin(s + xi));
        c[0] += 2. * urand(rng) - 1.;
        c[1] += 2. * urand(rng) - 1.;
        return c;
    };
}

CenterSampler disk_center_sampler(double rbox, double rmax)
{
    return [=](std::mt19937_64& rng) {
        for (;;) {
            Eigen::Vector2d c(rbox * (2. * urand(rng) - 1.),
                              rbox * (2. * urand(rng) - 1.));
            if (c.norm() <= rmax) return c;
        }
    };
}

double minimum_separation(const AnalyticCurve& a, const AnalyticCurve& b)
{
    const int M = 128;
    double best = std::numeric_limits<double>::infinity();
    double s0 = 0., t0 = 0.;
    Eigen::MatrixX2d pb(M, 2);
    for (int j = 0; j < M; ++j) pb.row(j) = b.point(2. * pi * j / M).transpose();
    for (int i = 0; i < M; ++i) {
        Eigen::Vector2d pa = a.point(2. * pi * i / M);
        for (int j = 0; j < M; ++j) {
            double d = (pa - pb.row(j).transpose()).norm();
            if (d < best) { best = d; s0 = 2. * pi * i / M; t0 = 2. * pi * j / M; }
        }
    }
    // Newton on the stationarity of |A(s)-B(t)|^2 / 2
    auto to_vec = [](cdouble z) { return Eigen::Vector2d(z.real(), z.imag()); };
    double s = s0, t = t0;
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
        Eigen::Vector2d A = to_vec(a.z(s)), Ap = to_vec(a.z(s, 1)), App = to_vec(a.z(s, 2));
        Eigen::Vector2d B = to_vec(b.z(t)), Bp = to_vec(b.z(t, 1)), Bpp = to_vec(b.z(t, 2));
        Eigen::Vector2d r = A - B;
        Eigen::Vector2d g(r.dot(Ap), -r.dot(Bp));
        Eigen::Matrix2d H;
        H << Ap.dot(Ap) + r.dot(App), -Ap.dot(Bp),
             -Ap.dot(Bp), Bp.dot(Bp) - r.dot(Bpp);
        Eigen::Vector2d step = H.fullPivLu().solve(g);
        if (!step.allFinite() || step.norm() > 1.) break;
        s -= step[0];
        t -= step[1];
        if (step.norm() < 1e-13) { ok = true; break; }
    }
    if (ok) {
        double d = (to_vec(a.z(s)) - to_vec(b.z(t))).norm();
        if (d <= best + 1e-8) return d;
    }
    std::fprintf(stderr, "warning: separation Newton diverged, using fine grid\n");
    const int F = 1024;
    double fine = std::numeric_limits<double>::infinity();
    Eigen::MatrixX2d qb(F, 2);
    for (int j = 0; j < F; ++j) qb.row(j) = b.point(2. * pi * j / F).transpose();
    for (int i = 0; i < F; ++i) {
        Eigen::Vector2d pa = a.point(2. * pi * i / F);
        for (int j = 0; j < F; ++j)
            fine = std::min(fine, (pa - qb.row(j).transpose()).norm());
    }
    return fine;
}

BodyCollection generate_bodies(int K, double dmin, double r0,
                               const CenterSampler& sampler, std::uint64_t seed,
                               int max_attempts, double outer_radius)
{
    if (K < 1) throw std::invalid_argument("generate_bodies: K >= 1 required");
    if (!(dmin > 0.) || !(r0 > 0.))
        throw std::invalid_argument("generate_bodies: dmin and r0 must be positive");
    std::mt19937_64 rng(seed);
    BodyCollection coll;
    coll.dmin = dmin;
    coll.seed = seed;
    coll.outer_radius = outer_radius;

    std::vector<Eigen::Vector2d> centers;
    while (int(centers.size()) < K) {
        int attempts = 0;
        for (;;) {
            if (++attempts > max_attempts)
                throw std::runtime_error("generate_bodies: center sampler exhausted");
            Eigen::Vector2d c = sampler(rng);
            bool far = true;
            for (const auto& p : centers)
                if ((c - p).norm() < 2. * r0) { far = false; break; }
            if (far) { centers.push_back(c); break; }
        }
    }

    // wobble family r(t) = r0 (1 + a cos(f t + phi)); rarer, gentler high
    // frequencies keep any one body from dominating the resolution budget
    const int freqs[5] = {3, 4, 5, 6, 7};
    const double cum[5] = {16. / 31., 24. / 31., 28. / 31., 30. / 31., 1.};
    for (int i = 0; i < K; ++i) {
        double u = urand(rng);
        int f = freqs[4];
        for (int q = 0; q < 5; ++q)
            if (u < cum[q]) { f = freqs[q]; break; }
        double amax = 0.3 * std::pow(3. / f, 1.5);
        double a = amax * urand(rng);
        double phi = 2. * pi * urand(rng);
        coll.curves.push_back(with_max_radius(
            AnalyticCurve::starfish(r0, a, f, phi, centers[i]), r0 + dmin / 2.));
    }

    if (K >= 2) {
        for (int round = 0; round < 3; ++round) {
            int picks = std::max(1, int(std::lround(0.1 * K)));
            std::vector<int> order(K);
            for (int i = 0; i < K; ++i) order[i] = i;
            for (int i = K - 1; i > 0; --i)
                std::swap(order[i], order[int(urand(rng) * (i + 1))]);
            for (int q = 0; q < picks; ++q) {
                int i = order[q];
                double R0 = max_radius(coll.curves[i]);
                bool crowded = false;
                for (;;) {
                    double R = max_radius(coll.curves[i]);
                    coll.curves[i] = with_max_radius(coll.curves[i], R + dmin);
                    if (coarse_nearest(coll, i) < dmin) { crowded = true; break; }
                    if (max_radius(coll.curves[i]) > 1.5 * R0) break;
                }
                if (crowded) {
                    int guard = 0;
                    while (coarse_nearest(coll, i) <= dmin && ++guard < 200)
                        coll.curves[i] = with_max_radius(
                            coll.curves[i], max_radius(coll.curves[i]) - dmin / 10.);
                }
            }
        }
        // coarse distances can overestimate clearance; a Newton-refined pass
        // shrinks any body still violating dmin
        for (int i = 0; i < K; ++i) {
            int guard = 0;
            for (;;) {
                double d = std::numeric_limits<double>::infinity();
                for (int j = 0; j < K; ++j)
                    if (j != i)
                        d = std::min(d, minimum_separation(coll.curves[i], coll.curves[j]));
                if (outer_radius > 0.) d = std::min(d, ring_clearance(coll.curves[i], outer_radius));
                if (d > dmin || ++guard >= 100) break;
                coll.curves[i] = with_max_radius(
                    coll.curves[i], max_radius(coll.curves[i]) - dmin / 10.);
            }
        }
    }
    return coll;
}

void assign_resolution(BodyCollection& coll, double multiplier)
{
    if (!(multiplier >= 1.))
        throw std::invalid_argument("assign_resolution: multiplier >= 1 required");
    double h = std::sqrt(coll.dmin);
    coll.nodes.resize(coll.size());
    for (int i = 0; i < coll.size(); ++i)
        coll.nodes[i] = std::max(16, even_ceil(multiplier * 2. * pi *
                                               max_radius(coll.curves[i]) / h));
    if (coll.outer_radius > 0.)
        coll.outer_nodes = std::max(16, even_ceil(multiplier * 2. * pi *
                                                  coll.outer_radius / h));
}

SummationBackend direct_backend()
{
    SummationBackend b;
    b.name = "direct";
    b.eval = [](const KernelSpec& mixture, const SourceSet& src,
                const Eigen::VectorXcd& strength, const Eigen::MatrixXd& targets) {
        return (potential_matrix_complex(mixture, targets, src) * strength).eval();
    };
    return b;
}

SummationBackend cached_direct_backend()
{
    // dense summation that keeps the kernel matrix from the previous call;
    // source and target geometry repeat across GMRES iterations, so this
    // turns the per-iteration cost into a plain matvec
    struct Cache {
        KernelSpec spec{};
        Eigen::MatrixXd srcpts, srcnrm, tgts;
        Eigen::MatrixXcd mat;
        Eigen::MatrixXd rmat;     // real-kernel PDEs keep a real matrix
        bool valid = false;
    };
    auto cache = std::make_shared<Cache>();
    SummationBackend b;
    b.name = "direct-cached";
    b.eval = [cache](const KernelSpec& mixture, const SourceSet& src,
                     const Eigen::VectorXcd& strength, const Eigen::MatrixXd& targets) {
        Cache& c = *cache;
        bool real_kernel = mixture.pde != Pde::Helmholtz2D;
        bool hit = c.valid && c.spec.pde == mixture.pde && c.spec.k == mixture.k &&
                   c.spec.alpha == mixture.alpha && c.spec.beta == mixture.beta &&
                   c.spec.mu == mixture.mu &&
                   c.srcpts.rows() == src.points.rows() && c.srcpts == src.points &&
                   c.srcnrm == src.normals &&
                   c.tgts.rows() == targets.rows() && c.tgts == targets;
        if (!hit) {
            if (real_kernel) {
                c.rmat = potential_matrix_real(mixture, targets, src);
                c.mat.resize(0, 0);
            } else {
                c.mat = potential_matrix_complex(mixture, targets, src);
                c.rmat.resize(0, 0);
            }
            c.spec = mixture;
            c.srcpts = src.points;
            c.srcnrm = src.normals;
            c.tgts = targets;
            c.valid = true;
        }
        if (!real_kernel) return Eigen::VectorXcd(c.mat * strength);
        Eigen::VectorXcd out = (c.rmat * strength.real()).cast<cdouble>();
        if (!strength.imag().isZero(0.))
            out += cdouble(0., 1.) * (c.rmat * strength.imag());
        return out;
    };
    return b;
}

namespace {

template <class Scalar>
struct BodySetup {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    std::vector<QfsOperator<Scalar>> ops;
    // stored one-body block inverses, applied as functions so the enclosing
    // circle can swap in a circulant solve
    std::vector<std::function<Vector(const Vector&)>> inv;
    std::vector<int> offset;   // dof offsets into the stacked vector
    Eigen::MatrixXd all_nodes;
    SourceSet all_src;
    int total = 0;
};

// skip_inv marks a body whose inverse the caller supplies afterwards
template <class Scalar>
void finalize_setup(BodySetup<Scalar>& s, int block, int skip_inv = -1)
{
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    int nb = int(s.ops.size());
    s.offset.resize(nb + 1);
    s.offset[0] = 0;
    int nodes = 0, srcs = 0;
    for (int i = 0; i < nb; ++i) {
        s.offset[i + 1] = s.offset[i] + block * s.ops[i].N;
        nodes += s.ops[i].N;
        srcs += s.ops[i].P;
    }
    s.total = s.offset[nb];
    s.all_nodes.resize(nodes, 2);
    s.all_src.points.resize(srcs, 2);
    s.all_src.normals.resize(srcs, 2);
    int rn = 0, rs = 0;
    for (int i = 0; i < nb; ++i) {
        s.all_nodes.middleRows(rn, s.ops[i].N) = s.ops[i].bq.nodes;
        s.all_src.points.middleRows(rs, s.ops[i].P) = s.ops[i].sources.points;
        s.all_src.normals.middleRows(rs, s.ops[i].P) = s.ops[i].sources.normals;
        rn += s.ops[i].N;
        rs += s.ops[i].P;
    }
    for (int i = 0; i < nb; ++i) {
        if (i == skip_inv) {
            s.inv.emplace_back();
            continue;
        }
        auto lu = std::make_shared<Eigen::PartialPivLU<Matrix>>(s.ops[i].nystrom);
        s.inv.push_back([lu](const Vector& v) { return Vector(lu->solve(v)); });
    }
}

template <class Scalar>
Eigen::VectorXcd stack_strengths(const BodySetup<Scalar>& s,
                                 const std::vector<Eigen::Vector<Scalar, Eigen::Dynamic>>& sig,
                                 int block)
{
    int total = 0;
    for (const auto& v : sig) total += int(v.size());
    Eigen::VectorXcd out(total);
    int r = 0;
    for (const auto& v : sig) {
        out.segment(r, v.size()) = v.template cast<cdouble>();
        r += int(v.size());
    }
    (void)block;
    return out;
}

} // namespace

BvpSolution solve_helmholtz_scattering(const BodyCollection& coll, double k,
                                       const Eigen::Vector2d& incident_dir,
                                       double gmres_tol, QfsConfig cfg,
                                       const SummationBackend& backend,
                                       bool precondition)
{
    if (coll.size() < 1 || int(coll.nodes.size()) != coll.size())
        throw std::invalid_argument("collection needs curves with assigned node counts");
    KernelSpec bie{Pde::Helmholtz2D, cdouble(0., -k), 1.};
    bie.k = k;
    cfg.interior = false;
    cfg.half_speed_check = true;

    BodySetup<cdouble> s;
    for (int i = 0; i < coll.size(); ++i)
        s.ops.push_back(qfsd_precompute<cdouble>(coll.curves[i], coll.nodes[i], bie, cfg));
    finalize_setup(s, 1);
    int nb = coll.size();

    Eigen::VectorXcd f(s.total);
    if (incident_dir.norm() == 0.) {
        f.setZero();    // no incident field
    } else {
        for (int i = 0, r = 0; i < nb; ++i)
            for (int j = 0; j < s.ops[i].N; ++j, ++r)
                f[r] = -std::exp(cdouble(0., k * incident_dir.dot(
                                                 s.ops[i].bq.nodes.row(j).transpose())));
    }

    auto matvec = [&](const Eigen::VectorXcd& v) {
        std::vector<Eigen::VectorXcd> sig(nb);
        for (int i = 0; i < nb; ++i) {
            Eigen::VectorXcd ti = v.segment(s.offset[i], s.ops[i].N);
            if (precondition) ti = s.inv[i](ti);
            sig[i] = qfs_apply(s.ops[i], ti);
        }
        return backend.eval(s.ops[0].mixture, s.all_src,
                            stack_strengths(s, sig, 1), s.all_nodes);
    };
    auto r = gmres<cdouble>(matvec, f, gmres_tol, s.total);
    if (!r.converged)
        std::fprintf(stderr, "warning: gmres did not reach tolerance, returning partial solution\n");

    BvpSolution sol;
    sol.spec = bie;
    sol.mixture = s.ops[0].mixture;
    sol.iters = r.iters;
    sol.res_history = r.res_history;
    sol.converged = r.converged;
    for (int i = 0; i < nb; ++i) {
        Eigen::VectorXcd ti = r.x.segment(s.offset[i], s.ops[i].N);
        if (precondition) ti = s.inv[i](ti);
        sol.tau.push_back(ti);
        sol.sigma.push_back(qfs_apply(s.ops[i], ti));
        sol.sources.push_back(SourceSet::from(s.ops[i].sources));
    }
    return sol;
}

QfsOperator<double> circulant_stokes_outer(double radius, int N,
                                           const KernelSpec& spec, QfsConfig cfg)
{
    if (spec.pde != Pde::Stokes2D)
        throw std::invalid_argument("circulant fast path is a Stokes operation");
    if (N % 2 || N < 4)
        throw std::invalid_argument("circulant fast path needs even N >= 4");
    cfg.interior = true;
    AnalyticCurve circle = AnalyticCurve::circle(radius);

    QfsOperator<double> op;
    op.spec = spec;
    op.mixture = default_qfs_mixture(spec);
    op.cfg = cfg;
    op.cfg.variant = QfsVariant::D;
    op.curve = circle;
    op.N = N;
    op.bq = ptr_quadrature(circle, N);

    auto sc = choose_sources(circle, N, cfg);
    auto cc = choose_check_points(circle, N, sc.P, sc.delta, cfg);
    op.P = sc.P;
    op.delta = sc.delta;
    op.sources = sc.sources;
    op.Nc = cc.Nc;
    op.delta_c = cc.delta_c;
    op.rho = cc.rho;
    op.checks = cc.checks;
    if (sc.P > cc.Nc)
        throw std::runtime_error("circulant fast path expects no source downsampling");
    op.Psys = sc.P;

    // the reference check point sits at angle zero, where polar and
    // Cartesian components coincide
    Eigen::MatrixXd chk0 = cc.checks.points.topRows(1);
    if (std::abs(chk0(0, 1)) > 1e-10 * radius || chk0(0, 0) <= 0.)
        throw std::runtime_error("circulant fast path: unexpected check grid alignment");

    Eigen::MatrixXd Erow =
        potential_matrix<double>(op.mixture, chk0, SourceSet::from(sc.sources));
    int Ntil = std::max(even_ceil(cc.rho * N), N);
    auto bq_up = ptr_quadrature(circle, Ntil);
    Eigen::MatrixXd Crow = potential_matrix<double>(spec, chk0, SourceSet::from(bq_up));

    int H = N / 2;
    std::vector<Eigen::Matrix2cd> G(H + 1);
    for (int n = 0; n <= H; ++n) {
        Eigen::Matrix2cd En = mode_symbol(Erow, n), Cn = mode_symbol(Crow, n);
        if (n == 0)   // pressure-nullspace removal lives entirely in mode zero
            En(0, 0) += op.sources.weights.sum();
        G[n] = En.partialPivLu().solve(Cn);
    }

    // per-mode solve applied to the boundary analysis rows; the synthesis
    // grid keeps a Nyquist sine slot since the boundary's Nyquist cosine
    // responds with a sine component that the sources can represent
    Eigen::MatrixXd A = polar_analysis_matrix(N);
    Eigen::MatrixXd S = polar_synthesis_matrix(sc.P, H, true);
    Eigen::MatrixXd Z(2 + 4 * H, 2 * N);
    Z.middleRows(0, 2) = G[0].real() * A.middleRows(0, 2);
    for (int n = 1; n < H; ++n)
        Z.middleRows(mode_offset(n), 4) = realify(G[n]) * A.middleRows(mode_offset(n), 4);
    {
        Eigen::Matrix<double, 4, 2> BH;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                cdouble g = G[H](i, j);
                BH(2 * i, j) = g.real();
                BH(2 * i + 1, j) = -g.imag();
            }
        Z.middleRows(mode_offset(H), 4) = BH * A.middleRows(mode_offset(H), 2);
    }

    op.Y = S;
    op.Z = Z;
    op.svd_path = true;
    op.rank_deficient = false;
    op.nullspace_fix = true;
    op.pressure_ref = circle.centroid_coeff();
    // direct product-quadrature self matrix; only the preconditioner sees it
    op.nystrom = kress_nystrom_real(circle, N, spec, BoundaryLimit::Interior);
    return op;
}

BvpSolution solve_stokes_driven_flow(const BodyCollection& coll, QfsConfig cfg,
                                     double gmres_tol,
                                     const SummationBackend& backend,
                                     bool precondition, bool circulant_outer)
{
    if (!(coll.outer_radius > 0.) || coll.outer_nodes < 16)
        throw std::invalid_argument("driven flow needs an enclosing circle with nodes");
    if (int(coll.nodes.size()) != coll.size())
        throw std::invalid_argument("collection needs assigned node counts");
    KernelSpec outer_bie{Pde::Stokes2D, 0., 1.};
    KernelSpec inner_bie{Pde::Stokes2D, 1., 1.};
    cfg.half_speed_check = true;

    BodySetup<double> s;
    QfsConfig cfg_out = cfg;
    cfg_out.interior = true;
    if (circulant_outer)
        s.ops.push_back(circulant_stokes_outer(coll.outer_radius, coll.outer_nodes,
                                               outer_bie, cfg_out));
    else
        s.ops.push_back(apply_stokes_nullspace_fix(qfsd_precompute<double>(
            AnalyticCurve::circle(coll.outer_radius), coll.outer_nodes, outer_bie, cfg_out)));
    QfsConfig cfg_in = cfg;
    cfg_in.interior = false;
    for (int i = 0; i < coll.size(); ++i)
        s.ops.push_back(qfsd_precompute<double>(coll.curves[i], coll.nodes[i], inner_bie, cfg_in));

    // the outer self block carries the rank-1 completion n (w n)^T
    int N0 = s.ops[0].N;
    Eigen::VectorXd ncol(2 * N0), wnrow(2 * N0);
    for (int j = 0; j < N0; ++j) {
        ncol.segment<2>(2 * j) = s.ops[0].bq.normals.row(j).transpose();
        wnrow.segment<2>(2 * j) = s.ops[0].bq.weights[j] *
                                  s.ops[0].bq.normals.row(j).transpose();
    }
    s.ops[0].nystrom += ncol * wnrow.transpose();
    finalize_setup(s, 2, circulant_outer ? 0 : -1);
    if (circulant_outer)   // the completed self block stays block-circulant
        s.inv[0] = circulant_inverse_apply(s.ops[0].nystrom.topRows(2), N0);
    int nb = int(s.ops.size());

    Eigen::VectorXd f = Eigen::VectorXd::Zero(s.total);
    for (int j = 0; j < N0; ++j) f[2 * j] = 1.;   // driven wall velocity (1,0)

    auto matvec = [&](const Eigen::VectorXd& v) {
        std::vector<Eigen::VectorXd> sig(nb);
        Eigen::VectorXd tau0;
        for (int i = 0; i < nb; ++i) {
            Eigen::VectorXd ti = v.segment(s.offset[i], 2 * s.ops[i].N);
            if (precondition) ti = s.inv[i](ti);
            if (i == 0) tau0 = ti;
            sig[i] = qfs_apply(s.ops[i], ti);
        }
        Eigen::VectorXd u = backend.eval(s.ops[1 % nb].mixture, s.all_src,
                                         stack_strengths(s, sig, 2), s.all_nodes)
                                .real();
        // proxies realize -1/2 + D on the wall; add its rank-1 completion
        u.head(2 * N0) += ncol * wnrow.dot(tau0);
        return u;
    };
    auto r = gmres<double>(matvec, f, gmres_tol, s.total);
    if (!r.converged)
        std::fprintf(stderr, "warning: gmres did not reach tolerance, returning partial solution\n");

    BvpSolution sol;
    sol.spec = inner_bie;
    sol.mixture = s.ops[0].mixture;
    sol.iters = r.iters;
    sol.res_history = r.res_history;
    sol.converged = r.converged;
    for (int i = 0; i < nb; ++i) {
        Eigen::VectorXd ti = r.x.segment(s.offset[i], 2 * s.ops[i].N);
        if (precondition) ti = s.inv[i](ti);
        sol.tau.push_back(ti.cast<cdouble>());
        sol.sigma.push_back(qfs_apply(s.ops[i], ti).cast<cdouble>());
        sol.sources.push_back(SourceSet::from(s.ops[i].sources));
    }
    return sol;
}

Eigen::VectorXcd evaluate_field(const BvpSolution& sol,
                                const Eigen::MatrixXd& targets,
                                const SummationBackend& backend)
{
    int srcs = 0, dofs = 0;
    for (const auto& ss : sol.sources) srcs += ss.size();
    for (const auto& sg : sol.sigma) dofs += int(sg.size());
    SourceSet all;
    all.points.resize(srcs, 2);
    all.normals.resize(srcs, 2);
    Eigen::VectorXcd strength(dofs);
    int r = 0, d = 0;
    for (size_t i = 0; i < sol.sources.size(); ++i) {
        all.points.middleRows(r, sol.sources[i].size()) = sol.sources[i].points;
        all.normals.middleRows(r, sol.sources[i].size()) = sol.sources[i].normals;
        r += sol.sources[i].size();
        strength.segment(d, sol.sigma[i].size()) = sol.sigma[i];
        d += int(sol.sigma[i].size());
    }
    return backend.eval(sol.mixture, all, strength, targets);
}

Eigen::VectorXd evaluate_field_pressure(const BvpSolution& sol,
                                        const Eigen::MatrixXd& targets)
{
    if (sol.spec.pde != Pde::Stokes2D)
        throw std::invalid_argument("pressure evaluation is a Stokes operation");
    Eigen::VectorXd p = Eigen::VectorXd::Zero(targets.rows());
    for (size_t i = 0; i < sol.sources.size(); ++i)
        p += stokes_pressure_matrix(sol.mixture.mu, sol.mixture.alpha,
                                    sol.mixture.beta, targets, sol.sources[i]) *
             sol.sigma[i].real();
    return p;
}

} // namespace qfs
