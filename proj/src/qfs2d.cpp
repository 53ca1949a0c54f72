#include "qfs/qfs2d.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace qfs {

namespace {

constexpr double pi = std::numbers::pi;

int even_ceil(double x)
{
    int n = int(std::ceil(x));
    return n % 2 ? n + 1 : n;
}

// kron(L, I_b) so per-node matrices act on interleaved vector components
Eigen::MatrixXd block_expand(const Eigen::MatrixXd& L, int b)
{
    if (b == 1) return L;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(L.rows() * b, L.cols() * b);
    for (Eigen::Index i = 0; i < L.rows(); ++i)
        for (Eigen::Index j = 0; j < L.cols(); ++j)
            for (int c = 0; c < b; ++c) out(b * i + c, b * j + c) = L(i, j);
    return out;
}

CurveSide source_side(const QfsConfig& cfg)
{
    return cfg.interior ? CurveSide::Exterior : CurveSide::Interior;
}
CurveSide check_side(const QfsConfig& cfg)
{
    return cfg.interior ? CurveSide::Interior : CurveSide::Exterior;
}

} // namespace

void QfsConfig::validate() const
{
    if (!(eps > 1e-14 && eps < 1e-2))
        throw std::invalid_argument("tolerance must lie in (1e-14, 1e-2)");
    if (upsilon < 1. || upsilon_c < 1.)
        throw std::invalid_argument("upsampling parameters must be >= 1");
    if (!(eps > eps_mach))
        throw std::invalid_argument("tolerance must exceed the machine-epsilon constant");
}

QfsConfig QfsConfig::defaults_for(Pde pde)
{
    QfsConfig cfg;
    if (pde == Pde::Stokes2D) {
        cfg.upsilon = 1.3;
        cfg.upsilon_c = 1.5;
    }
    return cfg;
}

KernelSpec default_qfs_mixture(const KernelSpec& user)
{
    KernelSpec mix = user;
    switch (user.pde) {
        case Pde::Helmholtz2D:
            mix.alpha = cdouble(0., -user.k);
            mix.beta = 1.;
            break;
        case Pde::Stokes2D:
            mix.alpha = 1.;
            mix.beta = 1.;
            break;
        default:   // Laplace 2D/3D: plain charge sources
            mix.alpha = 1.;
            mix.beta = 0.;
            break;
    }
    return mix;
}

SourceChoice choose_sources(const AnalyticCurve& curve, int N, const QfsConfig& cfg)
{
    cfg.validate();
    if (N < 8 || N % 2) throw std::invalid_argument("N must be even and >= 8");
    CurveSide side = source_side(cfg);
    OffsetOptions opt{.full_square = false, .check_speed = cfg.half_speed_check};
    double L = std::log(1. / cfg.eps);
    SourceChoice out;
    out.delta = L / N;
    double P0 = N;
    int M = std::max(N, 256);
    if (!shifted_curve_samples(curve, out.delta, M, side, opt).valid) {
        double d0 = estimate_max_shift(curve, side, M, opt);
        if (d0 <= 0.)
            throw std::runtime_error("no valid source curve exists at any separation");
        out.delta = d0;
        P0 = std::ceil(L / d0);
        out.fallback = true;
    }
    out.P = even_ceil(cfg.upsilon * P0);
    out.sources = shifted_curve_samples(curve, out.delta, out.P, side, opt);
    return out;
}

CheckChoice choose_check_points(const AnalyticCurve& curve, int N, int /*P*/,
                                double delta, const QfsConfig& cfg)
{
    cfg.validate();
    CurveSide side = check_side(cfg);
    OffsetOptions opt{.full_square = false, .check_speed = cfg.half_speed_check};
    CheckChoice out;
    out.delta_c = (std::log(cfg.eps_mach) / std::log(cfg.eps) - 1.) * delta;
    int M = std::max(N, 256);
    if (!shifted_curve_samples(curve, out.delta_c, M, side, opt).valid) {
        double dc0 = estimate_max_shift(curve, side, M, opt);
        if (dc0 <= 0.)
            throw std::runtime_error("no valid check curve exists at any separation");
        if (dc0 < out.delta_c) {
            out.delta_c = dc0;
            out.capped = true;
        }
    }
    // ratio condition: the check curve must stay within the region the
    // sources represent to full precision
    if (delta / (delta + out.delta_c) <
        std::log(cfg.eps) / std::log(cfg.eps_mach) - 1e-12)
        throw std::runtime_error("check separation violates the ratio condition");
    out.Nc = even_ceil(cfg.upsilon_c * N);
    out.rho = std::max(std::log(1. / cfg.eps_mach) / (out.delta_c * N), 1.);
    out.checks = shifted_curve_samples(curve, out.delta_c, out.Nc, side, opt);
    return out;
}

namespace {

// factorize the (possibly augmented) matching system and synthesize the
// self matrix, honoring the printed multiplication orders
template <class Scalar>
void factor_and_synthesize(QfsOperator<Scalar>& op)
{
    using Matrix = typename QfsOperator<Scalar>::Matrix;
    Matrix M = op.match;
    Matrix R = op.rhs_map;
    if (op.charge_fix) {
        M.conservativeResize(M.rows() + 1, Eigen::NoChange);
        M.row(M.rows() - 1).setOnes();
        R.conservativeResize(R.rows() + 1, Eigen::NoChange);
        R.row(R.rows() - 1) = op.charge_row.transpose().template cast<Scalar>();
    }
    bool rank_fixed = op.charge_fix || op.nullspace_fix;
    bool square = M.rows() == M.cols();
    switch (op.cfg.factorization) {
        case Factorization::Lu:
            if (!square)
                throw std::invalid_argument("lu factorization requires a square matching system");
            op.svd_path = false;
            break;
        case Factorization::Svd:
            op.svd_path = true;
            break;
        default:
            op.svd_path = !square || rank_fixed;
    }
    if (op.svd_path) {
        op.solve = svd_factor<Scalar>(M);
        const auto& sg = op.solve.sigma;
        // exactly zero singular values are truncated (pseudoinverse) so the
        // operator can still be built and inspected; qfs_apply refuses to
        // use it unless a rank fix restored invertibility
        op.rank_deficient = false;
        op.Y = op.solve.V;
        for (Eigen::Index i = 0; i < sg.size(); ++i) {
            if (sg[i] == 0.) {
                op.Y.col(i).setZero();
                op.rank_deficient = true;
            } else {
                op.Y.col(i) /= Scalar(sg[i]);
            }
        }
        op.Z = op.solve.U.adjoint() * R;
        op.nystrom = (op.B * op.Y) * op.Z;
    } else {
        op.solve = lu_factor<Scalar>(M);
        op.rank_deficient = false;
        op.Y.resize(0, 0);
        op.Z.resize(0, 0);
        const auto& lu = op.solve.lu;
        Matrix W = lu.permutationP() * R;
        lu.matrixLU().template triangularView<Eigen::UnitLower>().solveInPlace(W);
        Matrix BUinv = lu.matrixLU()
                           .template triangularView<Eigen::Upper>()
                           .transpose()
                           .solve(Matrix(op.B.transpose()))
                           .transpose();
        op.nystrom = BUinv * W;
    }
}

template <class Scalar>
void setup_sources(QfsOperator<Scalar>& op, const AnalyticCurve& curve,
                   const SourceChoice& sc, int nrows_nodes)
{
    // nrows_nodes: node count behind the matching rows (Nc or N); a fat
    // system is downsampled to that many sources and sigma upsampled back
    op.P = sc.P;
    op.delta = sc.delta;
    op.sources = sc.sources;
    if (sc.P > nrows_nodes) {
        op.Psys = nrows_nodes;
        op.sigma_upsample = upsampling_matrix(sc.P, nrows_nodes);
    } else {
        op.Psys = sc.P;
        op.sigma_upsample.resize(0, 0);
    }
}

template <class Scalar>
OffsetCurveSamples system_sources(const QfsOperator<Scalar>& op)
{
    if (op.Psys == op.P) return op.sources;
    return shifted_curve_samples(op.curve, op.delta, op.Psys, source_side(op.cfg),
                                 OffsetOptions{.full_square = false, .check_speed = op.cfg.half_speed_check});
}

} // namespace

template <class Scalar>
QfsOperator<Scalar> qfsd_precompute(const AnalyticCurve& curve, int N,
                                    const KernelSpec& spec, const QfsConfig& cfg,
                                    std::optional<KernelSpec> qfs_mixture)
{
    spec.validate();
    QfsOperator<Scalar> op;
    op.spec = spec;
    op.mixture = qfs_mixture ? *qfs_mixture : default_qfs_mixture(spec);
    op.cfg = cfg;
    op.cfg.variant = QfsVariant::D;
    op.curve = curve;
    op.N = N;
    op.bq = ptr_quadrature(curve, N);
    int b = spec.block();

    auto sc = choose_sources(curve, N, cfg);
    auto cc = choose_check_points(curve, N, sc.P, sc.delta, cfg);
    op.Nc = cc.Nc;
    op.delta_c = cc.delta_c;
    op.rho = cc.rho;
    op.checks = cc.checks;
    setup_sources(op, curve, sc, cc.Nc);
    auto sys_src = system_sources(op);

    // check <- boundary through the upsampled plain rule
    int Ntil = std::max(even_ceil(cc.rho * N), N);
    auto bq_up = ptr_quadrature(curve, Ntil);
    auto Ctil = potential_matrix<Scalar>(spec, cc.checks.points, SourceSet::from(bq_up));
    op.rhs_map = Ctil * block_expand(upsampling_matrix(Ntil, N), b).template cast<Scalar>();

    op.match = potential_matrix<Scalar>(op.mixture, cc.checks.points,
                                        SourceSet::from(sys_src));
    op.B = potential_matrix<Scalar>(op.mixture, op.bq.nodes, SourceSet::from(sys_src));
    factor_and_synthesize(op);
    return op;
}

template <class Scalar>
QfsOperator<Scalar> qfsb_precompute(const AnalyticCurve& curve, int N,
                                    const KernelSpec& spec,
                                    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& A,
                                    const QfsConfig& cfg,
                                    std::optional<KernelSpec> qfs_mixture)
{
    spec.validate();
    int b = spec.block();
    if (A.rows() != N * b || A.cols() != N * b)
        throw std::invalid_argument("self matrix dimensions do not match N");
    QfsOperator<Scalar> op;
    op.spec = spec;
    op.mixture = qfs_mixture ? *qfs_mixture : default_qfs_mixture(spec);
    op.cfg = cfg;
    op.cfg.variant = QfsVariant::B;
    op.curve = curve;
    op.N = N;
    op.bq = ptr_quadrature(curve, N);

    auto sc = choose_sources(curve, N, cfg);
    setup_sources(op, curve, sc, N);
    auto sys_src = system_sources(op);

    op.match = potential_matrix<Scalar>(op.mixture, op.bq.nodes, SourceSet::from(sys_src));
    op.B = op.match;
    op.rhs_map = A;
    op.nystrom = A;
    factor_and_synthesize(op);
    op.nystrom = A;   // the user's matrix stays authoritative for variant B
    return op;
}

template <class Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic>
qfs_apply(const QfsOperator<Scalar>& op, const Eigen::Vector<Scalar, Eigen::Dynamic>& tau)
{
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    int b = op.spec.block();
    if (tau.size() != op.N * b)
        throw std::invalid_argument("density length " + std::to_string(tau.size()) +
                                    " does not match " + std::to_string(op.N * b));
    if (op.rank_deficient && !op.charge_fix && !op.nullspace_fix)
        throw std::runtime_error(
            "zero singular value in the matching system; apply "
            "apply_laplace_charge_fix or apply_stokes_nullspace_fix");
    Vector sig;
    if (op.svd_path) {
        sig = op.Y * (op.Z * tau).eval();
    } else {
        sig = op.solve.apply_solve((op.rhs_map * tau).eval());
    }
    if (op.sigma_upsample.size())
        sig = (block_expand(op.sigma_upsample, b).template cast<Scalar>() * sig).eval();

    if constexpr (std::is_same_v<Scalar, double>) {
        if (op.nullspace_fix && op.spec.pde == Pde::Stokes2D) {
            // pin the pressure constant: compare the plain-rule pressure at
            // the reference point with the proxy pressure and push the gap
            // onto the pressure-only direction n_source
            Eigen::MatrixXd ref = op.pressure_ref.transpose();
            // weighted normals: the discrete zero-velocity direction
            Eigen::VectorXd dir(2 * op.P);
            for (int j = 0; j < op.P; ++j)
                dir.segment<2>(2 * j) = op.sources.weights[j] *
                                        op.sources.normals.row(j).transpose();
            double p_plain = (stokes_pressure_matrix(op.spec.mu, op.spec.alpha, op.spec.beta,
                                                     ref, SourceSet::from(op.bq)) * tau)(0);
            auto psrc = stokes_pressure_matrix(op.spec.mu, op.mixture.alpha, op.mixture.beta,
                                               ref, SourceSet::from(op.sources));
            double p_qfs = (psrc * sig)(0);
            double p_dir = (psrc * dir)(0);
            sig += (p_plain - p_qfs) / p_dir * dir;
        }
    }
    return sig;
}

template <class Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic>
evaluate_potential(const QfsOperator<Scalar>& op,
                   const Eigen::Vector<Scalar, Eigen::Dynamic>& sigma,
                   const Eigen::MatrixXd& targets)
{
    if (sigma.size() != op.P * op.spec.block())
        throw std::invalid_argument("strength vector length does not match P");
    return potential_matrix<Scalar>(op.mixture, targets, SourceSet::from(op.sources)) * sigma;
}

Eigen::VectorXd evaluate_pressure(const QfsOperator<double>& op,
                                  const Eigen::VectorXd& sigma,
                                  const Eigen::MatrixXd& targets)
{
    if (op.spec.pde != Pde::Stokes2D)
        throw std::invalid_argument("pressure evaluation is a Stokes operation");
    return stokes_pressure_matrix(op.spec.mu, op.mixture.alpha, op.mixture.beta,
                                  targets, SourceSet::from(op.sources)) * sigma;
}

template <class Scalar>
QfsOperator<Scalar> apply_laplace_charge_fix(QfsOperator<Scalar> op)
{
    if (op.spec.pde != Pde::Laplace2D)
        throw std::invalid_argument("charge fix applies to the 2D Laplace kernel only");
    if (op.cfg.factorization == Factorization::Lu)
        throw std::invalid_argument("charge fix needs the svd path: the augmented system is rectangular");
    op.charge_fix = true;
    double alpha = op.spec.alpha.real();
    op.charge_row = alpha * op.bq.weights;
    factor_and_synthesize(op);
    if (op.cfg.variant == QfsVariant::B) op.nystrom = op.rhs_map;
    return op;
}

QfsOperator<double> apply_stokes_nullspace_fix(QfsOperator<double> op)
{
    if (op.spec.pde != Pde::Stokes2D)
        throw std::invalid_argument("nullspace fix applies to the Stokes kernel only");
    if (!op.cfg.interior) {
        std::fprintf(stderr, "warning: Stokes nullspace fix skipped for an exterior operator\n");
        return op;
    }
    auto sys_src = system_sources(op);
    int nrows_nodes = int(op.match.rows()) / 2;
    Eigen::VectorXd ncheck(2 * nrows_nodes), wn(2 * op.Psys);
    const auto& rows_normals = (op.cfg.variant == QfsVariant::D) ? op.checks.normals
                                                                 : op.bq.normals;
    for (int i = 0; i < nrows_nodes; ++i)
        ncheck.segment<2>(2 * i) = rows_normals.row(i).transpose();
    for (int j = 0; j < op.Psys; ++j)
        wn.segment<2>(2 * j) = sys_src.weights[j] * sys_src.normals.row(j).transpose();
    op.match += ncheck * wn.transpose();
    op.nullspace_fix = true;
    op.pressure_ref = op.curve.centroid_coeff();
    factor_and_synthesize(op);
    return op;
}

// ---------------------------------------------------------------------------
// binary operator cache

namespace {

constexpr char magic[8] = {'Q', 'F', 'S', '2', 'D', 'O', 'P', '1'};

template <class T>
void put(std::ostream& out, const T& v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& in)
{
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("truncated operator file");
    return v;
}

template <class Derived>
void put_matrix(std::ostream& out, const Eigen::MatrixBase<Derived>& m)
{
    put<int64_t>(out, m.rows());
    put<int64_t>(out, m.cols());
    using Sc = typename Derived::Scalar;
    Eigen::Matrix<Sc, Eigen::Dynamic, Eigen::Dynamic> d = m;
    out.write(reinterpret_cast<const char*>(d.data()), sizeof(Sc) * d.size());
}

template <class Sc>
Eigen::Matrix<Sc, Eigen::Dynamic, Eigen::Dynamic> get_matrix(std::istream& in)
{
    int64_t r = get<int64_t>(in), c = get<int64_t>(in);
    if (r < 0 || c < 0 || r * c > (int64_t(1) << 32))
        throw std::runtime_error("corrupt operator file");
    Eigen::Matrix<Sc, Eigen::Dynamic, Eigen::Dynamic> m(r, c);
    in.read(reinterpret_cast<char*>(m.data()), sizeof(Sc) * m.size());
    if (!in) throw std::runtime_error("truncated operator file");
    return m;
}

void put_spec(std::ostream& out, const KernelSpec& s)
{
    put<int32_t>(out, int(s.pde));
    put(out, s.alpha);
    put(out, s.beta);
    put(out, s.k);
    put(out, s.mu);
}
KernelSpec get_spec(std::istream& in)
{
    KernelSpec s;
    s.pde = Pde(get<int32_t>(in));
    s.alpha = get<cdouble>(in);
    s.beta = get<cdouble>(in);
    s.k = get<double>(in);
    s.mu = get<double>(in);
    return s;
}

} // namespace

template <class Scalar>
void save_operator(const QfsOperator<Scalar>& op, std::ostream& out)
{
    out.write(magic, 8);
    put<int32_t>(out, std::is_same_v<Scalar, cdouble> ? 1 : 0);
    put_spec(out, op.spec);
    put_spec(out, op.mixture);
    const QfsConfig& c = op.cfg;
    put(out, c.eps); put(out, c.upsilon); put(out, c.upsilon_c); put(out, c.eps_mach);
    put<int32_t>(out, c.interior); put<int32_t>(out, c.half_speed_check);
    put<int32_t>(out, int(c.variant));
    put<int32_t>(out, int(c.factorization));
    put_matrix(out, op.curve.coeffs());
    put<int32_t>(out, op.curve.nmin());
    put<int32_t>(out, op.N); put<int32_t>(out, op.P); put<int32_t>(out, op.Nc);
    put<int32_t>(out, op.Psys);
    put(out, op.delta); put(out, op.delta_c); put(out, op.rho);
    put<int32_t>(out, op.charge_fix);
    put<int32_t>(out, op.nullspace_fix);
    put_matrix(out, op.charge_row);
    put_matrix(out, op.pressure_ref);
    put_matrix(out, op.match);
    put_matrix(out, op.rhs_map);
    put_matrix(out, op.B);
}

template <class Scalar>
QfsOperator<Scalar> load_operator(std::istream& in)
{
    char m[8];
    in.read(m, 8);
    if (!in || std::memcmp(m, magic, 8) != 0)
        throw std::runtime_error("not an operator cache file (bad header)");
    if (get<int32_t>(in) != (std::is_same_v<Scalar, cdouble> ? 1 : 0))
        throw std::runtime_error("operator cache holds the other scalar type");
    QfsOperator<Scalar> op;
    op.spec = get_spec(in);
    op.mixture = get_spec(in);
    QfsConfig& c = op.cfg;
    c.eps = get<double>(in); c.upsilon = get<double>(in);
    c.upsilon_c = get<double>(in); c.eps_mach = get<double>(in);
    c.interior = get<int32_t>(in); c.half_speed_check = get<int32_t>(in);
    c.variant = QfsVariant(get<int32_t>(in));
    c.factorization = Factorization(get<int32_t>(in));
    Eigen::VectorXcd coeffs = get_matrix<cdouble>(in);
    int nmin = get<int32_t>(in);
    op.curve = AnalyticCurve(coeffs, nmin, "");
    op.N = get<int32_t>(in); op.P = get<int32_t>(in); op.Nc = get<int32_t>(in);
    op.Psys = get<int32_t>(in);
    op.delta = get<double>(in); op.delta_c = get<double>(in); op.rho = get<double>(in);
    op.charge_fix = get<int32_t>(in);
    op.nullspace_fix = get<int32_t>(in);
    op.charge_row = get_matrix<double>(in);
    op.pressure_ref = get_matrix<double>(in);
    op.match = get_matrix<Scalar>(in);
    op.rhs_map = get_matrix<Scalar>(in);
    op.B = get_matrix<Scalar>(in);

    op.bq = ptr_quadrature(op.curve, op.N);
    OffsetOptions opt{.full_square = false, .check_speed = c.half_speed_check};
    op.sources = shifted_curve_samples(op.curve, op.delta, op.P, source_side(c), opt);
    if (c.variant == QfsVariant::D)
        op.checks = shifted_curve_samples(op.curve, op.delta_c, op.Nc, check_side(c), opt);
    if (op.P > op.Psys) op.sigma_upsample = upsampling_matrix(op.P, op.Psys);
    factor_and_synthesize(op);
    if (c.variant == QfsVariant::B) op.nystrom = op.rhs_map;
    return op;
}

#define QFS_INSTANTIATE(S) \
    template QfsOperator<S> qfsd_precompute<S>(const AnalyticCurve&, int, const KernelSpec&, \
                                               const QfsConfig&, std::optional<KernelSpec>); \
    template QfsOperator<S> qfsb_precompute<S>(const AnalyticCurve&, int, const KernelSpec&, \
                                               const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>&, \
                                               const QfsConfig&, std::optional<KernelSpec>); \
    template Eigen::Vector<S, Eigen::Dynamic> qfs_apply<S>(const QfsOperator<S>&, \
                                                           const Eigen::Vector<S, Eigen::Dynamic>&); \
    template Eigen::Vector<S, Eigen::Dynamic> evaluate_potential<S>( \
        const QfsOperator<S>&, const Eigen::Vector<S, Eigen::Dynamic>&, const Eigen::MatrixXd&); \
    template QfsOperator<S> apply_laplace_charge_fix<S>(QfsOperator<S>); \
    template void save_operator<S>(const QfsOperator<S>&, std::ostream&); \
    template QfsOperator<S> load_operator<S>(std::istream&);

QFS_INSTANTIATE(double)
QFS_INSTANTIATE(cdouble)

} // namespace qfs
