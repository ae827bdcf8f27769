#define EIGEN_DONT_PARALLELIZE
#include "cgolab/quantize.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace cgolab {

namespace {

// Accumulates one separable term into out: out += alpha .* w, where w is a
// field already multiplied by beta in frequency and inverse-transformed.
void accumulate_term(Field& out, const std::vector<cplx>& alpha, bool on_volume,
                     const Field& w) {
    const std::size_t t = out.grid.tangential_volume();
    const std::size_t nn = static_cast<std::size_t>(out.grid.normal_pts());
    if (on_volume) {
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
        for (long long i = 0; i < static_cast<long long>(out.size()); ++i)
            out.data[i] += alpha[static_cast<std::size_t>(i)] * w.data[static_cast<std::size_t>(i)];
    } else {
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
        for (long long j = 0; j < static_cast<long long>(t); ++j) {
            const cplx a = alpha[static_cast<std::size_t>(j)];
            const cplx* src = w.data.data() + static_cast<std::size_t>(j) * nn;
            cplx* dst = out.data.data() + static_cast<std::size_t>(j) * nn;
            for (std::size_t k = 0; k < nn; ++k) dst[k] += a * src[k];
        }
    }
}

struct Expansion {
    std::vector<std::vector<cplx>> alpha, beta;
    SeparableReport report;
};

// Streamed randomized range finder for the nx-by-nxi symbol matrix.
Expansion randomized_expand(std::size_t nx, std::size_t nxi,
                            const std::function<cplx(std::size_t, std::size_t)>& eval,
                            int rank_cap, double tol, std::uint64_t seed) {
    using Mat = Eigen::MatrixXcd;
    const int oversample = 8;
    int k = std::min<int>(rank_cap + oversample,
                          static_cast<int>(std::min(nx, nxi)));
    Mat omega(static_cast<Eigen::Index>(nxi), k);
    SplitMix64 rng(seed);
    for (Eigen::Index j = 0; j < omega.cols(); ++j)
        for (Eigen::Index i = 0; i < omega.rows(); ++i) omega(i, j) = rng.cgaussian();

    // Keep the streamed block under ~64 MB regardless of the x-lattice size.
    const std::size_t block =
        std::max<std::size_t>(32, std::min<std::size_t>(512, (64u << 20) / (16 * nx)));
    Mat Y = Mat::Zero(static_cast<Eigen::Index>(nx), k);
    Mat Mblk(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(block));
    for (std::size_t lo = 0; lo < nxi; lo += block) {
        const std::size_t hi = std::min(nxi, lo + block);
        const Eigen::Index w = static_cast<Eigen::Index>(hi - lo);
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
        for (long long c = 0; c < static_cast<long long>(w); ++c)
            for (std::size_t r = 0; r < nx; ++r)
                Mblk(static_cast<Eigen::Index>(r), c) =
                    eval(r, lo + static_cast<std::size_t>(c));
        Y.noalias() += Mblk.leftCols(w) * omega.middleRows(static_cast<Eigen::Index>(lo), w);
    }

    Eigen::HouseholderQR<Mat> qr(Y);
    Mat Q = qr.householderQ() * Mat::Identity(static_cast<Eigen::Index>(nx), k);

    Mat B = Mat::Zero(k, static_cast<Eigen::Index>(nxi));
    for (std::size_t lo = 0; lo < nxi; lo += block) {
        const std::size_t hi = std::min(nxi, lo + block);
        const Eigen::Index w = static_cast<Eigen::Index>(hi - lo);
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
        for (long long c = 0; c < static_cast<long long>(w); ++c)
            for (std::size_t r = 0; r < nx; ++r)
                Mblk(static_cast<Eigen::Index>(r), c) =
                    eval(r, lo + static_cast<std::size_t>(c));
        B.middleCols(static_cast<Eigen::Index>(lo), w).noalias() =
            Q.adjoint() * Mblk.leftCols(w);
    }

    Eigen::BDCSVD<Mat> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& S = svd.singularValues();
    const double s0 = S.size() > 0 ? S(0) : 0.0;
    int r = 0;
    while (r < S.size() && r < rank_cap && (s0 == 0.0 ? false : S(r) / s0 > tol)) ++r;
    if (r == 0 && s0 > 0.0) r = 1;

    Expansion ex;
    ex.report.rank = r;
    ex.report.sigma0 = s0;
    ex.report.sv_tail = (r < S.size() && s0 > 0.0) ? S(r) / s0 : 0.0;
    Mat QU = Q * svd.matrixU();
    for (int i = 0; i < r; ++i) {
        std::vector<cplx> a(nx), b(nxi);
        for (std::size_t x = 0; x < nx; ++x)
            a[x] = QU(static_cast<Eigen::Index>(x), i) * S(i);
        for (std::size_t q = 0; q < nxi; ++q)
            b[q] = std::conj(svd.matrixV()(static_cast<Eigen::Index>(q), i));
        ex.alpha.push_back(std::move(a));
        ex.beta.push_back(std::move(b));
    }
    return ex;
}

} // namespace

void TangentialOp::apply(Field& u) const {
    if (is_multiplier) {
        apply_tangential_multiplier(u, mult);
        return;
    }
    Field uhat = u;
    fft_forward(uhat, Axes::Tangential);
    Field out(u.grid);
    Field w(u.grid);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        w = uhat;
        broadcast_mul(w, beta[i]);
        fft_inverse(w, Axes::Tangential);
        accumulate_term(out, alpha[i], alpha_on_volume, w);
    }
    u = std::move(out);
}

void TangentialOp::apply(BoundaryField& u) const {
    if (is_multiplier) {
        apply_tangential_multiplier(u, mult);
        return;
    }
    if (alpha_on_volume) fail("TangentialOp: volume-dependent symbol applied to boundary data");
    BoundaryField uhat = u;
    fft_forward(uhat);
    BoundaryField out(u.grid);
    BoundaryField w(u.grid);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        w = uhat;
        for (std::size_t j = 0; j < w.size(); ++j) w.data[j] *= beta[i][j];
        fft_inverse(w);
        for (std::size_t j = 0; j < w.size(); ++j) out.data[j] += alpha[i][j] * w.data[j];
    }
    u = std::move(out);
}

Field TangentialOp::apply_to_boundary(const BoundaryField& f) const {
    if (is_multiplier || !alpha_on_volume)
        fail("TangentialOp: boundary-to-volume apply needs a volume-dependent expansion");
    BoundaryField fhat = f;
    fft_forward(fhat);
    Field out(grid);
    BoundaryField w(grid);
    const std::size_t t = grid.tangential_volume();
    const std::size_t nn = static_cast<std::size_t>(grid.normal_pts());
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        w = fhat;
        for (std::size_t j = 0; j < t; ++j) w.data[j] *= beta[i][j];
        fft_inverse(w);
        const std::vector<cplx>& a = alpha[i];
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
        for (long long j = 0; j < static_cast<long long>(t); ++j) {
            const cplx fv = w.data[static_cast<std::size_t>(j)];
            const cplx* av = a.data() + static_cast<std::size_t>(j) * nn;
            cplx* dst = out.data.data() + static_cast<std::size_t>(j) * nn;
            for (std::size_t k = 0; k < nn; ++k) dst[k] += av[k] * fv;
        }
    }
    return out;
}

void FullOp::apply(Field& u) const {
    if (is_multiplier) {
        apply_full_multiplier(u, mult);
        return;
    }
    Field uhat = u;
    fft_forward(uhat, Axes::All);
    Field out(u.grid);
    Field w(u.grid);
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        w = uhat;
        pointwise_mul(w, beta[i]);
        fft_inverse(w, Axes::All);
        accumulate_term(out, alpha[i], /*on_volume=*/false, w);
    }
    u = std::move(out);
}

TangentialOp tangential_multiplier_op(const GridSpec& g, double h,
                                      const std::function<cplx(const double*)>& sym) {
    TangentialOp op;
    op.grid = g;
    op.h = h;
    op.is_multiplier = true;
    op.mult = make_tangential_multiplier(g, [&](const double* xi) {
        double hxi[kMaxDim] = {0, 0, 0, 0};
        for (int a = 0; a < g.dim; ++a) hxi[a] = h * xi[a];
        hxi[g.dim - 1] = 0.0;
        return sym(hxi);
    });
    return op;
}

FullOp full_multiplier_op(const GridSpec& g, double h,
                          const std::function<cplx(const double*)>& sym) {
    FullOp op;
    op.grid = g;
    op.h = h;
    op.is_multiplier = true;
    op.mult = make_full_multiplier(g, [&](const double* xi) {
        double hxi[kMaxDim] = {0, 0, 0, 0};
        for (int a = 0; a < g.dim; ++a) hxi[a] = h * xi[a];
        return sym(hxi);
    });
    return op;
}

TangentialOp expand_tangential(const GridSpec& g, double h,
                               const std::function<cplx(std::size_t, std::size_t)>& eval,
                               int rank_cap, double tol, std::uint64_t seed,
                               bool alpha_on_volume) {
    TangentialOp op;
    op.grid = g;
    op.h = h;
    op.is_multiplier = false;
    op.alpha_on_volume = alpha_on_volume;
    const std::size_t nx = alpha_on_volume ? g.volume() : g.tangential_volume();
    Expansion ex = randomized_expand(nx, g.tangential_volume(), eval, rank_cap, tol, seed);
    op.alpha = std::move(ex.alpha);
    op.beta = std::move(ex.beta);
    op.report = ex.report;
    return op;
}

FullOp expand_full(const GridSpec& g, double h,
                   const std::function<cplx(std::size_t, std::size_t)>& eval,
                   int rank_cap, double tol, std::uint64_t seed) {
    FullOp op;
    op.grid = g;
    op.h = h;
    op.is_multiplier = false;
    Expansion ex = randomized_expand(g.tangential_volume(), g.volume(), eval, rank_cap, tol, seed);
    op.alpha = std::move(ex.alpha);
    op.beta = std::move(ex.beta);
    op.report = ex.report;
    return op;
}

std::uint64_t symbol_seed(const std::string& tag) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : tag) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

} // namespace cgolab
