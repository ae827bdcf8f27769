#include "cgolab/grid.hpp"

#include <algorithm>

namespace cgolab {

namespace {
ParallelMode g_mode = ParallelMode::Auto;
}

ParallelMode parallel_mode() { return g_mode; }
void set_parallel_mode(ParallelMode m) { g_mode = m; }

void init_parallel_mode_from_env() {
    const char* v = std::getenv("CGOLAB_SERIAL");
    if (v != nullptr && v[0] == '1') g_mode = ParallelMode::Serial;
}

double reduce_sum(const std::vector<double>& partials) {
    double acc = 0.0;
    for (double p : partials) acc += p;
    return acc;
}

GridSpec GridSpec::cube(int dim, int n, double box_len) {
    GridSpec g;
    g.dim = dim;
    for (int a = 0; a < dim; ++a) {
        g.npts[a] = n;
        g.len[a] = box_len;
    }
    g.validate();
    return g;
}

void GridSpec::validate() const {
    if (dim < 2 || dim > kMaxDim) fail("GridSpec: dimension must be 2..4");
    for (int a = 0; a < dim; ++a) {
        int n = npts[a];
        if (n < 8 || n % 2 != 0)
            fail("GridSpec: axis " + std::to_string(a) +
                 " needs an even point count >= 8, got " + std::to_string(n));
        int m = n;
        for (int p : {2, 3, 5, 7})
            while (m % p == 0) m /= p;
        if (m != 1)
            fail("GridSpec: axis " + std::to_string(a) + " point count " +
                 std::to_string(n) + " has a prime factor outside {2,3,5,7}");
        if (!(len[a] > 0.0)) fail("GridSpec: axis lengths must be positive");
    }
}

void fill_random(Field& f, std::uint64_t seed) {
    SplitMix64 rng(seed);
    for (auto& z : f.data) z = rng.cgaussian();
}

void fill_random(BoundaryField& f, std::uint64_t seed) {
    SplitMix64 rng(seed);
    for (auto& z : f.data) z = rng.cgaussian();
}

void scale(Field& f, cplx s) {
    const std::size_t n = f.size();
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long i = 0; i < static_cast<long long>(n); ++i) f.data[i] *= s;
}

void scale(BoundaryField& f, cplx s) {
    for (std::size_t i = 0; i < f.size(); ++i) f.data[i] *= s;
}

void axpy(Field& y, cplx a, const Field& x) {
    if (y.size() != x.size()) fail("axpy: size mismatch");
    const std::size_t n = y.size();
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long i = 0; i < static_cast<long long>(n); ++i) y.data[i] += a * x.data[i];
}

void axpy(BoundaryField& y, cplx a, const BoundaryField& x) {
    if (y.size() != x.size()) fail("axpy: size mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += a * x.data[i];
}

void pointwise_mul(Field& f, const std::vector<cplx>& w) {
    if (f.size() != w.size()) fail("pointwise_mul: size mismatch");
    const std::size_t n = f.size();
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long i = 0; i < static_cast<long long>(n); ++i) f.data[i] *= w[i];
}

void pointwise_mul_real(Field& f, const std::vector<double>& w) {
    if (f.size() != w.size()) fail("pointwise_mul_real: size mismatch");
    const std::size_t n = f.size();
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long i = 0; i < static_cast<long long>(n); ++i) f.data[i] *= w[i];
}

void broadcast_mul(Field& f, const std::vector<cplx>& tang) {
    const std::size_t t = f.grid.tangential_volume();
    const std::size_t nn = static_cast<std::size_t>(f.grid.normal_pts());
    if (tang.size() != t) fail("broadcast_mul: tangential size mismatch");
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long j = 0; j < static_cast<long long>(t); ++j) {
        cplx* col = f.data.data() + static_cast<std::size_t>(j) * nn;
        const cplx w = tang[static_cast<std::size_t>(j)];
        for (std::size_t k = 0; k < nn; ++k) col[k] *= w;
    }
}

void broadcast_mul_real(Field& f, const std::vector<double>& tang) {
    const std::size_t t = f.grid.tangential_volume();
    const std::size_t nn = static_cast<std::size_t>(f.grid.normal_pts());
    if (tang.size() != t) fail("broadcast_mul_real: tangential size mismatch");
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long j = 0; j < static_cast<long long>(t); ++j) {
        cplx* col = f.data.data() + static_cast<std::size_t>(j) * nn;
        const double w = tang[static_cast<std::size_t>(j)];
        for (std::size_t k = 0; k < nn; ++k) col[k] *= w;
    }
}

cplx dot(const Field& a, const Field& b) {
    if (a.size() != b.size()) fail("dot: size mismatch");
    return chunked_csum(a.size(),
                        [&](std::size_t i) { return std::conj(a.data[i]) * b.data[i]; });
}

cplx dot(const BoundaryField& a, const BoundaryField& b) {
    if (a.size() != b.size()) fail("dot: size mismatch");
    return chunked_csum(a.size(),
                        [&](std::size_t i) { return std::conj(a.data[i]) * b.data[i]; });
}

double norm2(const Field& a) {
    return std::sqrt(chunked_sum(a.size(), [&](std::size_t i) { return std::norm(a.data[i]); }));
}

double norm2(const BoundaryField& a) {
    return std::sqrt(chunked_sum(a.size(), [&](std::size_t i) { return std::norm(a.data[i]); }));
}

double max_abs(const Field& a) {
    return chunked_max(a.size(), [&](std::size_t i) { return std::abs(a.data[i]); });
}

double max_abs(const BoundaryField& a) {
    return chunked_max(a.size(), [&](std::size_t i) { return std::abs(a.data[i]); });
}

BoundaryField slice_normal(const Field& f, int k) {
    BoundaryField out(f.grid);
    const std::size_t t = f.grid.tangential_volume();
    const std::size_t nn = static_cast<std::size_t>(f.grid.normal_pts());
    if (k < 0 || static_cast<std::size_t>(k) >= nn) fail("slice_normal: index out of range");
    for (std::size_t j = 0; j < t; ++j) out.data[j] = f.data[j * nn + static_cast<std::size_t>(k)];
    return out;
}

void set_slice_normal(Field& f, int k, const BoundaryField& b) {
    const std::size_t t = f.grid.tangential_volume();
    const std::size_t nn = static_cast<std::size_t>(f.grid.normal_pts());
    if (b.size() != t) fail("set_slice_normal: size mismatch");
    if (k < 0 || static_cast<std::size_t>(k) >= nn) fail("set_slice_normal: index out of range");
    for (std::size_t j = 0; j < t; ++j) f.data[j * nn + static_cast<std::size_t>(k)] = b.data[j];
}

} // namespace cgolab
