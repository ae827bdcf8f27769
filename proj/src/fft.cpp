#include "cgolab/fft.hpp"

#include <fftw3.h>

#include <map>
#include <tuple>

namespace cgolab {

namespace {

// Cache key: transform layout + direction. All plans use ESTIMATE|UNALIGNED,
// so a plan depends only on this key, never on the buffer it was made with.
using PlanKey = std::tuple<std::vector<int>, int, int, int, int>;

std::map<PlanKey, fftw_plan>& plan_cache() {
    static std::map<PlanKey, fftw_plan> cache;
    return cache;
}

fftw_plan get_plan(const std::vector<int>& dims, int howmany, int stride, int dist,
                   int sign, cplx* buf) {
    PlanKey key{dims, howmany, stride, dist, sign};
    auto& cache = plan_cache();
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    fftw_complex* p = reinterpret_cast<fftw_complex*>(buf);
    fftw_plan plan = fftw_plan_many_dft(
        static_cast<int>(dims.size()), dims.data(), howmany, p, nullptr, stride, dist,
        p, nullptr, stride, dist, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) fail("fftw_plan_many_dft failed");
    cache.emplace(key, plan);
    return plan;
}

struct Layout {
    std::vector<int> dims;
    int howmany, stride, dist;
    std::size_t transformed;  // product of transformed axis sizes
};

Layout layout_for(const GridSpec& g, Axes which) {
    Layout L;
    if (which == Axes::All) {
        for (int a = 0; a < g.dim; ++a) L.dims.push_back(g.npts[a]);
        L.howmany = 1;
        L.stride = 1;
        L.dist = 1;
    } else if (which == Axes::Tangential) {
        for (int a = 0; a + 1 < g.dim; ++a) L.dims.push_back(g.npts[a]);
        L.howmany = g.normal_pts();
        L.stride = g.normal_pts();
        L.dist = 1;
    } else {
        L.dims.push_back(g.normal_pts());
        L.howmany = static_cast<int>(g.tangential_volume());
        L.stride = 1;
        L.dist = g.normal_pts();
    }
    L.transformed = 1;
    for (int d : L.dims) L.transformed *= static_cast<std::size_t>(d);
    return L;
}

void run(Field& f, Axes which, int sign) {
    Layout L = layout_for(f.grid, which);
    fftw_plan plan = get_plan(L.dims, L.howmany, L.stride, L.dist, sign, f.data.data());
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(f.data.data()),
                     reinterpret_cast<fftw_complex*>(f.data.data()));
    if (sign == FFTW_BACKWARD) scale(f, cplx{1.0 / static_cast<double>(L.transformed), 0.0});
}

void run(BoundaryField& f, int sign) {
    std::vector<int> dims;
    for (int a = 0; a + 1 < f.grid.dim; ++a) dims.push_back(f.grid.npts[a]);
    std::size_t t = f.grid.tangential_volume();
    fftw_plan plan = get_plan(dims, 1, 1, 1, sign, f.data.data());
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(f.data.data()),
                     reinterpret_cast<fftw_complex*>(f.data.data()));
    if (sign == FFTW_BACKWARD) {
        const cplx s{1.0 / static_cast<double>(t), 0.0};
        for (auto& z : f.data) z *= s;
    }
}

} // namespace

void fft_forward(Field& f, Axes which) { run(f, which, FFTW_FORWARD); }
void fft_inverse(Field& f, Axes which) { run(f, which, FFTW_BACKWARD); }
void fft_forward(BoundaryField& f) { run(f, FFTW_FORWARD); }
void fft_inverse(BoundaryField& f) { run(f, FFTW_BACKWARD); }

std::vector<cplx> make_full_multiplier(const GridSpec& g,
                                       const std::function<cplx(const double*)>& m) {
    std::vector<cplx> table(g.volume());
    double xi[kMaxDim] = {0, 0, 0, 0};
    int idx[kMaxDim];
    for (std::size_t i = 0; i < table.size(); ++i) {
        decode_index(g, i, idx);
        for (int a = 0; a < g.dim; ++a) xi[a] = g.freq(a, idx[a]);
        table[i] = m(xi);
    }
    return table;
}

std::vector<cplx> make_tangential_multiplier(const GridSpec& g,
                                             const std::function<cplx(const double*)>& m) {
    std::vector<cplx> table(g.tangential_volume());
    double xi[kMaxDim] = {0, 0, 0, 0};
    int idx[kMaxDim];
    for (std::size_t j = 0; j < table.size(); ++j) {
        decode_tangential_index(g, j, idx);
        for (int a = 0; a + 1 < g.dim; ++a) xi[a] = g.freq(a, idx[a]);
        xi[g.dim - 1] = 0.0;
        table[j] = m(xi);
    }
    return table;
}

void apply_full_multiplier(Field& f, const std::vector<cplx>& table) {
    fft_forward(f, Axes::All);
    pointwise_mul(f, table);
    fft_inverse(f, Axes::All);
}

void apply_tangential_multiplier(Field& f, const std::vector<cplx>& table) {
    fft_forward(f, Axes::Tangential);
    broadcast_mul(f, table);
    fft_inverse(f, Axes::Tangential);
}

void apply_tangential_multiplier(BoundaryField& f, const std::vector<cplx>& table) {
    if (f.size() != table.size()) fail("apply_tangential_multiplier: size mismatch");
    fft_forward(f);
    for (std::size_t i = 0; i < f.size(); ++i) f.data[i] *= table[i];
    fft_inverse(f);
}

void apply_multiplier(Field& f, Axes which, const std::function<cplx(const double*)>& m) {
    if (which == Axes::Tangential) {
        apply_tangential_multiplier(f, make_tangential_multiplier(f.grid, m));
        return;
    }
    if (which == Axes::All) {
        apply_full_multiplier(f, make_full_multiplier(f.grid, m));
        return;
    }
    // Normal-only multiplier: value depends on xi_n alone.
    const GridSpec& g = f.grid;
    std::vector<cplx> table(static_cast<std::size_t>(g.normal_pts()));
    double xi[kMaxDim] = {0, 0, 0, 0};
    for (int k = 0; k < g.normal_pts(); ++k) {
        xi[g.dim - 1] = g.freq(g.dim - 1, k);
        table[static_cast<std::size_t>(k)] = m(xi);
    }
    fft_forward(f, Axes::Normal);
    const std::size_t t = g.tangential_volume();
    const std::size_t nn = static_cast<std::size_t>(g.normal_pts());
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long j = 0; j < static_cast<long long>(t); ++j) {
        cplx* col = f.data.data() + static_cast<std::size_t>(j) * nn;
        for (std::size_t k = 0; k < nn; ++k) col[k] *= table[k];
    }
    fft_inverse(f, Axes::Normal);
}

void apply_multiplier(BoundaryField& f, const std::function<cplx(const double*)>& m) {
    apply_tangential_multiplier(f, make_tangential_multiplier(f.grid, m));
}

void h_derivative(Field& f, int axis, double h) {
    const GridSpec& g = f.grid;
    if (axis == g.dim - 1) {
        apply_multiplier(f, Axes::Normal, [&](const double* xi) {
            return cplx{0.0, h * xi[g.dim - 1]};
        });
    } else {
        apply_multiplier(f, Axes::Tangential,
                         [&](const double* xi) { return cplx{0.0, h * xi[axis]}; });
    }
}

void fft_clear_plans() {
    for (auto& [k, p] : plan_cache()) fftw_destroy_plan(p);
    plan_cache().clear();
}

} // namespace cgolab
