// Timings of the OpenMP kernels against the serial reference path, plus a
// bitwise equality check between the two (the parallel loops carry no
// reductions, so the outputs must agree exactly, not just to rounding).
// Usage: bench_kernels [npts] [reps]
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cgolab/fft.hpp"
#include "cgolab/operators.hpp"

using namespace cgolab;

namespace {

double now_s() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

bool same_bits(const Field& a, const Field& b) {
    return a.size() == b.size()
        && std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(cplx)) == 0;
}

struct Row {
    std::string name;
    double serial_ms = 0.0;
    double auto_ms = 0.0;
    bool bitwise = false;
};

// Runs `kernel` (in-place on a copy of `input`) reps times per mode, keeps
// the best wall time, and compares the two outputs bit for bit.
template <class K>
Row bench(const std::string& name, const Field& input, int reps, K&& kernel) {
    Row row;
    row.name = name;
    Field out_serial, out_auto;
    for (ParallelMode mode : {ParallelMode::Serial, ParallelMode::Auto}) {
        set_parallel_mode(mode);
        Field warm = input;
        kernel(warm);  // warmup: FFT plans, lazy tables
        double best = 1e300;
        Field out;
        for (int r = 0; r < reps; ++r) {
            Field u = input;
            const double t0 = now_s();
            kernel(u);
            best = std::min(best, now_s() - t0);
            out = std::move(u);
        }
        if (mode == ParallelMode::Serial) {
            row.serial_ms = best * 1e3;
            out_serial = std::move(out);
        } else {
            row.auto_ms = best * 1e3;
            out_auto = std::move(out);
        }
    }
    set_parallel_mode(ParallelMode::Auto);
    row.bitwise = same_bits(out_serial, out_auto);
    return row;
}

} // namespace

int main(int argc, char** argv) {
    const int npts = argc > 1 ? std::atoi(argv[1]) : 32;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
    if (npts < 8 || reps < 1) {
        std::fprintf(stderr, "usage: bench_kernels [npts >= 8] [reps >= 1]\n");
        return 2;
    }
#ifdef _OPENMP
    std::printf("kernel timings at %d^3, best of %d, %d thread(s) in auto mode\n\n",
                npts, reps, omp_get_max_threads());
#else
    std::printf("kernel timings at %d^3, best of %d, OpenMP disabled\n\n", npts, reps);
#endif

    const DomainSpec dom = make_curved_domain(npts);
    const GridSpec g = dom.grid();
    const double h = 0.1;
    const ChartOperators ops(dom, 0, h);

    Field u0(g);
    fill_random(u0, 41);
    Field x0(g);
    fill_random(x0, 42);
    std::vector<double> w(u0.size());
    {
        SplitMix64 rng(43);
        for (double& v : w) v = rng.uniform53();
    }
    BoundaryField t0(g);
    fill_random(t0, 44);

    std::vector<Row> rows;
    rows.push_back(bench("scale", u0, reps,
                         [](Field& u) { scale(u, cplx{1.0, 0.5}); }));
    rows.push_back(bench("axpy", u0, reps,
                         [&](Field& u) { axpy(u, cplx{0.3, -0.7}, x0); }));
    rows.push_back(bench("pointwise_mul_real", u0, reps,
                         [&](Field& u) { pointwise_mul_real(u, w); }));
    rows.push_back(bench("multiplier_all", u0, reps, [](Field& u) {
        apply_multiplier(u, Axes::All, [](const double* xi) {
            return cplx{std::exp(-0.01 * (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2])), 0.0};
        });
    }));
    rows.push_back(bench("conjugated_laplacian", u0, reps,
                         [&](Field& u) { apply_conjugated_y(u, h, +1); }));
    rows.push_back(bench("chart_apply_M", u0, reps,
                         [&](Field& u) { ops.apply_M(u); }));
    rows.push_back(bench("chart_apply_J", u0, reps,
                         [&](Field& u) { ops.apply_J(u); }));
    rows.push_back(bench("factor_residual", u0, reps,
                         [&](Field& u) { u = ops.factor_residual(u); }));
    // Boundary pivot: wrap the tangential op as an in-place volume kernel on
    // the zero slice so it shares the harness above.
    rows.push_back(bench("boundary_pivot_Z", u0, reps, [&](Field& u) {
        BoundaryField s = t0;
        BoundaryField z = ops.apply_Z(s);
        set_slice_normal(u, 0, z);
    }));

    std::printf("%-22s %12s %12s %9s   %s\n", "kernel", "serial (ms)", "auto (ms)",
                "speedup", "bitwise");
    bool all_bitwise = true;
    for (const Row& r : rows) {
        std::printf("%-22s %12.3f %12.3f %8.2fx   %s\n", r.name.c_str(), r.serial_ms,
                    r.auto_ms, r.serial_ms / std::max(r.auto_ms, 1e-9),
                    r.bitwise ? "yes" : "NO");
        all_bitwise = all_bitwise && r.bitwise;
    }
    std::printf("\nserial/auto bitwise equality: %s\n", all_bitwise ? "PASS" : "FAIL");
    return all_bitwise ? 0 : 1;
}
