// Shared basics: complex alias, deterministic RNG, parallel-mode switch,
// and fixed-chunk reductions whose result does not depend on thread count.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgolab {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

// Execution mode for the OpenMP kernels. Serial is the reference path used
// by the equivalence tests; Auto lets kernels parallelize. Both paths must
// produce bitwise-identical results.
enum class ParallelMode { Serial, Auto };

ParallelMode parallel_mode();
void set_parallel_mode(ParallelMode m);
// Reads CGOLAB_SERIAL=1 from the environment (used by the CLI and tests).
void init_parallel_mode_from_env();

// splitmix64: tiny, well-studied 64-bit mixer. We keep our own copy because
// the standard library's distributions are implementation-defined and the
// output streams here must be reproducible byte-for-byte across builds.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with full 53-bit mantissa.
    double uniform53() { return std::ldexp(static_cast<double>(next() >> 11), -53); }

    // Standard normal via Box-Muller; guards the log against zero.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform53();
        double u2 = uniform53();
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        have_spare_ = true;
        spare_ = r * std::sin(2.0 * kPi * u2);
        return r * std::cos(2.0 * kPi * u2);
    }

    cplx cgaussian() {
        double a = gaussian();
        double b = gaussian();
        return {a, b};
    }

  private:
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Fixed chunk size for partial-sum reductions. Chunks are summed internally
// in index order and the per-chunk results are combined in chunk order, so
// the floating-point result is independent of how chunks were scheduled.
inline constexpr std::size_t kReduceChunk = 4096;

double reduce_sum(const std::vector<double>& partials);

// Sums f(i) for i in [0,n) deterministically; parallelizes over chunks when
// the Auto mode is active.
template <class F>
double chunked_sum(std::size_t n, F&& f) {
    if (n == 0) return 0.0;
    const std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> partials(nchunks, 0.0);
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long c = 0; c < static_cast<long long>(nchunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += f(i);
        partials[static_cast<std::size_t>(c)] = acc;
    }
    return reduce_sum(partials);
}

template <class F>
cplx chunked_csum(std::size_t n, F&& f) {
    if (n == 0) return {0.0, 0.0};
    const std::size_t nchunks = (n + kReduceChunk - 1) / kReduceChunk;
    std::vector<double> pre(nchunks, 0.0), pim(nchunks, 0.0);
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long c = 0; c < static_cast<long long>(nchunks); ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kReduceChunk;
        const std::size_t hi = std::min(n, lo + kReduceChunk);
        cplx acc{0.0, 0.0};
        for (std::size_t i = lo; i < hi; ++i) acc += f(i);
        pre[static_cast<std::size_t>(c)] = acc.real();
        pim[static_cast<std::size_t>(c)] = acc.imag();
    }
    return {reduce_sum(pre), reduce_sum(pim)};
}

// Max over i in [0,n) of f(i); deterministic (max is associative).
template <class F>
double chunked_max(std::size_t n, F&& f) {
    double best = -1e308;
#pragma omp parallel for schedule(static) reduction(max : best) if (parallel_mode() == ParallelMode::Auto)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
        best = std::max(best, f(static_cast<std::size_t>(i)));
    return best;
}

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

// Smooth transition profile: 1 for s <= 0, 0 for s >= 1, strictly monotone
// in between, with all derivatives vanishing at both ends.
inline double smooth_step_down(double s) {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    const double a = std::exp(-1.0 / (1.0 - s));
    const double b = std::exp(-1.0 / s);
    return a / (a + b);
}

// First and second derivatives of smooth_step_down, needed where cutoff
// factors are differentiated analytically instead of on the grid.
inline double smooth_step_down_d1(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double a = std::exp(-1.0 / (1.0 - s));
    const double b = std::exp(-1.0 / s);
    const double p = 1.0 / ((1.0 - s) * (1.0 - s)) + 1.0 / (s * s);
    const double d = a + b;
    return -a * b * p / (d * d);
}

inline double smooth_step_down_d2(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double a = std::exp(-1.0 / (1.0 - s));
    const double b = std::exp(-1.0 / s);
    const double im = 1.0 / ((1.0 - s) * (1.0 - s));
    const double ip = 1.0 / (s * s);
    const double p = im + ip;
    const double q = ip - im;
    const double pp = 2.0 / ((1.0 - s) * (1.0 - s) * (1.0 - s)) - 2.0 / (s * s * s);
    const double d = a + b;
    return -a * b * ((q * p + pp) * d - 2.0 * p * (b * ip - a * im)) / (d * d * d);
}

} // namespace cgolab
