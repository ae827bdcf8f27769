// Periodic tensor grid on a torus box, complex scalar fields on it, and the
// frequency/coordinate conventions used throughout. Storage is row-major
// with the LAST axis fastest; the last axis plays the role of the normal
// direction x_n, the leading axes are tangential.
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "cgolab/common.hpp"

namespace cgolab {

inline constexpr int kMaxDim = 4;

struct GridSpec {
    int dim = 3;
    std::array<int, kMaxDim> npts{};  // points per axis
    std::array<double, kMaxDim> len{};  // box length per axis

    static GridSpec cube(int dim, int n, double box_len);

    // Even point counts of at least 8 per axis, with prime factors limited
    // to {2,3,5,7} so transforms stay fast and the center plane x=0 lies on
    // the grid.
    void validate() const;

    std::size_t volume() const {
        std::size_t v = 1;
        for (int a = 0; a < dim; ++a) v *= static_cast<std::size_t>(npts[a]);
        return v;
    }
    std::size_t tangential_volume() const {
        std::size_t v = 1;
        for (int a = 0; a + 1 < dim; ++a) v *= static_cast<std::size_t>(npts[a]);
        return v;
    }
    int normal_pts() const { return npts[dim - 1]; }
    double spacing(int axis) const { return len[axis] / npts[axis]; }
    double cell_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim; ++a) v *= spacing(a);
        return v;
    }
    double tangential_cell_area() const {
        double v = 1.0;
        for (int a = 0; a + 1 < dim; ++a) v *= spacing(a);
        return v;
    }

    // x_a(k) = -L_a/2 + k * L_a/N_a; the plane x_a = 0 is index N_a/2.
    double coord(int axis, int k) const { return -0.5 * len[axis] + k * spacing(axis); }
    int zero_index(int axis) const { return npts[axis] / 2; }

    // Signed integer frequency index for FFT bin k.
    int signed_bin(int axis, int k) const {
        return (k < npts[axis] - k) ? k : k - npts[axis];
    }
    // Angular frequency of bin k: xi = 2*pi*ktilde/L.
    double freq(int axis, int k) const {
        return 2.0 * kPi * signed_bin(axis, k) / len[axis];
    }

    bool operator==(const GridSpec& o) const {
        if (dim != o.dim) return false;
        for (int a = 0; a < dim; ++a)
            if (npts[a] != o.npts[a] || len[a] != o.len[a]) return false;
        return true;
    }
};

// Complex scalar samples over the full grid.
struct Field {
    GridSpec grid;
    std::vector<cplx> data;

    Field() = default;
    explicit Field(const GridSpec& g) : grid(g), data(g.volume(), cplx{0.0, 0.0}) {}

    std::size_t size() const { return data.size(); }
    cplx& operator[](std::size_t i) { return data[i]; }
    const cplx& operator[](std::size_t i) const { return data[i]; }
};

// Complex samples over the tangential lattice only (one value per column).
struct BoundaryField {
    GridSpec grid;  // full grid spec of the parent field, for conventions
    std::vector<cplx> data;

    BoundaryField() = default;
    explicit BoundaryField(const GridSpec& g)
        : grid(g), data(g.tangential_volume(), cplx{0.0, 0.0}) {}

    std::size_t size() const { return data.size(); }
    cplx& operator[](std::size_t i) { return data[i]; }
    const cplx& operator[](std::size_t i) const { return data[i]; }
};

// Decodes flat index -> per-axis indices for the full grid.
inline void decode_index(const GridSpec& g, std::size_t flat, int* idx) {
    for (int a = g.dim - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(flat % static_cast<std::size_t>(g.npts[a]));
        flat /= static_cast<std::size_t>(g.npts[a]);
    }
}

// Decodes a tangential flat index (full grid minus last axis).
inline void decode_tangential_index(const GridSpec& g, std::size_t flat, int* idx) {
    for (int a = g.dim - 2; a >= 0; --a) {
        idx[a] = static_cast<int>(flat % static_cast<std::size_t>(g.npts[a]));
        flat /= static_cast<std::size_t>(g.npts[a]);
    }
}

// Elementwise helpers. All are bitwise-deterministic in either parallel mode.
void fill_random(Field& f, std::uint64_t seed);
void fill_random(BoundaryField& f, std::uint64_t seed);
void scale(Field& f, cplx s);
void scale(BoundaryField& f, cplx s);
void axpy(Field& y, cplx a, const Field& x);          // y += a*x
void axpy(BoundaryField& y, cplx a, const BoundaryField& x);
void pointwise_mul(Field& f, const std::vector<cplx>& w);        // f *= w (full size)
void pointwise_mul_real(Field& f, const std::vector<double>& w);
// Multiplies each tangential column of f by the column's boundary value.
void broadcast_mul(Field& f, const std::vector<cplx>& tang);
void broadcast_mul_real(Field& f, const std::vector<double>& tang);

// Deterministic inner products and norms (unweighted l2 over samples).
cplx dot(const Field& a, const Field& b);             // sum conj(a)*b
cplx dot(const BoundaryField& a, const BoundaryField& b);
double norm2(const Field& a);
double norm2(const BoundaryField& a);
double max_abs(const Field& a);
double max_abs(const BoundaryField& a);

// Slice of the full field at normal index k (size = tangential volume).
BoundaryField slice_normal(const Field& f, int k);
// Writes a boundary field into normal plane k.
void set_slice_normal(Field& f, int k, const BoundaryField& b);

} // namespace cgolab
