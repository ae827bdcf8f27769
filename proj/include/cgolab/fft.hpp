// FFTW wrapper with a per-process plan cache. Plans are created with
// FFTW_ESTIMATE | FFTW_UNALIGNED only, so planning is deterministic and
// plans work on any buffer. Forward transforms are unnormalized sums;
// inverse transforms divide by the product of the transformed axis sizes.
#pragma once

#include <functional>

#include "cgolab/grid.hpp"

namespace cgolab {

enum class Axes { All, Tangential, Normal };

void fft_forward(Field& f, Axes which = Axes::All);
void fft_inverse(Field& f, Axes which = Axes::All);
void fft_forward(BoundaryField& f);  // tangential lattice transform
void fft_inverse(BoundaryField& f);

// Applies a frequency multiplier m(xi) over the chosen axes:
//   f <- F^{-1} [ m .* (F f) ].
// The callback receives the angular frequency vector xi (length grid.dim);
// for Tangential only xi[0..dim-2] are meaningful, for Normal only xi[dim-1].
void apply_multiplier(Field& f, Axes which,
                      const std::function<cplx(const double* xi)>& m);
void apply_multiplier(BoundaryField& f,
                      const std::function<cplx(const double* xi)>& m);

// Precomputed multiplier tables (cheaper when reapplied many times).
std::vector<cplx> make_full_multiplier(const GridSpec& g,
                                       const std::function<cplx(const double* xi)>& m);
std::vector<cplx> make_tangential_multiplier(const GridSpec& g,
                                             const std::function<cplx(const double* xi)>& m);
void apply_full_multiplier(Field& f, const std::vector<cplx>& table);
void apply_tangential_multiplier(Field& f, const std::vector<cplx>& table);
void apply_tangential_multiplier(BoundaryField& f, const std::vector<cplx>& table);

// Spectral derivative h*d/dx_axis (semiclassical scaling).
void h_derivative(Field& f, int axis, double h);

// Releases every cached plan (called at process end or between grid sweeps
// to bound memory; safe to call at any quiescent point).
void fft_clear_plans();

} // namespace cgolab
