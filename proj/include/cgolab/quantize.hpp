// Left-quantized pseudodifferential operators on the torus grid.
//
// Tangential operators act slice-by-slice in the normal variable:
//   (Op(a) u)(x', x_n) = F'^{-1}[ a(x', h xi') * (F' u)(xi', x_n) ](x')
// with the x'-dependence applied pointwise after the inverse transform.
// x-independent symbols reduce to exact frequency multipliers. Genuinely
// x-dependent symbols are approximated by a low-rank separable expansion
//   a(x, xi) ~ sum_i alpha_i(x) beta_i(xi)
// built with a seeded randomized range finder; the singular-value tail at
// the truncation rank is recorded so tests can assert it is negligible.
#pragma once

#include <functional>

#include "cgolab/fft.hpp"
#include "cgolab/grid.hpp"

namespace cgolab {

struct SeparableReport {
    int rank = 0;
    double sv_tail = 0.0;   // sigma_{rank+1}/sigma_1 (0 when fully resolved)
    double sigma0 = 0.0;
};

// Symbol in the tangential frequencies with x = (x', x_n) dependence
// allowed in the alpha factors (needed for the Poisson-type operator).
struct TangentialOp {
    GridSpec grid;
    double h = 0.0;
    bool is_multiplier = false;
    std::vector<cplx> mult;                 // tangential table if multiplier
    bool alpha_on_volume = false;           // alpha factors live on the full grid
    std::vector<std::vector<cplx>> alpha;   // rank factors in x
    std::vector<std::vector<cplx>> beta;    // rank factors in xi'
    SeparableReport report;

    void apply(Field& u) const;
    void apply(BoundaryField& u) const;     // forbidden when alpha_on_volume
    // Boundary datum to volume field, for symbols with normal dependence in
    // the alpha factors (the Poisson term). Requires alpha_on_volume.
    Field apply_to_boundary(const BoundaryField& f) const;
};

// Symbol over the full frequency lattice with x'-dependent coefficients.
struct FullOp {
    GridSpec grid;
    double h = 0.0;
    bool is_multiplier = false;
    std::vector<cplx> mult;                 // full-spectrum table if multiplier
    std::vector<std::vector<cplx>> alpha;   // tangential-lattice factors
    std::vector<std::vector<cplx>> beta;    // full-spectrum factors
    SeparableReport report;

    void apply(Field& u) const;
};

// Exact multiplier constructors. The callback receives the SEMICLASSICAL
// frequency h*xi (all dim entries; tangential builders zero the last).
TangentialOp tangential_multiplier_op(const GridSpec& g, double h,
                                      const std::function<cplx(const double* hxi)>& sym);
FullOp full_multiplier_op(const GridSpec& g, double h,
                          const std::function<cplx(const double* hxi)>& sym);

// Randomized separable expansions. eval(ix, ixi) returns the symbol value at
// x-lattice index ix and frequency-lattice index ixi. For tangential ops both
// lattices are the tangential one unless alpha_on_volume (then ix runs over
// the full grid). For full ops ix is tangential and ixi runs over the full
// frequency lattice. Deterministic for a fixed seed.
TangentialOp expand_tangential(const GridSpec& g, double h,
                               const std::function<cplx(std::size_t, std::size_t)>& eval,
                               int rank_cap, double tol, std::uint64_t seed,
                               bool alpha_on_volume = false);
FullOp expand_full(const GridSpec& g, double h,
                   const std::function<cplx(std::size_t, std::size_t)>& eval,
                   int rank_cap, double tol, std::uint64_t seed);

// Stable seed from a symbol tag (FNV-1a).
std::uint64_t symbol_seed(const std::string& tag);

} // namespace cgolab
