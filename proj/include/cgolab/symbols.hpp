// Tangential symbols for the conjugated operator in a chart frame.
//
// In the chart frame the conjugated operator is
//
//   M u = -h^2 D'u - (1+|K|^2)(h dn)^2 u - 2*oneh*(h dn) u
//         - 2 Kb.(h D')(h dn) u - u,
//
// whose full left symbol is
//
//   p(x', z, zn) = (1+|K|^2) zn^2 + 2 (Kb.z) zn + |z|^2 - 1 - 2i*oneh*zn,
//
// with z = h xi' the semiclassical tangential frequency and zn = h xi_n.
// The first-order coefficients enter mirrored (Kb = -K, oneh = 1 - h*lapG/2)
// because the factorized operator is the negated conjugate; the boundary
// trace operator keeps the geometric slope +K. Flat charts are unaffected.
//
// p factors through the roots of the quadratic in zn:
//
//   s  = w^2 - (1-|z|^2)(1+|K|^2),        w = oneh + i Kb.z,
//   r0 = (1 - rho0(|z|)) sqrt(s),
//   a+- = i (w +- r0) / (1+|K|^2),
//
// which gives the exact pointwise identity
//
//   q0 * j0 + a0 = p / (1+|K|^2),   q0 = -i(zn - a-),  j0 = i(zn - a+),
//
// valid for every cutoff value (the cutoff enters q0*j0 and a0 with opposite
// signs). The subprincipal transport coefficient m0 and the boundary pivot
// z0 complete the factorization data.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cgolab/common.hpp"
#include "cgolab/geometry.hpp"
#include "cgolab/grid.hpp"

namespace cgolab {

// Nested radial cutoffs in |z|. rho0 switches the square root off near the
// glancing circle |z| = 1; rho is 1 on supp rho0 and carries the Poisson
// term; rho1 is 1 on supp rho0 with supp rho1 inside {rho = 1}.
struct CutoffSet {
    double c = 0.5;
    double r0_plat, r0_supp;
    double r1_plat, r1_supp;
    double r_plat, r_supp;

    static CutoffSet from_c(double c);
    double rho0(double r) const;
    double rho0_prime(double r) const;
    double rho(double r) const;
    double rho1(double r) const;
};

// Tangential coefficient tables at one (chart, h), plus their tangential
// gradients (computed spectrally; needed by the subprincipal symbol).
struct MachineData {
    GridSpec grid;
    double h = 0.0;
    std::vector<double> kb1, kb2;   // mirrored slope
    std::vector<double> oneh;       // 1 - h * lap(G) / 2
    std::vector<double> absK2;      // |K|^2 (sign-independent)
    // d<i>_<table>: d/dx_i of the table
    std::vector<double> d1_kb1, d2_kb1, d1_kb2, d2_kb2;
    std::vector<double> d1_oneh, d2_oneh, d1_absK2, d2_absK2;

    static MachineData build(const ChartTables& t, double h);
    bool is_flat() const;
};

// Pointwise symbol evaluation. 'it' indexes the tangential lattice of
// md.grid; 'z' is the semiclassical tangential frequency (2 components).
class SymbolEval {
  public:
    SymbolEval(const MachineData& md, const CutoffSet& cut) : md_(&md), cut_(&cut) {}

    const MachineData& data() const { return *md_; }
    const CutoffSet& cutoffs() const { return *cut_; }

    cplx w(std::size_t it, const double* z) const;
    cplx s(std::size_t it, const double* z) const;
    cplx r0(std::size_t it, const double* z) const;
    cplx a_plus(std::size_t it, const double* z) const;
    cplx a_minus(std::size_t it, const double* z) const;
    cplx a0(std::size_t it, const double* z) const;
    cplx m0(std::size_t it, const double* z) const;
    cplx z0(std::size_t it, const double* z) const;
    cplx p(std::size_t it, const double* z, double zn) const;

    // d/dz_m of a_minus (analytic), d/dx_m of a_plus (chain rule through the
    // coefficient tables); building blocks of m0, exposed for tests.
    cplx da_minus_dz(std::size_t it, const double* z, int m) const;
    cplx da_plus_dx(std::size_t it, const double* z, int m) const;

    // Poisson profile: solves  (a (h dn)^2 + b (h dn) + c) l = 0  with
    // l(0) = 0 and (h dn l)(0) = rho(|z|), windowed in x_n so that the
    // analytic solution is kept on a band around the slab and rolled off
    // smoothly outside it (plateau [-2h, 2.2], support [-4h, 3.4]).
    cplx poisson(std::size_t it, const double* z, double xn) const;
    // Analytic h d/dn of the unwindowed profile (for pointwise checks).
    cplx poisson_dn(std::size_t it, const double* z, double xn) const;
    double poisson_window(double xn) const;

    // Flat-chart closed forms (x-independent), used as oracles and for the
    // constant-coefficient free-field resolvent.
    static cplx p_flat(const double* z, double zn);
    static cplx r0_flat(const CutoffSet& cut, const double* z);
    static cplx a_plus_flat(const CutoffSet& cut, const double* z);
    static cplx a_minus_flat(const CutoffSet& cut, const double* z);
    static cplx a0_flat(const CutoffSet& cut, const double* z);

  private:
    const MachineData* md_;
    const CutoffSet* cut_;
};

// Ellipticity and branch certificates, all lattice minima over the grid's
// tangential nodes x' and semiclassical frequencies z = h xi'.
//  eps1:  min of Re[oneh - sqrt(s)] over supp rho      (Poisson decay rate)
//  eps2:  eps1 / 2                                      (growth allowance)
//  branch: min of Re s over supp (1 - rho0)             (root stays principal)
//  re_z0: min of Re z0 over the whole lattice           (pivot invertibility)
struct Certificates {
    double eps1 = 0.0;
    double eps2 = 0.0;
    double branch = 0.0;
    double re_z0 = 0.0;
    double max_absK2 = 0.0;
    double h = 0.0;
    std::string chart;
    bool pass = false;
};

Certificates compute_certificates(const SymbolEval& ev, const std::string& chart_label);

// Serialize a batch of certificates to a JSON file.
void write_certificates_json(const std::string& path, const std::vector<Certificates>& cs);

} // namespace cgolab
