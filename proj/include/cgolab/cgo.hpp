// Complex geometric optics solutions: the drift-corrected oscillatory phase,
// boundary-adapted complex phase t and amplitude b built by truncated
// Taylor cascades in the chart frames, the exponential assembly of the
// profile a_h and its conjugated defect L, the boundary datum f, and the
// remainder fixed point driven by the glued Green's function.
//
// Everything is expressed through conjugated, torus-periodic fields: the
// weight exponential e^{phi/h} is never materialized. The oscillatory part
// is kept periodic by snapping h so that the total tangential wave vector
// (1/h - mu) omega' + xi lands on the frequency lattice.
#pragma once

#include <array>
#include <memory>
#include <vector>

#include "cgolab/greens.hpp"

namespace cgolab {

// ---------------------------------------------------------------------------
// Phase frame

struct PhaseSpec {
    int sigma = +1;          // weight is sigma * y_n
    int psi_axis = 0;        // tangential axis carrying the unit phase direction
    double xi[2] = {0.0, kPi / 4.0};   // tangential lattice frequency, xi | omega'
    double h_nominal = 0.1;
};

struct PhaseData {
    int sigma = +1;
    int psi_axis = 0;
    double h = 0.0;          // snapped value (lattice-periodic oscillation)
    int tbin = 0;            // lattice bin of T = sqrt(1 - h^2|xi|^2)/h
    double tfreq = 0.0;      // T itself
    double mu = 0.0;         // |omega'_h|, the drift magnitude
    double xi[2] = {0.0, 0.0};
    double keff[2] = {0.0, 0.0};       // sigma*T*omega' + xi
    double nullity = 0.0;    // residual of grad(Phi).grad(Phi) = 0
};

// omega'_h = [(1 - sqrt(1 - h^2 |xi|^2 |grad psi|^{-2}))/h] grad psi.
// Fails when the radicand is not positive.
void drift_vector(const double* xi3, const double* grad_psi3, double h,
                  double* out3);

// Snap h so that T = sqrt(1 - h^2|xi|^2)/h is a lattice frequency of the
// grid (then every oscillatory factor of the CGO pair is an exact lattice
// plane wave). The snapped h is the admissible value closest to h_nominal.
PhaseData make_phase(const GridSpec& g, const PhaseSpec& spec);

// ---------------------------------------------------------------------------
// Boundary-adapted phase and amplitude cascades (per chart)

struct BorelSpec {
    int order = 3;           // N: t solved through level N, b through level N
    double eps0 = 1.01;      // first cutoff scale (must exceed 1)
    double growth = 1.05;    // slow geometric growth of the eps_j
    double b_plateau = 0.12; // final amplitude cutoff in x_n: plateau half-width
    double b_support = 0.20; // and support half-width (inside all eta plateaus)
};

// Taylor tables of t and b over one chart's tangential lattice in the
// canonical chart frame, plus pointwise jet evaluation of the cutoff series
// and all derivatives needed by the exponential assembly. The tables depend
// on the chart geometry, the phase direction, and xi, but not on h.
class ChartCascade {
  public:
    ChartCascade(const DomainSpec& dom, int chart_idx, const PhaseData& ph,
                 const BorelSpec& bs);

    int order() const { return order_; }
    int chart_index() const { return chart_idx_; }
    const ChartTables& tables() const { return tab_; }
    double eps_j(int j) const { return eps_[static_cast<std::size_t>(j)]; }
    // Taylor coefficient tables (tangential lattice); t has entries
    // j = 0..N+1, b has entries j = 0..N+1.
    const std::vector<cplx>& t_coeff(int j) const;
    const std::vector<cplx>& b_coeff(int j) const;

    // Value and derivative bundle of the assembled (cutoff) series at the
    // tangential node `it`, normal offset xn, canonical frame. Subscript n
    // is d/dxn; 1,2 are tangential; lap is the tangential Laplacian. The b
    // entries refer to the raw cascade series, before the final support
    // cutoffs.
    struct Jet {
        cplx t{0.0, 0.0}, tn{0.0, 0.0}, tnn{0.0, 0.0};
        cplx t1{0.0, 0.0}, t2{0.0, 0.0}, t1n{0.0, 0.0}, t2n{0.0, 0.0};
        cplx tlap{0.0, 0.0};
        cplx b{0.0, 0.0}, bn{0.0, 0.0}, bnn{0.0, 0.0};
        cplx b1{0.0, 0.0}, b2{0.0, 0.0}, b1n{0.0, 0.0}, b2n{0.0, 0.0};
        cplx blap{0.0, 0.0};
    };
    Jet eval(std::size_t it, double xn) const;

    // Final amplitude cutoff (plateau/support in |x_n|) and its first two
    // derivatives; the tangential window profile of the chart.
    double bcut(double xn) const;
    double bcut_d1(double xn) const;
    double bcut_d2(double xn) const;
    const std::vector<double>& window_profile() const { return wprof_; }
    const std::vector<double>& window_profile_d(int axis) const {
        return axis == 0 ? wprof_d1_ : wprof_d2_;
    }
    const std::vector<double>& window_profile_lap() const { return wprof_lap_; }

    // Eikonal residual grad t . grad t (complex bilinear, y-frame metric) at
    // a point, from assembled jets.
    cplx eikonal(const Jet& j, std::size_t it) const;
    // Transport residual b(Delta t + 2i xi.grad t) + 2 grad b.grad t of the
    // raw cascade series.
    cplx transport(const Jet& j, std::size_t it) const;
    // y-frame Laplacian of t from a jet.
    cplx laplacian_t(const Jet& j, std::size_t it) const;

    const double* omega_eff() const { return omega_eff_; }
    const double* xi_t() const { return xi_; }

  private:
    int chart_idx_ = 0;
    int order_ = 3;
    BorelSpec bs_;
    GridSpec grid_;
    ChartTables tab_;
    double omega_eff_[2] = {0.0, 0.0};   // sigma * omega'' in the canonical frame
    double xi_[2] = {0.0, 0.0};
    std::vector<double> eps_;
    // Per order j: value, tangential gradient, tangential Laplacian tables.
    std::vector<std::vector<cplx>> tf_, tf1_, tf2_, tflap_;
    std::vector<std::vector<cplx>> bf_, bf1_, bf2_, bflap_;
    std::vector<double> wprof_, wprof_d1_, wprof_d2_, wprof_lap_;
};

// ---------------------------------------------------------------------------
// Assembled CGO ingredients (torus fields, y frame)

struct CgoFields {
    PhaseData phase;
    Field a_h;                       // boundary-adapted profile
    Field L;                         // conjugated defect of e^{(t-phi)/h}e^{i psi_h} b
    Field Ewave;                     // lattice wave e^{i keff . y'}
    std::vector<BoundaryField> f;    // boundary datum per data chart
    double trace_defect = 0.0;       // max |a_h - 1| over the data plateaus
    double max_abs_a = 0.0;          // sup |a_h| over the domain
    double f_l2 = 0.0;               // combined boundary datum norm
    double L_linf = 0.0;             // sup |L| over the domain
};

class CgoBuilder {
  public:
    CgoBuilder(const DomainSpec& dom, const PhaseSpec& ps, const BorelSpec& bs);

    const PhaseData& phase() const { return phase_; }
    std::size_t num_charts() const { return cascades_.size(); }
    int chart_index(std::size_t j) const;
    const ChartCascade& cascade(std::size_t j) const { return *cascades_[j]; }
    const DomainSpec& domain() const { return dom_; }

    CgoFields assemble() const;

    // Diagnostics for the cascade contracts, measured on chart j:
    // sup |grad t . grad t| over {|x_n| < delta, tangential plateau}.
    double eikonal_sup(std::size_t j, double delta) const;
    // sup of the raw transport residual over the same region.
    double transport_sup(std::size_t j, double delta) const;
    // sup of the conjugated defect bracket of b at the given h (the L
    // bracket before the exponential prefactor, raw cascade amplitude).
    double conjugated_defect_sup(std::size_t j, double delta, double h) const;
    // Largest value of (Re t - phi)/|x_n| over 0 < x_n < delta (should be
    // negative and bounded away from zero: the decay certificate for a_h).
    double decay_rate_bound(std::size_t j, double delta) const;

  private:
    DomainSpec dom_;
    PhaseData phase_;
    BorelSpec bs_;
    std::vector<int> charts_;
    std::vector<std::unique_ptr<ChartCascade>> cascades_;
};

// ---------------------------------------------------------------------------
// Remainder fixed point and full assembly

struct RemainderConfig {
    double eps_split = 0.3;   // L^{n/2} budget of the sharp part of sqrt|q|
    double tol = 1e-5;        // relative step tolerance of the iteration
    int maxit = 25;
    int verbose = 0;
};

struct RemainderResult {
    Field w;                  // fixed-point unknown
    Field r0;                 // conjugated remainder (torus field)
    int iterations = 0;
    bool converged = false;
    double contraction = 0.0; // largest measured step ratio
    double split_level = 0.0; // amplitude threshold of the sqrt|q| split
    double sharp_norm = 0.0;  // L^{3/2} norm of the sharp part
    double w_l2 = 0.0;
    double r_l2 = 0.0;        // L^2 over the domain
    double r_lp = 0.0;        // L^p over the domain, p = 2n/(n-2)
};

// Solves (1 + h^2 e^{i theta} sqrt|q| G(sqrt|q| ., 0)) w = rhs with
// rhs = h^2 e^{i theta} sqrt|q| (a - G(L_g, f)), a = -E(1+a_h), L_g = -L,
// then sets r0 = G(sqrt|q| w + L_g, f). The measured contraction factor is
// reported; the iteration aborts when a step expands.
RemainderResult solve_remainder(const XiGreen& green, const CgoFields& cgo,
                                const Field& q, const RemainderConfig& rc);

struct CgoReport {
    double trace_defect = 0.0;
    double max_abs_a = 0.0;
    double f_l2 = 0.0;
    double L_linf = 0.0;
    double w_l2 = 0.0;
    double r_l2 = 0.0;
    double r_lp = 0.0;
    double contraction = 0.0;
    int iterations = 0;
    double weak_pde_rel = 0.0;   // conjugated PDE residual, relative
    double bdry_defect = 0.0;    // weighted-trace residual on the data pieces
};

struct CgoSolution {
    CgoFields fields;
    RemainderResult rem;
    CgoReport report;
};

// Full pipeline for one orientation: assemble the profile, solve the
// remainder, and measure the solution contracts. q is the potential on the
// torus grid; test_seed drives the interior probe battery.
CgoSolution build_cgo(const XiGreen& green, const CgoBuilder& builder,
                      const Field& q, const RemainderConfig& rc,
                      std::uint64_t test_seed);

} // namespace cgolab
