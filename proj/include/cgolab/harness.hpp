// Experiment layer: analytic test potentials, the conductivity transform,
// the nine-term expansion of the weighted volume pairing of a CGO pair,
// refined-grid Fourier quadrature, deterministic extrapolation fits, and
// the named pipeline stages behind the command line tool.
//
// Every stage consumes a key-value Config, prints one line per check, and
// appends its results to a JSON report without timestamps, so reruns of the
// same configuration are byte-identical.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cgolab/cgo.hpp"
#include "cgolab/config.hpp"

namespace cgolab {

// ---------------------------------------------------------------------------
// Analytic potentials

// Smooth compactly supported potential with a pointwise evaluator. The
// evaluators are self-windowed well inside the slab, so restriction to the
// domain and extension by zero agree with the plain formula on flat
// reference geometry.
struct AnalyticPotential {
    std::string name;
    std::function<double(double, double, double)> eval;
};

AnalyticPotential gaussian_pair_potential();
AnalyticPotential capped_singular_potential();   // (r^2 + rc^2)^{-3/4}, windowed
AnalyticPotential mollified_blocks_potential();  // two blocks, fixed 0.35 edges
AnalyticPotential potential_by_name(const std::string& name);

// Samples the potential on the grid and restricts it to the domain.
Field potential_field(const DomainSpec& dom, const AnalyticPotential& p);

// q = -Delta sqrt(gamma) / sqrt(gamma) with the spectral torus Laplacian.
// gamma must be real and strictly positive.
Field conductivity_to_potential(const Field& gamma);

// ---------------------------------------------------------------------------
// Fits

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};
// Least squares line through (log x, log y). Needs at least three points;
// every y must be positive.
LineFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct RichardsonFit {
    double p = 0.0;          // selected decay exponent
    cplx limit{0.0, 0.0};    // extrapolated value at h = 0
    double resid = 0.0;      // fit residual at the selected exponent
};
// Deterministic scan of v(h) ~ v0 + C h^p over p in [0.25, 4] (step 0.05),
// least squares in (v0, C) at each p, smallest residual wins.
RichardsonFit richardson_scan(const std::vector<double>& h,
                              const std::vector<cplx>& v);

// ---------------------------------------------------------------------------
// Fourier data

// Direct Riemann quadrature of e^{i k . y} q(y) over the domain interior on
// an n^3 refinement of the box (analytic graph test per node, no grid
// transfer). The reference value for the identity stage.
cplx refined_fourier(const DomainSpec& dom, const AnalyticPotential& p,
                     const double* k3, int n);

// Nine-term expansion of the pairing  integral of q u+ u-  over the domain,
// with u+- the conjugated CGO pair at a common xi and snapped h:
//   u+ u- = e^{2i xi . y'} (1 + a+ + r+)(1 + a- + r-),
// expanded in the order {1, a+a-, a-, a+, a-r+, a+r-, r-, r+, r+r-} with
// r = e^{-i keff . y'} r0 the unwound remainder. 'direct' pairs the full
// product in one sweep; total - direct is pure bookkeeping error.
struct NineTerms {
    cplx term[9];
    cplx total{0.0, 0.0};
    cplx direct{0.0, 0.0};
};
NineTerms nine_terms(const Field& q, const std::vector<double>& omega,
                     const CgoFields& plus_fields, const Field& r0_plus,
                     const CgoFields& minus_fields, const Field& r0_minus);

// ---------------------------------------------------------------------------
// Pipeline stages

// One named scalar check: pass iff value <= bound (when less is true) or
// value >= bound (when less is false).
struct CheckLine {
    std::string name;
    double value = 0.0;
    double bound = 0.0;
    bool less = true;
    bool pass = false;
};
CheckLine check_le(const std::string& name, double value, double bound);
CheckLine check_ge(const std::string& name, double value, double bound);

struct StageResult {
    std::string stage;
    std::vector<CheckLine> checks;
    bool passed() const;
};

// The pipeline stages, in their natural order. Each builds what it needs
// from the configuration, prints one [ ok ]/[fail] line per check, and
// returns the check list.
StageResult stage_validate(const Config& cfg);
StageResult stage_certify(const Config& cfg);
StageResult stage_operators(const Config& cfg);
StageResult stage_greens(const Config& cfg);
StageResult stage_cgo(const Config& cfg);
StageResult stage_identity(const Config& cfg);

// Runs the named stages in order, writes <out_dir>/report.json (and the
// stage CSV tables next to it), and returns the process exit code: 0 when
// every check passed, 1 otherwise.
int run_stages(const Config& cfg, const std::vector<std::string>& stages);

} // namespace cgolab
