// Green's functions for the conjugated operator: a per-chart solve that
// upgrades the one-sided parametrix to an exact inverse (volume equation on
// the flattened domain plus weighted trace condition on the data piece), and
// a glued whole-domain solve that patches chart solves into the free-field
// resolvent with collar cutoffs.
#pragma once

#include <memory>
#include <vector>

#include "cgolab/operators.hpp"

namespace cgolab {

// Production solve tolerances. The defaults in ChartOpConfig are tuned for
// operator-level verification; the Green solves run many inner solves per
// outer iteration and use these relaxed settings instead.
// Solver settings for assembled Green solves. The parametrix only
// preconditions an exact-residual GMRES, so its expansions and inner solves
// can run far looser than the verification-grade defaults without touching
// the measured residuals; what they buy is wall time per iteration.
inline ChartOpConfig production_op_config() {
    ChartOpConfig c;
    c.rank_cap = 20;
    c.expand_tol = 1e-5;
    c.jsolve_tol = 1e-5;
    c.jsolve_maxit = 30;
    c.free_tol = 1e-5;
    c.free_maxit = 60;
    c.zsolve_tol = 1e-5;
    c.zsolve_maxit = 25;
    return c;
}

struct GreenConfig {
    ChartOpConfig op = production_op_config();
    double pair_tol = 1e-3;   // chart solve (volume + trace) relative residual
    int pair_maxit = 60;
    double glue_tol = 3e-3;   // whole-domain gluing relative residual
    int glue_maxit = 12;
    // The volume block of the pair residual carries the datum scale while
    // the trace block carries the much smaller solution scale; this weight
    // rebalances the joint norm so GMRES does not starve the trace equation.
    double trace_weight = 50.0;
    // The masked interior equation leaves the solution unconstrained outside
    // the slab, and whatever junk accumulates there leaks into the face
    // trace through the spectral normal derivative once the collar cutoff
    // multiplies it. A strong penalty on a band-limited exterior region
    // keeps that junk at the residual floor instead.
    double exterior_weight = 200.0;
    int verbose = 0;
};

struct PairSolveInfo {
    GmresResult pair;
};

// Exact chart solve. In the chart frame the result U satisfies, up to the
// pair solver tolerance,
//     M U = -v    on the flattened domain mask,
//     tau_b U = -f  on the trace plane,
// which in the original frame says that the conjugated Laplacian of the
// returned field reproduces v on the domain and its weighted conormal trace
// on the data piece is -f.
class ChartGreen {
  public:
    ChartGreen(const DomainSpec& dom, int chart_idx, double h,
               const GreenConfig& cfg = {});

    const ChartOperators& ops() const { return ops_; }
    int chart_index() const { return chart_idx_; }
    const Chart& chart() const { return chart_; }
    const std::vector<double>& plateau_tangential() const { return plateau_t_; }

    // v is a chart-frame volume datum; f a boundary datum on the tangential
    // lattice (masked to the data plateau internally).
    Field solve_chart(const Field& v, const BoundaryField& f,
                      PairSolveInfo* info = nullptr) const;

    // y-frame wrapper: masks the datum to the domain, transports into the
    // chart frame, solves, transports back.
    Field solve(const Field& v_y, const BoundaryField& f,
                PairSolveInfo* info = nullptr) const;

  private:
    int chart_idx_ = 0;
    Chart chart_;
    GreenConfig cfg_;
    ChartOperators ops_;
    std::vector<double> omega_y_;
    std::vector<double> plateau_t_;
};

struct XiSolveInfo {
    GmresResult glue;
    int chart_solves = 0;       // pair solves triggered across the gluing
    int pair_iterations = 0;    // summed inner pair iterations
};

// Whole-domain Green's function with data pieces on one face. sigma = +1
// selects the weight growing upward (data on the lower face), sigma = -1 the
// mirrored weight (data on the upper face). The result of apply(v, f)
// reproduces v under the conjugated Laplacian on the domain and matches the
// -f trace condition on each data plateau.
class XiGreen {
  public:
    XiGreen(const DomainSpec& dom, int sigma, double h,
            const GreenConfig& cfg = {});

    Field apply(const Field& v, const std::vector<BoundaryField>& f,
                XiSolveInfo* info = nullptr) const;
    Field apply(const Field& v, XiSolveInfo* info = nullptr) const;

    int sigma() const { return sigma_; }
    double h() const { return h_; }
    double delta() const { return delta_; }
    const GridSpec& grid() const { return grid_; }
    const DomainSpec& domain() const { return dom_; }
    std::size_t num_charts() const { return greens_.size(); }
    int chart_index(std::size_t j) const { return charts_[j]; }
    const ChartGreen& chart_green(std::size_t j) const { return *greens_[j]; }
    const std::vector<double>& omega() const { return omega_; }
    const std::vector<double>& chi(std::size_t j) const { return chi_[j]; }
    double collar_eps() const { return eps_; }

    // Free-field comparison solve with the same smoothing parameter, for
    // defect baselines.
    Field free_apply(const Field& v) const;

  private:
    // Pi(v, f): free-field solve patched with chart corrections. v must be
    // masked to the domain; pass f = nullptr for zero boundary data.
    Field assemble(const Field& v, const std::vector<BoundaryField>* f,
                   XiSolveInfo* info) const;

    GridSpec grid_;
    DomainSpec dom_;
    int sigma_ = +1;
    double h_ = 0.0;
    double delta_ = 0.0;
    double eps_ = 0.25;
    GreenConfig cfg_;
    std::vector<int> charts_;
    std::vector<std::unique_ptr<ChartGreen>> greens_;
    std::vector<double> omega_;
    std::vector<std::vector<double>> chi_;
};

} // namespace cgolab
