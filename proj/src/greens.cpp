#include "cgolab/greens.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cgolab {

// ---------------------------------------------------------------------------
// Chart solve

ChartGreen::ChartGreen(const DomainSpec& dom, int chart_idx, double h,
                       const GreenConfig& cfg)
    : chart_idx_(chart_idx),
      chart_(dom.charts.at(static_cast<std::size_t>(chart_idx))),
      cfg_(cfg),
      ops_(dom, chart_idx, h, cfg.op),
      omega_y_(omega_mask_y(dom)),
      plateau_t_(plateau_mask(dom.charts.at(static_cast<std::size_t>(chart_idx)),
                              dom.grid())) {}

Field ChartGreen::solve_chart(const Field& v, const BoundaryField& f,
                              PairSolveInfo* info) const {
    const ChartOperators& op = ops_;

    const double kappa = cfg_.trace_weight;
    PairVec rhs{v, f};
    pointwise_mul_real(rhs.vol, op.omega_mask());
    scale(rhs.vol, cplx(-1.0, 0.0));
    for (std::size_t i = 0; i < rhs.bdy.size(); ++i)
        rhs.bdy.data[i] *= -kappa * plateau_t_[i];

    PairVec x{Field(op.grid()), BoundaryField(op.grid())};
    GmresOptions gopt;
    gopt.tol = cfg_.pair_tol;
    gopt.maxit = cfg_.pair_maxit;
    gopt.verbose = cfg_.verbose;
    GmresResult res = gmres(
        [&op, kappa](const PairVec& p) {
            Field u = op.apply_Pr(p.vol, p.bdy);
            PairVec out{u, op.tau_b(u)};
            op.apply_M(out.vol);
            pointwise_mul_real(out.vol, op.omega_mask());
            scale(out.bdy, cplx(kappa, 0.0));
            return out;
        },
        rhs, x, gopt);
    if (info) info->pair = res;
    if (!res.converged && cfg_.verbose)
        std::fprintf(stderr, "  chart solve '%s': relres %.3e after %d its\n",
                     chart_.label.c_str(), res.relres, res.iterations);
    return op.apply_Pr(x.vol, x.bdy);
}

Field ChartGreen::solve(const Field& v_y, const BoundaryField& f,
                        PairSolveInfo* info) const {
    Field vm = v_y;
    pointwise_mul_real(vm, omega_y_);
    Field vc = to_chart_frame(vm, ops_.tables());
    Field uc = solve_chart(vc, f, info);
    return from_chart_frame(uc, ops_.tables());
}

// ---------------------------------------------------------------------------
// Glued whole-domain solve

namespace {

// Collar cutoff around one chart: a tangential plateau-to-window profile
// times a smooth ramp in the inward distance to the graph. Equal to one on
// the data collar, zero beyond the window and deeper than eps.
std::vector<double> build_chi(const DomainSpec& dom, const Chart& c,
                              const GridSpec& g, double eps) {
    const std::size_t T = g.tangential_volume();
    const int nn = g.normal_pts();
    std::vector<double> chi(g.volume(), 0.0);
    for (std::size_t it = 0; it < T; ++it) {
        int idx[kMaxDim];
        decode_tangential_index(g, it, idx);
        const double y0 = g.coord(0, idx[0]);
        const double y1 = g.coord(1, idx[1]);
        double w = 1.0;
        const double yy[2] = {y0, y1};
        for (int ax = 0; ax < 2; ++ax) {
            double d = std::abs(yy[ax] - c.center[ax]);
            d = std::min(d, dom.box - d);   // periodic distance
            w *= smooth_step_down((d - c.plateau[ax]) /
                                  (c.halfwidth[ax] - c.plateau[ax]));
        }
        if (w == 0.0) continue;
        const double gv = c.g(y0, y1, dom.box);
        for (int k = 0; k < nn; ++k) {
            const double yn = g.coord(2, k);
            // Compactly supported in s on one period: the profile must also
            // close off below the face, else it jumps at the periodic wrap
            // and the ring pollutes every spectral normal derivative.
            const double s = (c.side > 0) ? yn - gv : gv - yn;
            const double plateau = std::min(0.3, eps / 4.0);
            const double eta = smooth_step_down((s - plateau) / (eps - plateau)) *
                               smooth_step_down((-s - 0.4) / 1.2);
            chi[it * static_cast<std::size_t>(nn) + static_cast<std::size_t>(k)] =
                w * eta;
        }
    }
    return chi;
}

} // namespace

XiGreen::XiGreen(const DomainSpec& dom, int sigma, double h, const GreenConfig& cfg)
    : grid_(dom.grid()), dom_(dom), sigma_(sigma), h_(h), cfg_(cfg) {
    if (sigma != +1 && sigma != -1) fail("XiGreen: sigma must be +1 or -1");
    delta_ = std::min(1e-3, h * h);
    charts_ = (sigma > 0) ? dom.xi_lower : dom.xi_upper;
    if (charts_.empty()) fail("XiGreen: no data charts on the selected face");

    // Collar depth: stay clear of the opposite face and of neighbouring
    // chart windows.
    double maxg = -1e300;
    const int m = 4 * dom.npts;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            const double x = -0.5 * dom.box + dom.box * i / m;
            const double y = -0.5 * dom.box + dom.box * j / m;
            maxg = std::max(maxg, dom.bottom_graph(x, y));
        }
    // Same-side windows are kept apart by the tangential profile, so only
    // the face-to-face clearance bounds the collar depth. Each chart solve
    // is PDE-consistent across the whole slab, so the cutoff may ramp down
    // over most of the slab thickness; a wide, well-resolved ramp keeps the
    // spectral normal derivative at the face from seeing the transition.
    const double clearance = dom.y_top - maxg;
    eps_ = std::min(1.2, 0.85 * clearance);
    if (eps_ < 3.0 * grid_.spacing(2))
        fail("XiGreen: collar ramp under-resolved on this grid");

    omega_ = omega_mask_y(dom);
    for (int idx : charts_) {
        const Chart& c = dom.charts.at(static_cast<std::size_t>(idx));
        if (c.side * sigma < 0)
            fail("XiGreen: chart '" + c.label + "' faces away from the weight");
        greens_.push_back(std::make_unique<ChartGreen>(dom, idx, h, cfg));
        chi_.push_back(build_chi(dom, c, grid_, eps_));
    }
}

Field XiGreen::free_apply(const Field& v) const {
    Field u = v;
    free_green_y(u, h_, delta_, sigma_);
    return u;
}

Field XiGreen::assemble(const Field& v, const std::vector<BoundaryField>* f,
                        XiSolveInfo* info) const {
    Field gp = v;
    free_green_y(gp, h_, delta_, sigma_);
    Field out = gp;
    for (std::size_t j = 0; j < greens_.size(); ++j) {
        BoundaryField fj(grid_);
        if (f) fj = (*f).at(j);
        PairSolveInfo pinfo;
        Field gj = greens_[j]->solve(v, fj, &pinfo);
        if (info) {
            info->chart_solves += 1;
            info->pair_iterations += pinfo.pair.iterations;
        }
        Field diff = gp;
        axpy(diff, cplx(-1.0, 0.0), gj);
        pointwise_mul_real(diff, chi_[j]);
        axpy(out, cplx(-1.0, 0.0), diff);
    }
    return out;
}

Field XiGreen::apply(const Field& v, const std::vector<BoundaryField>& f,
                     XiSolveInfo* info) const {
    if (f.size() != greens_.size())
        fail("XiGreen::apply: one boundary datum per data chart required");
    Field vm = v;
    pointwise_mul_real(vm, omega_);

    // Boundary-datum part of the patched solve (zero volume datum).
    Field zero(grid_);
    Field bpart = assemble(zero, &f, info);

    // Right-hand side of the gluing equation.
    Field rhs = bpart;
    apply_conjugated_y(rhs, h_, sigma_);
    pointwise_mul_real(rhs, omega_);
    scale(rhs, cplx(-1.0, 0.0));
    axpy(rhs, cplx(1.0, 0.0), vm);

    Field w(grid_);
    GmresOptions gopt;
    gopt.tol = cfg_.glue_tol;
    gopt.maxit = cfg_.glue_maxit;
    gopt.verbose = cfg_.verbose;
    GmresResult res = gmres(
        [this, info](const Field& q) {
            Field qm = q;
            pointwise_mul_real(qm, omega_);
            Field u = assemble(qm, nullptr, info);
            apply_conjugated_y(u, h_, sigma_);
            pointwise_mul_real(u, omega_);
            return u;
        },
        rhs, w, gopt);
    if (info) info->glue = res;
    if (!res.converged && cfg_.verbose)
        std::fprintf(stderr, "  gluing: relres %.3e after %d its\n", res.relres,
                     res.iterations);

    pointwise_mul_real(w, omega_);
    Field sol = assemble(w, nullptr, info);
    axpy(sol, cplx(1.0, 0.0), bpart);
    return sol;
}

Field XiGreen::apply(const Field& v, XiSolveInfo* info) const {
    std::vector<BoundaryField> f;
    f.reserve(greens_.size());
    for (std::size_t j = 0; j < greens_.size(); ++j) f.emplace_back(grid_);
    return apply(v, f, info);
}

} // namespace cgolab
