#include "cgolab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cgolab {

// ---------------------------------------------------------------------------
// Whole-space (unflattened) operators. The weight is +-x_n there, so the
// conjugated operator is one constant-coefficient multiplier.

namespace {

cplx p_whole(const double* hxi, int sigma) {
    const double zn = sigma * hxi[2];
    const double zz = hxi[0] * hxi[0] + hxi[1] * hxi[1];
    return cplx(zn * zn + zz - 1.0, -2.0 * zn);
}

} // namespace

void apply_conjugated_y(Field& u, double h, int sigma) {
    apply_multiplier(u, Axes::All, [h, sigma](const double* xi) {
        const double hxi[3] = {h * xi[0], h * xi[1], h * xi[2]};
        return -p_whole(hxi, sigma);
    });
}

void free_green_y(Field& u, double h, double delta, int sigma) {
    apply_multiplier(u, Axes::All, [h, delta, sigma](const double* xi) {
        const double hxi[3] = {h * xi[0], h * xi[1], h * xi[2]};
        return -1.0 / (p_whole(hxi, sigma) - cplx(0.0, delta));
    });
}

// ---------------------------------------------------------------------------
// Construction

namespace {

std::string op_tag(const char* name, const std::string& chart, double h) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "@h=%.17g", h);
    return std::string(name) + "@" + chart + buf;
}

} // namespace

ChartOperators::ChartOperators(const DomainSpec& dom, int chart_idx, double h,
                               const ChartOpConfig& cfg)
    : grid_(dom.grid()),
      h_(h),
      cfg_(cfg),
      tab_(ChartTables::build(dom.charts.at(chart_idx), dom.grid(), dom.box)),
      md_(MachineData::build(tab_, h)),
      cut_(CutoffSet::from_c(dom.cutoff_c)) {
    const Chart& chart = dom.charts.at(chart_idx);
    ev_ = std::make_unique<SymbolEval>(md_, cut_);
    flat_ = md_.is_flat();
    delta_ = std::min(1e-3, h * h);

    const std::size_t T = grid_.tangential_volume();
    a0c_.resize(T);
    inv_a0c_.resize(T);
    sqrtw_.resize(T);
    inv_sqrtw_.resize(T);
    for (std::size_t i = 0; i < T; ++i) {
        a0c_[i] = 1.0 + tab_.absK2[i];
        inv_a0c_[i] = 1.0 / a0c_[i];
        sqrtw_[i] = std::sqrt(a0c_[i]);
        inv_sqrtw_[i] = 1.0 / sqrtw_[i];
    }
    omega_mask_ = omega_mask_chart(dom, chart_idx);
    halfspace_ = halfspace_mask(grid_);
    plateau_mask_ = plateau_mask(chart, grid_);

    rho_mult_ = make_tangential_multiplier(grid_, [this, h](const double* xi) {
        return cplx(cut_.rho(std::hypot(h * xi[0], h * xi[1])), 0.0);
    });
    rho1_mult_ = make_tangential_multiplier(grid_, [this, h](const double* xi) {
        return cplx(cut_.rho1(std::hypot(h * xi[0], h * xi[1])), 0.0);
    });

    // Tangential frequency decoding shared by the expansions.
    std::vector<double> z1(T), z2(T);
    for (std::size_t i = 0; i < T; ++i) {
        int idx[kMaxDim];
        decode_tangential_index(grid_, i, idx);
        z1[i] = h * grid_.freq(0, idx[0]);
        z2[i] = h * grid_.freq(1, idx[1]);
    }

    const SymbolEval& ev = *ev_;
    const std::string& label = chart.label;
    auto expand_t = [&](const char* name, auto&& sym) {
        return expand_tangential(
            grid_, h,
            [&, sym](std::size_t ix, std::size_t izeta) {
                const double z[2] = {z1[izeta], z2[izeta]};
                return sym(ix, z);
            },
            cfg_.rank_cap, cfg_.expand_tol, symbol_seed(op_tag(name, label, h)));
    };

    if (flat_) {
        op_fplus_ = tangential_multiplier_op(grid_, h, [&](const double* hxi) {
            return -cplx(0.0, 1.0) * SymbolEval::a_plus_flat(cut_, hxi);
        });
        op_qtang_ = tangential_multiplier_op(grid_, h, [&](const double* hxi) {
            return cplx(0.0, 1.0) * SymbolEval::a_minus_flat(cut_, hxi);
        });
        op_a0_ = tangential_multiplier_op(grid_, h, [&](const double* hxi) {
            return SymbolEval::a0_flat(cut_, hxi);
        });
        op_e1_ = tangential_multiplier_op(grid_, h, [](const double*) {
            return cplx(0.0, 0.0);
        });
        op_z_ = tangential_multiplier_op(grid_, h, [&](const double* hxi) {
            const double r = std::hypot(hxi[0], hxi[1]);
            return cut_.rho1(r) + SymbolEval::r0_flat(cut_, hxi);
        });
        op_zpre_ = tangential_multiplier_op(grid_, h, [&](const double* hxi) {
            const double r = std::hypot(hxi[0], hxi[1]);
            return 1.0 / (cut_.rho1(r) + SymbolEval::r0_flat(cut_, hxi));
        });
    } else {
        op_fplus_ = expand_t("fplus", [&](std::size_t ix, const double* z) {
            return -cplx(0.0, 1.0) * ev.a_plus(ix, z) -
                   cplx(0.0, h) * ev.m0(ix, z);
        });
        op_qtang_ = expand_t("qtang", [&](std::size_t ix, const double* z) {
            return cplx(0.0, 1.0) * ev.a_minus(ix, z) - cplx(0.0, h) * ev.m0(ix, z);
        });
        op_a0_ = expand_t("a0", [&](std::size_t ix, const double* z) {
            return ev.a0(ix, z);
        });
        op_e1_ = expand_t("e1", [&](std::size_t ix, const double* z) {
            return ev.m0(ix, z) * ev.a_minus(ix, z);
        });
        op_z_ = expand_t("z0", [&](std::size_t ix, const double* z) {
            return ev.z0(ix, z);
        });
        op_zpre_ = expand_t("zpre", [&](std::size_t ix, const double* z) {
            return 1.0 / ev.z0(ix, z);
        });
    }

    // Poisson term: normal profile in the alpha factors, one joint expansion.
    {
        const int nn = grid_.normal_pts();
        op_poisson_ = expand_tangential(
            grid_, h,
            [&](std::size_t ixvol, std::size_t izeta) {
                const std::size_t it = ixvol / static_cast<std::size_t>(nn);
                const int k = static_cast<int>(ixvol % static_cast<std::size_t>(nn));
                const double z[2] = {z1[izeta], z2[izeta]};
                return ev.poisson(it, z, grid_.coord(2, k));
            },
            cfg_.rank_cap, cfg_.expand_tol, symbol_seed(op_tag("poisson", label, h)),
            /*alpha_on_volume=*/true);
    }

    // Interior term rho/p over the full frequency lattice.
    if (flat_) {
        op_ps_ = full_multiplier_op(grid_, h, [&](const double* hxi) {
            const double r = std::hypot(hxi[0], hxi[1]);
            const double rho = cut_.rho(r);
            if (rho == 0.0) return cplx(0.0, 0.0);
            return rho / SymbolEval::p_flat(hxi, hxi[2]);
        });
    } else {
        op_ps_ = expand_full(
            grid_, h,
            [&](std::size_t ix, std::size_t ixi) {
                int idx[kMaxDim];
                decode_index(grid_, ixi, idx);
                const double z[2] = {h * grid_.freq(0, idx[0]), h * grid_.freq(1, idx[1])};
                const double zn = h * grid_.freq(2, idx[2]);
                const double rho = cut_.rho(std::hypot(z[0], z[1]));
                if (rho == 0.0) return cplx(0.0, 0.0);
                return rho / ev.p(ix, z, zn);
            },
            cfg_.rank_cap, cfg_.expand_tol, symbol_seed(op_tag("ps", label, h)));
    }

    // Padded grid for the causal inverse of J.
    padded_ = grid_;
    padded_.npts[2] *= 2;
    padded_.len[2] *= 2.0;

    if (flat_) {
        jflat_padded_ = make_full_multiplier(padded_, [&](const double* xi) {
            const double hxi[2] = {h * xi[0], h * xi[1]};
            const cplx fp = -cplx(0.0, 1.0) * SymbolEval::a_plus_flat(cut_, hxi);
            return 1.0 / (cplx(0.0, h * xi[2]) + fp);
        });
    } else {
        // Mean-coefficient symbol of F+ for preconditioning.
        std::vector<cplx> fmean(T, cplx{0.0, 0.0});
        for (std::size_t iz = 0; iz < T; ++iz) {
            const double z[2] = {z1[iz], z2[iz]};
            cplx acc{0.0, 0.0};
            for (std::size_t ix = 0; ix < T; ++ix)
                acc += -cplx(0.0, 1.0) * ev.a_plus(ix, z) - cplx(0.0, h) * ev.m0(ix, z);
            fmean[iz] = acc / static_cast<double>(T);
        }
        jpre_padded_ = make_full_multiplier(padded_, [&](const double* xi) {
            // Locate the tangential bin of this padded-lattice frequency.
            int i0 = -1, i1 = -1;
            for (int k = 0; k < grid_.npts[0] && (i0 < 0 || i1 < 0); ++k) {
                if (i0 < 0 && std::abs(grid_.freq(0, k) - xi[0]) < 1e-12) i0 = k;
                if (i1 < 0 && std::abs(grid_.freq(1, k) - xi[1]) < 1e-12) i1 = k;
            }
            if (i0 < 0 || i1 < 0) fail("padded tangential frequency not found");
            const std::size_t iz =
                static_cast<std::size_t>(i0) * grid_.npts[1] + static_cast<std::size_t>(i1);
            return 1.0 / (cplx(0.0, h * xi[2]) + fmean[iz]);
        });
    }

    // Mean-coefficient resolvent table for the free-field preconditioner
    // (exact when the chart is flat).
    {
        double mA = 0.0, mK1 = 0.0, mK2 = 0.0, mO = 0.0;
        for (std::size_t i = 0; i < T; ++i) {
            mA += a0c_[i];
            mK1 += md_.kb1[i];
            mK2 += md_.kb2[i];
            mO += md_.oneh[i];
        }
        mA /= T;
        mK1 /= T;
        mK2 /= T;
        mO /= T;
        const double dd = delta_;
        free_pre_ = make_full_multiplier(grid_, [&, mA, mK1, mK2, mO, dd](const double* xi) {
            const double z0v = h * xi[0], z1v = h * xi[1], zn = h * xi[2];
            const cplx pm(mA * zn * zn + 2.0 * (mK1 * z0v + mK2 * z1v) * zn +
                              z0v * z0v + z1v * z1v - 1.0,
                          -2.0 * mO * zn);
            return 1.0 / (pm - cplx(0.0, dd));
        });
    }
}

// ---------------------------------------------------------------------------
// Conjugated operator

void ChartOperators::apply_M(Field& u) const {
    const double h = h_;
    Field un = u;
    h_derivative(un, 2, h);
    Field w1 = un;
    h_derivative(w1, 0, h);
    Field w2 = un;
    h_derivative(w2, 1, h);
    Field unn = un;
    h_derivative(unn, 2, h);
    Field lap = u;
    apply_multiplier(lap, Axes::Tangential, [h](const double* xi) {
        return cplx(h * h * (xi[0] * xi[0] + xi[1] * xi[1]), 0.0);
    });
    const std::size_t T = grid_.tangential_volume();
    const int nn = grid_.normal_pts();
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (long long it = 0; it < static_cast<long long>(T); ++it) {
        const std::size_t j = static_cast<std::size_t>(it);
        const double ac = a0c_[j];
        const double oh = md_.oneh[j];
        const double k1 = md_.kb1[j];
        const double k2 = md_.kb2[j];
        const std::size_t base = j * nn;
        for (int k = 0; k < nn; ++k) {
            const std::size_t i = base + k;
            u.data[i] = lap.data[i] - ac * unn.data[i] - 2.0 * oh * un.data[i] -
                        2.0 * (k1 * w1.data[i] + k2 * w2.data[i]) - u.data[i];
        }
    }
}

void ChartOperators::apply_M_weighted(Field& u) const {
    apply_M(u);
    broadcast_mul_real(u, inv_a0c_);
}

// ---------------------------------------------------------------------------
// Factorization pieces

void ChartOperators::apply_J(Field& u) const {
    Field d = u;
    h_derivative(d, 2, h_);
    op_fplus_.apply(u);
    axpy(u, cplx(1.0, 0.0), d);
}

void ChartOperators::apply_Q(Field& u) const {
    Field d = u;
    h_derivative(d, 2, h_);
    op_qtang_.apply(u);
    axpy(u, cplx(-1.0, 0.0), d);
}

void ChartOperators::apply_A0(Field& u) const { op_a0_.apply(u); }
void ChartOperators::apply_E1(Field& u) const { op_e1_.apply(u); }

Field ChartOperators::factor_residual(const Field& u) const {
    Field m = u;
    apply_M_weighted(m);
    Field qj = u;
    apply_J(qj);
    apply_Q(qj);
    Field a0u = u;
    apply_A0(a0u);
    Field e1u = u;
    apply_E1(e1u);
    axpy(m, cplx(-1.0, 0.0), qj);
    axpy(m, cplx(-1.0, 0.0), a0u);
    axpy(m, cplx(h_, 0.0), e1u);
    scale(m, cplx(1.0 / (h_ * h_), 0.0));
    return m;
}

// ---------------------------------------------------------------------------
// Causal inverse of J

void ChartOperators::apply_J_padded(Field& u) const {
    Field d = u;
    h_derivative(d, 2, h_);
    TangentialOp fp = op_fplus_;
    fp.grid = padded_;
    fp.apply(u);
    axpy(u, cplx(1.0, 0.0), d);
}

Field ChartOperators::solve_J_padded(const Field& rhs) const {
    if (flat_) {
        Field x = rhs;
        apply_full_multiplier(x, jflat_padded_);
        return x;
    }
    Field y(padded_);
    GmresOptions opt;
    opt.tol = cfg_.jsolve_tol;
    opt.maxit = cfg_.jsolve_maxit;
    opt.verbose = cfg_.verbose;
    GmresResult r = gmres(
        [this](const Field& v) {
            Field z = v;
            apply_full_multiplier(z, jpre_padded_);
            apply_J_padded(z);
            return z;
        },
        rhs, y, opt);
    if (!r.converged && cfg_.verbose)
        std::fprintf(stderr, "  invert_J: relres %.3e after %d its\n", r.relres,
                     r.iterations);
    apply_full_multiplier(y, jpre_padded_);
    return y;
}

Field ChartOperators::invert_J(const Field& u) const {
    const int nn = grid_.normal_pts();
    const std::size_t T = grid_.tangential_volume();
    Field big(padded_);
    const int off = nn / 2;
    for (std::size_t it = 0; it < T; ++it)
        for (int k = 0; k < nn; ++k)
            big.data[it * static_cast<std::size_t>(2 * nn) + off + k] =
                u.data[it * static_cast<std::size_t>(nn) + k];
    Field sol = solve_J_padded(big);
    Field out(grid_);
    for (std::size_t it = 0; it < T; ++it)
        for (int k = 0; k < nn; ++k)
            out.data[it * static_cast<std::size_t>(nn) + k] =
                sol.data[it * static_cast<std::size_t>(2 * nn) + off + k];
    return out;
}

Field ChartOperators::jplus(const Field& u) const {
    Field m = u;
    pointwise_mul_real(m, halfspace_);
    return invert_J(m);
}

Field ChartOperators::id_minus_jpj(const Field& u) const {
    Field ju = u;
    apply_J(ju);
    Field jp = jplus(ju);
    Field out = u;
    axpy(out, cplx(-1.0, 0.0), jp);
    return out;
}

// ---------------------------------------------------------------------------
// Free-field resolvent

Field ChartOperators::free_green(const Field& v, GmresResult* info) const {
    if (flat_) {
        Field x = v;
        apply_full_multiplier(x, free_pre_);
        if (info) *info = GmresResult{0, 0.0, true};
        return x;
    }
    Field y(grid_);
    GmresOptions opt;
    opt.tol = cfg_.free_tol;
    opt.maxit = cfg_.free_maxit;
    opt.verbose = cfg_.verbose;
    const cplx idelta(0.0, delta_);
    GmresResult r = gmres(
        [this, idelta](const Field& q) {
            Field z = q;
            apply_full_multiplier(z, free_pre_);
            Field w = z;
            apply_M(w);
            axpy(w, -idelta, z);
            return w;
        },
        v, y, opt);
    if (info) *info = r;
    apply_full_multiplier(y, free_pre_);
    return y;
}

Field ChartOperators::apply_Ps(const Field& v) const {
    Field x = v;
    op_ps_.apply(x);
    return x;
}

// ---------------------------------------------------------------------------
// Boundary pivot

BoundaryField ChartOperators::apply_Z(const BoundaryField& t) const {
    BoundaryField x = t;
    op_z_.apply(x);
    return x;
}

BoundaryField ChartOperators::zinv(const BoundaryField& t) const {
    BoundaryField y(t.grid);
    GmresOptions opt;
    opt.tol = cfg_.zsolve_tol;
    opt.maxit = cfg_.zsolve_maxit;
    gmres(
        [this](const BoundaryField& q) {
            BoundaryField z = q;
            op_zpre_.apply(z);
            op_z_.apply(z);
            return z;
        },
        t, y, opt);
    op_zpre_.apply(y);
    return y;
}

void ChartOperators::zinv_slices(Field& u) const {
    // Z acts slice-by-slice, so one volume solve covers every slice with
    // batched transforms.
    Field y(grid_);
    GmresOptions opt;
    opt.tol = cfg_.zsolve_tol;
    opt.maxit = cfg_.zsolve_maxit;
    gmres(
        [this](const Field& q) {
            Field z = q;
            op_zpre_.apply(z);
            op_z_.apply(z);
            return z;
        },
        u, y, opt);
    op_zpre_.apply(y);
    u = std::move(y);
}

// ---------------------------------------------------------------------------
// Poisson term, extension, filters, traces

Field ChartOperators::apply_poisson(const BoundaryField& f) const {
    return op_poisson_.apply_to_boundary(f);
}

Field ChartOperators::extendE(const BoundaryField& t) const { return extend_boundary(t); }

void ChartOperators::filter_rho(Field& u, bool complement) const {
    if (!complement) {
        apply_tangential_multiplier(u, rho_mult_);
        return;
    }
    Field keep = u;
    apply_tangential_multiplier(keep, rho_mult_);
    axpy(u, cplx(-1.0, 0.0), keep);
}

void ChartOperators::filter_rho(BoundaryField& u, bool complement) const {
    if (!complement) {
        apply_tangential_multiplier(u, rho_mult_);
        return;
    }
    BoundaryField keep = u;
    apply_tangential_multiplier(keep, rho_mult_);
    axpy(u, cplx(-1.0, 0.0), keep);
}

void ChartOperators::filter_rho1(Field& u, bool complement) const {
    if (!complement) {
        apply_tangential_multiplier(u, rho1_mult_);
        return;
    }
    Field keep = u;
    apply_tangential_multiplier(keep, rho1_mult_);
    axpy(u, cplx(-1.0, 0.0), keep);
}

void ChartOperators::filter_rho1(BoundaryField& u, bool complement) const {
    if (!complement) {
        apply_tangential_multiplier(u, rho1_mult_);
        return;
    }
    BoundaryField keep = u;
    apply_tangential_multiplier(keep, rho1_mult_);
    axpy(u, cplx(-1.0, 0.0), keep);
}

BoundaryField ChartOperators::tau(const Field& u) const {
    return slice_normal(u, grid_.zero_index(2));
}

BoundaryField ChartOperators::tau_b(const Field& u) const {
    const int k0 = grid_.zero_index(2);
    Field d1 = u;
    h_derivative(d1, 0, h_);
    Field d2 = u;
    h_derivative(d2, 1, h_);
    Field dn = u;
    h_derivative(dn, 2, h_);
    BoundaryField s0 = slice_normal(u, k0);
    BoundaryField s1 = slice_normal(d1, k0);
    BoundaryField s2 = slice_normal(d2, k0);
    BoundaryField sn = slice_normal(dn, k0);
    BoundaryField out(grid_);
    const std::size_t T = grid_.tangential_volume();
    for (std::size_t i = 0; i < T; ++i) {
        // Geometric slope here, not the mirrored coefficient data.
        out.data[i] = inv_sqrtw_[i] *
                      (tab_.k1[i] * s1.data[i] + tab_.k2[i] * s2.data[i] -
                       a0c_[i] * sn.data[i] - s0.data[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parametrix

Field ChartOperators::apply_Pr(const Field& v, const BoundaryField& f) const {
    Field G = free_green(v);
    Field JG = G;
    apply_J(JG);

    // Elliptic half-space part: (1 - rho)(hD') J^+ J G.
    Field t1 = JG;
    pointwise_mul_real(t1, halfspace_);
    t1 = invert_J(t1);
    filter_rho(t1, /*complement=*/true);

    // Boundary-layer correction driven by the volume datum.
    Field t2 = JG;
    filter_rho(t2, /*complement=*/true);
    zinv_slices(t2);
    t2 = id_minus_jpj(t2);

    // Interior term.
    Field t3 = apply_Ps(v);

    Field out = t1;
    axpy(out, cplx(1.0, 0.0), t2);
    axpy(out, cplx(1.0, 0.0), t3);

    // Boundary-datum terms.
    BoundaryField fw = f;
    for (std::size_t i = 0; i < fw.size(); ++i) fw.data[i] *= sqrtw_[i];
    Field t4 = extendE(fw);
    filter_rho(t4, /*complement=*/true);
    zinv_slices(t4);
    t4 = id_minus_jpj(t4);
    axpy(out, cplx(1.0, 0.0), t4);

    BoundaryField fl = f;
    for (std::size_t i = 0; i < fl.size(); ++i) fl.data[i] *= inv_sqrtw_[i];
    Field t5 = apply_poisson(fl);
    axpy(out, cplx(-1.0, 0.0), t5);
    return out;
}

} // namespace cgolab
