#include "cgolab/symbols.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include <fstream>

#include "cgolab/fft.hpp"

namespace cgolab {

// ---------------------------------------------------------------------------
// Cutoffs

CutoffSet CutoffSet::from_c(double c) {
    if (!(c > 0.0 && c < 1.0)) fail("CutoffSet: c must lie in (0,1)");
    CutoffSet s;
    s.c = c;
    s.r0_plat = std::sqrt(c);
    s.r0_supp = 0.5 * (std::sqrt(c) + 1.0);
    const double gap = 1.0 - s.r0_supp;
    // rho1 = 1 on supp rho0; rho = 1 on supp rho1 with room to spare; all
    // supports stay strictly inside the unit circle.
    s.r1_plat = s.r0_supp;
    s.r1_supp = s.r0_supp + 0.10 * gap;
    s.r_plat = s.r0_supp + 0.20 * gap;
    s.r_supp = s.r0_supp + 0.55 * gap;
    return s;
}

namespace {

double sds_prime(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double a = std::exp(-1.0 / (1.0 - s));
    const double b = std::exp(-1.0 / s);
    const double u = 1.0 - s;
    return -a * b * (1.0 / (u * u) + 1.0 / (s * s)) / ((a + b) * (a + b));
}

double radial_cutoff(double r, double plat, double supp) {
    return smooth_step_down((r - plat) / (supp - plat));
}

} // namespace

double CutoffSet::rho0(double r) const { return radial_cutoff(r, r0_plat, r0_supp); }
double CutoffSet::rho(double r) const { return radial_cutoff(r, r_plat, r_supp); }
double CutoffSet::rho1(double r) const { return radial_cutoff(r, r1_plat, r1_supp); }

double CutoffSet::rho0_prime(double r) const {
    return sds_prime((r - r0_plat) / (r0_supp - r0_plat)) / (r0_supp - r0_plat);
}

// ---------------------------------------------------------------------------
// Machine data

namespace {

std::vector<double> spectral_dx(const std::vector<double>& table, const GridSpec& g,
                                int axis) {
    BoundaryField bf(g);
    for (std::size_t i = 0; i < table.size(); ++i) bf.data[i] = table[i];
    apply_multiplier(bf, [axis](const double* xi) { return cplx(0.0, xi[axis]); });
    std::vector<double> out(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) out[i] = bf.data[i].real();
    return out;
}

} // namespace

MachineData MachineData::build(const ChartTables& t, double h) {
    MachineData m;
    m.grid = t.grid;
    m.h = h;
    const std::size_t T = t.grid.tangential_volume();
    m.kb1.resize(T);
    m.kb2.resize(T);
    m.oneh.resize(T);
    m.absK2 = t.absK2;
    for (std::size_t i = 0; i < T; ++i) {
        m.kb1[i] = -t.k1[i];
        m.kb2[i] = -t.k2[i];
        m.oneh[i] = 1.0 - 0.5 * h * t.lapg[i];
    }
    m.d1_kb1 = spectral_dx(m.kb1, t.grid, 0);
    m.d2_kb1 = spectral_dx(m.kb1, t.grid, 1);
    m.d1_kb2 = spectral_dx(m.kb2, t.grid, 0);
    m.d2_kb2 = spectral_dx(m.kb2, t.grid, 1);
    m.d1_oneh = spectral_dx(m.oneh, t.grid, 0);
    m.d2_oneh = spectral_dx(m.oneh, t.grid, 1);
    m.d1_absK2 = spectral_dx(m.absK2, t.grid, 0);
    m.d2_absK2 = spectral_dx(m.absK2, t.grid, 1);
    return m;
}

bool MachineData::is_flat() const {
    double dev = 0.0;
    for (std::size_t i = 0; i < kb1.size(); ++i) {
        dev = std::max(dev, std::abs(kb1[i]));
        dev = std::max(dev, std::abs(kb2[i]));
        dev = std::max(dev, std::abs(oneh[i] - 1.0));
        dev = std::max(dev, std::abs(absK2[i]));
    }
    return dev < 1e-14;
}

// ---------------------------------------------------------------------------
// Pointwise symbols

cplx SymbolEval::w(std::size_t it, const double* z) const {
    return cplx(md_->oneh[it], md_->kb1[it] * z[0] + md_->kb2[it] * z[1]);
}

cplx SymbolEval::s(std::size_t it, const double* z) const {
    const cplx ww = w(it, z);
    const double a0c = 1.0 + md_->absK2[it];
    const double zz = z[0] * z[0] + z[1] * z[1];
    return ww * ww - (1.0 - zz) * a0c;
}

cplx SymbolEval::r0(std::size_t it, const double* z) const {
    const double r = std::hypot(z[0], z[1]);
    const double f = 1.0 - cut_->rho0(r);
    if (f == 0.0) return {0.0, 0.0};
    return f * std::sqrt(s(it, z));
}

cplx SymbolEval::a_plus(std::size_t it, const double* z) const {
    return cplx(0.0, 1.0) * (w(it, z) + r0(it, z)) / (1.0 + md_->absK2[it]);
}

cplx SymbolEval::a_minus(std::size_t it, const double* z) const {
    return cplx(0.0, 1.0) * (w(it, z) - r0(it, z)) / (1.0 + md_->absK2[it]);
}

cplx SymbolEval::a0(std::size_t it, const double* z) const {
    const double a0c = 1.0 + md_->absK2[it];
    const cplx ss = s(it, z);
    const cplx rr = r0(it, z);
    return (ss - rr * rr) / (a0c * a0c);
}

cplx SymbolEval::p(std::size_t it, const double* z, double zn) const {
    const double a0c = 1.0 + md_->absK2[it];
    const double kz = md_->kb1[it] * z[0] + md_->kb2[it] * z[1];
    const double zz = z[0] * z[0] + z[1] * z[1];
    return cplx(a0c * zn * zn + 2.0 * kz * zn + zz - 1.0, -2.0 * md_->oneh[it] * zn);
}

cplx SymbolEval::da_minus_dz(std::size_t it, const double* z, int m) const {
    const double r = std::hypot(z[0], z[1]);
    const double a0c = 1.0 + md_->absK2[it];
    const double kbm = (m == 0) ? md_->kb1[it] : md_->kb2[it];
    const cplx ww = w(it, z);
    cplx dr0{0.0, 0.0};
    const double f = 1.0 - cut_->rho0(r);
    if (r > 0.0) {
        const double dp = cut_->rho0_prime(r) * (z[m] / r);
        if (dp != 0.0) dr0 -= dp * std::sqrt(s(it, z));
    }
    if (f != 0.0) {
        const cplx sq = std::sqrt(s(it, z));
        // ds/dz_m = 2 w * i kb_m + 2 z_m (1+|K|^2)
        dr0 += f * (ww * cplx(0.0, kbm) + z[m] * a0c) / sq;
    }
    return cplx(0.0, 1.0) * (cplx(0.0, kbm) - dr0) / a0c;
}

cplx SymbolEval::da_plus_dx(std::size_t it, const double* z, int m) const {
    const double r = std::hypot(z[0], z[1]);
    const double a0c = 1.0 + md_->absK2[it];
    const double f = 1.0 - cut_->rho0(r);
    const cplx ww = w(it, z);
    const cplx i1(0.0, 1.0);
    // Coefficient-table gradients at this node.
    const double dw_re = (m == 0) ? md_->d1_oneh[it] : md_->d2_oneh[it];
    const double dkb1 = (m == 0) ? md_->d1_kb1[it] : md_->d2_kb1[it];
    const double dkb2 = (m == 0) ? md_->d1_kb2[it] : md_->d2_kb2[it];
    const double da0 = (m == 0) ? md_->d1_absK2[it] : md_->d2_absK2[it];
    const cplx dw = cplx(dw_re, dkb1 * z[0] + dkb2 * z[1]);
    // w channel: da+/dw = i (1 + f w / sqrt(s)) / a0c.
    cplx dapdw = i1 / a0c;
    cplx dr0da0{0.0, 0.0};
    if (f != 0.0) {
        const cplx sq = std::sqrt(s(it, z));
        dapdw += i1 * (f * ww / sq) / a0c;
        const double zz = z[0] * z[0] + z[1] * z[1];
        dr0da0 = f * (-(1.0 - zz)) / (2.0 * sq);
    }
    // |K|^2 channel: r0 depends on a0c through s, and a+ carries 1/a0c.
    const cplx dapda0 = i1 * dr0da0 / a0c - i1 * (ww + r0(it, z)) / (a0c * a0c);
    return dapdw * dw + dapda0 * da0;
}

cplx SymbolEval::m0(std::size_t it, const double* z) const {
    const cplx ap = a_plus(it, z);
    cplx acc{0.0, 0.0};
    for (int m = 0; m < 2; ++m)
        acc += da_minus_dz(it, z, m) * da_plus_dx(it, z, m);
    return cplx(0.0, -1.0) * acc / ap;
}

cplx SymbolEval::z0(std::size_t it, const double* z) const {
    const double r = std::hypot(z[0], z[1]);
    const double a0c = 1.0 + md_->absK2[it];
    return a0c * cut_->rho1(r) + (md_->oneh[it] - 1.0) + r0(it, z) -
           cplx(0.0, md_->h) * a0c * m0(it, z);
}

// ---------------------------------------------------------------------------
// Poisson profile

double SymbolEval::poisson_window(double xn) const {
    const double h = md_->h;
    const double lower = smooth_step_down((-2.0 * h - xn) / (2.0 * h));
    const double upper = smooth_step_down((xn - 2.2) / 1.2);
    return lower * upper;
}

cplx SymbolEval::poisson(std::size_t it, const double* z, double xn) const {
    const double r = std::hypot(z[0], z[1]);
    const double rho = cut_->rho(r);
    if (rho == 0.0) return {0.0, 0.0};
    const double win = poisson_window(xn);
    if (win == 0.0) return {0.0, 0.0};
    const double a0c = 1.0 + md_->absK2[it];
    const cplx ww = w(it, z);
    const cplx q = std::sqrt(s(it, z)) / a0c;
    const double u = xn / md_->h;
    const cplx E = std::exp(-u * ww / a0c);
    const cplx uq = u * q;
    cplx S;
    if (std::abs(uq) < 1e-4) {
        S = u * (1.0 + uq * uq / 6.0);
    } else {
        S = std::sinh(uq) / q;
    }
    return win * rho * E * S;
}

cplx SymbolEval::poisson_dn(std::size_t it, const double* z, double xn) const {
    const double r = std::hypot(z[0], z[1]);
    const double rho = cut_->rho(r);
    if (rho == 0.0) return {0.0, 0.0};
    const double a0c = 1.0 + md_->absK2[it];
    const cplx ww = w(it, z);
    const cplx q = std::sqrt(s(it, z)) / a0c;
    const double u = xn / md_->h;
    const cplx E = std::exp(-u * ww / a0c);
    const cplx uq = u * q;
    cplx S, C;
    if (std::abs(uq) < 1e-4) {
        S = u * (1.0 + uq * uq / 6.0);
        C = 1.0 + uq * uq / 2.0;
    } else {
        S = std::sinh(uq) / q;
        C = std::cosh(uq);
    }
    return rho * E * (C - (ww / a0c) * S);
}

// ---------------------------------------------------------------------------
// Flat closed forms

cplx SymbolEval::p_flat(const double* z, double zn) {
    const double zz = z[0] * z[0] + z[1] * z[1];
    return cplx(zn * zn + zz - 1.0, -2.0 * zn);
}

cplx SymbolEval::r0_flat(const CutoffSet& cut, const double* z) {
    const double r = std::hypot(z[0], z[1]);
    return (1.0 - cut.rho0(r)) * r;
}

cplx SymbolEval::a_plus_flat(const CutoffSet& cut, const double* z) {
    return cplx(0.0, 1.0) * (1.0 + r0_flat(cut, z));
}

cplx SymbolEval::a_minus_flat(const CutoffSet& cut, const double* z) {
    return cplx(0.0, 1.0) * (1.0 - r0_flat(cut, z));
}

cplx SymbolEval::a0_flat(const CutoffSet& cut, const double* z) {
    const double r = std::hypot(z[0], z[1]);
    const double f = 1.0 - cut.rho0(r);
    return r * r * (1.0 - f * f);
}

// ---------------------------------------------------------------------------
// Certificates

Certificates compute_certificates(const SymbolEval& ev, const std::string& chart_label) {
    const MachineData& md = ev.data();
    const CutoffSet& cut = ev.cutoffs();
    const GridSpec& g = md.grid;
    const std::size_t T = g.tangential_volume();
    const double h = md.h;

    // Per-x' minima are independent, so a deterministic max-reduction over
    // negated minima parallelizes cleanly.
    std::vector<double> zs1(T), zs2(T);
    for (std::size_t i = 0; i < T; ++i) {
        int idx[kMaxDim];
        decode_tangential_index(g, i, idx);
        zs1[i] = h * g.freq(0, idx[0]);
        zs2[i] = h * g.freq(1, idx[1]);
    }

    auto scan = [&](auto&& f) {
        return -chunked_max(T, [&](std::size_t it) {
            double worst = 1e300;
            for (std::size_t iz = 0; iz < T; ++iz) {
                const double z[2] = {zs1[iz], zs2[iz]};
                worst = std::min(worst, f(it, z));
            }
            return -worst;
        });
    };

    Certificates c;
    c.h = h;
    c.chart = chart_label;
    c.eps1 = scan([&](std::size_t it, const double* z) {
        const double r = std::hypot(z[0], z[1]);
        if (cut.rho(r) <= 0.0) return 1e300;
        return md.oneh[it] - std::sqrt(ev.s(it, z)).real();
    });
    c.eps2 = 0.5 * c.eps1;
    c.branch = scan([&](std::size_t it, const double* z) {
        const double r = std::hypot(z[0], z[1]);
        if (cut.rho0(r) >= 1.0) return 1e300;
        return ev.s(it, z).real();
    });
    c.re_z0 = scan([&](std::size_t it, const double* z) {
        return ev.z0(it, z).real();
    });
    double mk = 0.0;
    for (std::size_t i = 0; i < T; ++i) mk = std::max(mk, md.absK2[i]);
    c.max_absK2 = mk;
    c.pass = c.eps1 > 0.0 && c.branch > 0.0 && c.re_z0 > 0.0 &&
             mk / (1.0 + mk) < cut.c;
    return c;
}

void write_certificates_json(const std::string& path, const std::vector<Certificates>& cs) {
    nlohmann::ordered_json root = nlohmann::ordered_json::array();
    for (const Certificates& c : cs) {
        nlohmann::ordered_json e;
        e["chart"] = c.chart;
        e["h"] = c.h;
        e["eps1"] = c.eps1;
        e["eps2"] = c.eps2;
        e["branch"] = c.branch;
        e["re_z0"] = c.re_z0;
        e["max_absK2"] = c.max_absK2;
        e["pass"] = c.pass;
        root.push_back(e);
    }
    std::ofstream out(path);
    if (!out) fail("cannot open " + path + " for writing");
    out << root.dump(2) << "\n";
}

} // namespace cgolab
