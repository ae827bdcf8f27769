#include "cgolab/cgo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cgolab/fft.hpp"
#include "cgolab/norms.hpp"
#include "cgolab/operators.hpp"

namespace cgolab {

namespace {

// Cascade cutoff profile: 1 on (-1/4,1/4), 0 outside (-1/2,1/2).
double eta_prof(double s) { return smooth_step_down(4.0 * std::fabs(s) - 1.0); }
double eta_prof_d1(double s) {
    const double sg = (s >= 0.0) ? 1.0 : -1.0;
    return 4.0 * sg * smooth_step_down_d1(4.0 * std::fabs(s) - 1.0);
}
double eta_prof_d2(double s) {
    return 16.0 * smooth_step_down_d2(4.0 * std::fabs(s) - 1.0);
}

double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

// Exponential with the real part clamped so underflow stays graceful and a
// zero amplitude never turns into inf * 0.
cplx safe_exp(double re, double im) {
    if (re < -745.0) re = -745.0;
    if (re > 700.0) fail("cgo: exponent escaped its admissible range");
    return std::exp(cplx{re, im});
}

std::vector<cplx> tangential_derivative(const GridSpec& g,
                                        const std::vector<cplx>& v, int axis) {
    BoundaryField b(g);
    b.data = v;
    apply_multiplier(b, [axis](const double* xi) {
        return cplx{0.0, xi[axis]};
    });
    return b.data;
}

std::vector<cplx> tangential_laplacian(const GridSpec& g,
                                       const std::vector<cplx>& v) {
    BoundaryField b(g);
    b.data = v;
    apply_multiplier(b, [](const double* xi) {
        return cplx{-(xi[0] * xi[0] + xi[1] * xi[1]), 0.0};
    });
    return b.data;
}

double periodic_delta(double x, double c, double box) {
    return std::remainder(x - c, box);
}

double omega_component(const PhaseData& ph, int i) {
    return (i == ph.psi_axis) ? static_cast<double>(ph.sigma) : 0.0;
}

} // namespace

// ---------------------------------------------------------------------------
// Phase frame

void drift_vector(const double* xi3, const double* grad_psi3, double h,
                  double* out3) {
    if (!(h > 0.0)) fail("drift_vector: h must be positive");
    double xi2 = 0.0, gp2 = 0.0;
    for (int i = 0; i < 3; ++i) {
        xi2 += xi3[i] * xi3[i];
        gp2 += grad_psi3[i] * grad_psi3[i];
    }
    if (!(gp2 > 0.0)) fail("drift_vector: grad psi vanishes");
    const double rad = 1.0 - h * h * xi2 / gp2;
    if (!(rad > 0.0)) fail("drift_vector: h|xi| must stay below |grad psi|");
    const double scale = (1.0 - std::sqrt(rad)) / h;
    for (int i = 0; i < 3; ++i) out3[i] = scale * grad_psi3[i];
}

PhaseData make_phase(const GridSpec& g, const PhaseSpec& spec) {
    if (spec.sigma != 1 && spec.sigma != -1) fail("make_phase: sigma must be +1 or -1");
    if (spec.psi_axis != 0 && spec.psi_axis != 1) fail("make_phase: psi_axis must be 0 or 1");
    const int ax = spec.psi_axis;
    // xi must be a tangential lattice frequency orthogonal to the phase axis.
    if (spec.xi[ax] != 0.0)
        fail("make_phase: xi must be orthogonal to the phase direction");
    for (int i = 0; i < 2; ++i) {
        const double bins = spec.xi[i] * g.len[i] / (2.0 * kPi);
        if (std::fabs(bins - std::round(bins)) > 1e-9)
            fail("make_phase: xi is not a lattice frequency");
    }
    const double xi2 = spec.xi[0] * spec.xi[0] + spec.xi[1] * spec.xi[1];
    if (!(spec.h_nominal > 0.0)) fail("make_phase: h must be positive");
    const double inv2 = 1.0 / (spec.h_nominal * spec.h_nominal) - xi2;
    if (!(inv2 > 0.0)) fail("make_phase: h|xi| must stay below 1");

    // Snap h so that T = sqrt(1/h^2 - |xi|^2) is a lattice frequency along
    // the phase axis; then every oscillatory factor of the pair is an exact
    // torus plane wave.
    const double dk = 2.0 * kPi / g.len[ax];
    int m = static_cast<int>(std::llround(std::sqrt(inv2) / dk));
    if (m < 1) m = 1;
    const int nyq = g.npts[ax] / 2 - 1;
    if (m > nyq) m = nyq;
    if (m < 1) fail("make_phase: grid too coarse for the requested phase");

    PhaseData ph;
    ph.sigma = spec.sigma;
    ph.psi_axis = ax;
    ph.tbin = m;
    ph.tfreq = dk * m;
    ph.h = 1.0 / std::sqrt(ph.tfreq * ph.tfreq + xi2);
    ph.mu = 1.0 / ph.h - ph.tfreq;
    ph.xi[0] = spec.xi[0];
    ph.xi[1] = spec.xi[1];
    ph.keff[0] = spec.xi[0];
    ph.keff[1] = spec.xi[1];
    ph.keff[ax] += spec.sigma * ph.tfreq;

    // Residual of grad(Phi).grad(Phi) with Phi = phi + i psi + i h psi_h.
    const double h = ph.h;
    cplx acc{0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
        double gphi = (i == 2) ? static_cast<double>(ph.sigma) : 0.0;
        double gpsi = (i == ax) ? static_cast<double>(ph.sigma) : 0.0;
        double gpsih = 0.0;
        if (i < 2) gpsih = ph.xi[i] - ph.mu * ph.sigma * ((i == ax) ? 1.0 : 0.0);
        const cplx c = cplx{gphi, gpsi + h * gpsih};
        acc += c * c;
    }
    ph.nullity = std::abs(acc);
    return ph;
}

// ---------------------------------------------------------------------------
// ChartCascade

ChartCascade::ChartCascade(const DomainSpec& dom, int chart_idx,
                           const PhaseData& ph, const BorelSpec& bs)
    : chart_idx_(chart_idx), order_(bs.order), bs_(bs), grid_(dom.grid()) {
    if (order_ < 1 || order_ > 8) fail("cascade: order out of range");
    if (!(bs.eps0 > 1.0)) fail("cascade: eps0 must exceed 1");
    if (!(bs.growth >= 1.0)) fail("cascade: cutoff scales must not decrease");
    const Chart& chart = dom.charts.at(static_cast<std::size_t>(chart_idx));
    tab_ = ChartTables::build(chart, grid_, dom.box);

    omega_eff_[ph.psi_axis] = static_cast<double>(ph.sigma);
    xi_[0] = ph.xi[0];
    xi_[1] = ph.xi[1];

    const int levels = order_ + 1;  // tables f_0 .. f_{order+1}
    eps_.resize(static_cast<std::size_t>(levels) + 1);
    for (int j = 0; j <= levels; ++j)
        eps_[static_cast<std::size_t>(j)] = bs.eps0 * std::pow(bs.growth, j);
    // The amplitude support must sit inside every cutoff plateau, so that
    // the assembled series is an exact Taylor polynomial wherever b lives.
    const double min_plateau = 1.0 / (4.0 * eps_.back());
    if (!(bs.b_support < min_plateau))
        fail("cascade: amplitude support wider than the cutoff plateaus");
    if (!(bs.b_plateau < bs.b_support))
        fail("cascade: amplitude plateau must sit inside its support");

    const std::size_t T = grid_.tangential_volume();
    auto zeros = [T]() { return std::vector<cplx>(T, cplx{0.0, 0.0}); };
    const std::size_t nt = static_cast<std::size_t>(levels) + 1;
    tf_.assign(nt, zeros());
    tf1_.assign(nt, zeros());
    tf2_.assign(nt, zeros());
    tflap_.assign(nt, zeros());
    bf_.assign(nt, zeros());
    bf1_.assign(nt, zeros());
    bf2_.assign(nt, zeros());
    bflap_.assign(nt, zeros());

    // Initial data. f_0 carries the non-periodic linear phase, so its
    // derivatives are entered analytically and the value table is never
    // transformed.
    std::vector<cplx> denom(T);
    for (std::size_t it = 0; it < T; ++it) {
        int idx[2];
        decode_tangential_index(grid_, it, idx);
        const double x0 = grid_.coord(0, idx[0]);
        const double x1 = grid_.coord(1, idx[1]);
        const double k1 = tab_.k1[it], k2 = tab_.k2[it];
        const double K2 = tab_.absK2[it];
        const double kw = k1 * omega_eff_[0] + k2 * omega_eff_[1];
        tf_[0][it] = cplx{tab_.geff[it],
                          omega_eff_[0] * x0 + omega_eff_[1] * x1};
        tf1_[0][it] = cplx{k1, omega_eff_[0]};
        tf2_[0][it] = cplx{k2, omega_eff_[1]};
        tflap_[0][it] = cplx{tab_.lapg[it], 0.0};
        tf_[1][it] = cplx{(K2 - 1.0) / (1.0 + K2), 2.0 * kw / (1.0 + K2)};
        denom[it] = 2.0 * cplx{-1.0, kw};
        bf_[0][it] = cplx{1.0, 0.0};
    }
    tf1_[1] = tangential_derivative(grid_, tf_[1], 0);
    tf2_[1] = tangential_derivative(grid_, tf_[1], 1);
    tflap_[1] = tangential_laplacian(grid_, tf_[1]);

    // Eikonal cascade: kill the x_n^w coefficient of grad t . grad t for
    // w = 1..order. The level-w sum is evaluated with the unknown set to
    // zero; its linear coefficient is 2 D / w! with D = f_1(1+|K|^2) -
    // K . grad f_0 = -1 + i K.omega (never small).
    for (int w = 1; w <= order_; ++w) {
        const double wfact = factorial(w);
        std::vector<cplx>& out = tf_[static_cast<std::size_t>(w) + 1];
        for (std::size_t it = 0; it < T; ++it) {
            const double k1 = tab_.k1[it], k2 = tab_.k2[it];
            cplx R{0.0, 0.0};
            for (int j = 0; j <= w; ++j) {
                const int k = w - j;
                const double c = 1.0 / (factorial(j) * factorial(k));
                const cplx u1j = tf1_[j][it] - k1 * tf_[j + 1][it];
                const cplx u2j = tf2_[j][it] - k2 * tf_[j + 1][it];
                const cplx u1k = tf1_[k][it] - k1 * tf_[k + 1][it];
                const cplx u2k = tf2_[k][it] - k2 * tf_[k + 1][it];
                R += c * (u1j * u1k + u2j * u2k + tf_[j + 1][it] * tf_[k + 1][it]);
            }
            out[it] = -R * wfact / denom[it];
        }
        tf1_[static_cast<std::size_t>(w) + 1] = tangential_derivative(grid_, out, 0);
        tf2_[static_cast<std::size_t>(w) + 1] = tangential_derivative(grid_, out, 1);
        tflap_[static_cast<std::size_t>(w) + 1] = tangential_laplacian(grid_, out);
    }

    // Transport cascade for b against the assembled t: the second normal
    // derivative of t beyond the stored coefficients is zero by
    // construction, so the W_k bracket zero-extends the tables.
    auto tf_ext = [this](int j, std::size_t it) -> cplx {
        if (j > order_ + 1) return cplx{0.0, 0.0};
        return tf_[static_cast<std::size_t>(j)][it];
    };
    for (int w = 0; w <= order_; ++w) {
        const double wfact = factorial(w);
        std::vector<cplx>& out = bf_[static_cast<std::size_t>(w) + 1];
        for (std::size_t it = 0; it < T; ++it) {
            const double k1 = tab_.k1[it], k2 = tab_.k2[it];
            const double K2 = tab_.absK2[it];
            cplx S{0.0, 0.0};
            for (int j = 0; j <= w; ++j) {
                const int k = w - j;
                const double c = 1.0 / (factorial(j) * factorial(k));
                const cplx u1k = tf1_[k][it] - k1 * tf_[k + 1][it];
                const cplx u2k = tf2_[k][it] - k2 * tf_[k + 1][it];
                const cplx Wk = tflap_[k][it] + (1.0 + K2) * tf_ext(k + 2, it)
                              - 2.0 * (k1 * tf1_[k + 1][it] + k2 * tf2_[k + 1][it])
                              - tab_.lapg[it] * tf_[k + 1][it];
                const cplx Xk = xi_[0] * u1k + xi_[1] * u2k;
                const cplx g1j = bf1_[j][it] - k1 * bf_[j + 1][it];
                const cplx g2j = bf2_[j][it] - k2 * bf_[j + 1][it];
                S += c * (bf_[j][it] * (Wk + cplx{0.0, 2.0} * Xk)
                          + 2.0 * (g1j * u1k + g2j * u2k)
                          + 2.0 * bf_[j + 1][it] * tf_[k + 1][it]);
            }
            out[it] = -S * wfact / denom[it];
        }
        bf1_[static_cast<std::size_t>(w) + 1] = tangential_derivative(grid_, out, 0);
        bf2_[static_cast<std::size_t>(w) + 1] = tangential_derivative(grid_, out, 1);
        bflap_[static_cast<std::size_t>(w) + 1] = tangential_laplacian(grid_, out);
    }

    // Smooth tangential window of the chart and its derivatives, entered
    // analytically (the profile is too sharp near the rim to differentiate
    // on the lattice).
    const std::size_t Tn = T;
    wprof_.assign(Tn, 0.0);
    wprof_d1_.assign(Tn, 0.0);
    wprof_d2_.assign(Tn, 0.0);
    wprof_lap_.assign(Tn, 0.0);
    for (std::size_t it = 0; it < Tn; ++it) {
        int idx[2];
        decode_tangential_index(grid_, it, idx);
        double s[2], ds[2], v[2], dv[2], ddv[2];
        for (int axv = 0; axv < 2; ++axv) {
            const double x = grid_.coord(axv, idx[axv]);
            const double dl = periodic_delta(x, chart.center[axv], dom.box);
            const double width = chart.halfwidth[axv] - chart.plateau[axv];
            s[axv] = (std::fabs(dl) - chart.plateau[axv]) / width;
            ds[axv] = ((dl >= 0.0) ? 1.0 : -1.0) / width;
            v[axv] = smooth_step_down(s[axv]);
            dv[axv] = smooth_step_down_d1(s[axv]) * ds[axv];
            ddv[axv] = smooth_step_down_d2(s[axv]) * ds[axv] * ds[axv];
        }
        wprof_[it] = v[0] * v[1];
        wprof_d1_[it] = dv[0] * v[1];
        wprof_d2_[it] = v[0] * dv[1];
        wprof_lap_[it] = ddv[0] * v[1] + v[0] * ddv[1];
    }
}

const std::vector<cplx>& ChartCascade::t_coeff(int j) const {
    return tf_.at(static_cast<std::size_t>(j));
}
const std::vector<cplx>& ChartCascade::b_coeff(int j) const {
    return bf_.at(static_cast<std::size_t>(j));
}

ChartCascade::Jet ChartCascade::eval(std::size_t it, double xn) const {
    Jet out;
    const int levels = order_ + 1;
    for (int j = 0; j <= levels; ++j) {
        const double eps = eps_[static_cast<std::size_t>(j)];
        const double e0 = eta_prof(xn * eps);
        const double e1 = eps * eta_prof_d1(xn * eps);
        const double e2 = eps * eps * eta_prof_d2(xn * eps);
        const double jf = factorial(j);
        const double p0 = std::pow(xn, j) / jf;
        const double p1 = (j >= 1) ? std::pow(xn, j - 1) / factorial(j - 1) : 0.0;
        const double p2 = (j >= 2) ? std::pow(xn, j - 2) / factorial(j - 2) : 0.0;
        const double ev = e0 * p0;
        const double ed = e1 * p0 + e0 * p1;
        const double edd = e2 * p0 + 2.0 * e1 * p1 + e0 * p2;
        const std::size_t ju = static_cast<std::size_t>(j);
        out.t += ev * tf_[ju][it];
        out.tn += ed * tf_[ju][it];
        out.tnn += edd * tf_[ju][it];
        out.t1 += ev * tf1_[ju][it];
        out.t2 += ev * tf2_[ju][it];
        out.t1n += ed * tf1_[ju][it];
        out.t2n += ed * tf2_[ju][it];
        out.tlap += ev * tflap_[ju][it];
        out.b += ev * bf_[ju][it];
        out.bn += ed * bf_[ju][it];
        out.bnn += edd * bf_[ju][it];
        out.b1 += ev * bf1_[ju][it];
        out.b2 += ev * bf2_[ju][it];
        out.b1n += ed * bf1_[ju][it];
        out.b2n += ed * bf2_[ju][it];
        out.blap += ev * bflap_[ju][it];
    }
    return out;
}

double ChartCascade::bcut(double xn) const {
    return smooth_step_down((std::fabs(xn) - bs_.b_plateau)
                            / (bs_.b_support - bs_.b_plateau));
}
double ChartCascade::bcut_d1(double xn) const {
    const double w = bs_.b_support - bs_.b_plateau;
    const double sg = (xn >= 0.0) ? 1.0 : -1.0;
    return smooth_step_down_d1((std::fabs(xn) - bs_.b_plateau) / w) * sg / w;
}
double ChartCascade::bcut_d2(double xn) const {
    const double w = bs_.b_support - bs_.b_plateau;
    return smooth_step_down_d2((std::fabs(xn) - bs_.b_plateau) / w) / (w * w);
}

cplx ChartCascade::eikonal(const Jet& j, std::size_t it) const {
    const double k1 = tab_.k1[it], k2 = tab_.k2[it];
    const cplx u1 = j.t1 - k1 * j.tn;
    const cplx u2 = j.t2 - k2 * j.tn;
    return u1 * u1 + u2 * u2 + j.tn * j.tn;
}

cplx ChartCascade::laplacian_t(const Jet& j, std::size_t it) const {
    const double k1 = tab_.k1[it], k2 = tab_.k2[it];
    return j.tlap + (1.0 + tab_.absK2[it]) * j.tnn
         - 2.0 * (k1 * j.t1n + k2 * j.t2n) - tab_.lapg[it] * j.tn;
}

cplx ChartCascade::transport(const Jet& j, std::size_t it) const {
    const double k1 = tab_.k1[it], k2 = tab_.k2[it];
    const cplx u1 = j.t1 - k1 * j.tn;
    const cplx u2 = j.t2 - k2 * j.tn;
    const cplx g1 = j.b1 - k1 * j.bn;
    const cplx g2 = j.b2 - k2 * j.bn;
    const cplx lap = laplacian_t(j, it);
    return j.b * (lap + cplx{0.0, 2.0} * (xi_[0] * u1 + xi_[1] * u2))
         + 2.0 * (g1 * u1 + g2 * u2 + j.bn * j.tn);
}

// ---------------------------------------------------------------------------
// CgoBuilder

CgoBuilder::CgoBuilder(const DomainSpec& dom, const PhaseSpec& ps,
                       const BorelSpec& bs)
    : dom_(dom), bs_(bs) {
    phase_ = make_phase(dom.grid(), ps);
    charts_ = (phase_.sigma > 0) ? dom.xi_lower : dom.xi_upper;
    if (charts_.empty()) fail("cgo: no data charts on the selected face");
    for (int ci : charts_)
        cascades_.push_back(std::make_unique<ChartCascade>(dom, ci, phase_, bs));
}

int CgoBuilder::chart_index(std::size_t j) const {
    return charts_.at(j);
}

namespace {

struct FullBJet {
    cplx B, Bn, Bnn, B1, B2, B1n, B2n, Blap;
};

// Amplitude jet including the normal cutoff and the tangential window.
FullBJet full_b_jet(const ChartCascade& cc, const ChartCascade::Jet& j,
                    std::size_t it, double xn) {
    const double C = cc.bcut(xn);
    const double C1 = cc.bcut_d1(xn);
    const double C2 = cc.bcut_d2(xn);
    const double W = cc.window_profile()[it];
    const double W1 = cc.window_profile_d(0)[it];
    const double W2 = cc.window_profile_d(1)[it];
    const double Wl = cc.window_profile_lap()[it];
    FullBJet o;
    o.B = j.b * C * W;
    o.Bn = j.bn * C * W + j.b * C1 * W;
    o.Bnn = j.bnn * C * W + 2.0 * j.bn * C1 * W + j.b * C2 * W;
    o.B1 = j.b1 * C * W + j.b * C * W1;
    o.B2 = j.b2 * C * W + j.b * C * W2;
    o.B1n = j.b1n * C * W + j.b1 * C1 * W + j.bn * C * W1 + j.b * C1 * W1;
    o.B2n = j.b2n * C * W + j.b2 * C1 * W + j.bn * C * W2 + j.b * C1 * W2;
    o.Blap = j.blap * C * W + 2.0 * C * (j.b1 * W1 + j.b2 * W2) + j.b * C * Wl;
    return o;
}

} // namespace

CgoFields CgoBuilder::assemble() const {
    const GridSpec g = dom_.grid();
    const int nn = g.npts[2];
    const std::size_t T = g.tangential_volume();
    const double h = phase_.h;
    const double sig = static_cast<double>(phase_.sigma);
    const double xih0 = phase_.xi[0] - phase_.mu * omega_component(phase_, 0);
    const double xih1 = phase_.xi[1] - phase_.mu * omega_component(phase_, 1);

    CgoFields out{phase_, Field(g), Field(g), Field(g), {}, 0.0, 0.0, 0.0, 0.0};

    // Lattice wave carrying the full oscillation of the conjugated pair.
    for (std::size_t it = 0; it < T; ++it) {
        int idx[2];
        decode_tangential_index(g, it, idx);
        const double x0 = g.coord(0, idx[0]);
        const double x1 = g.coord(1, idx[1]);
        const cplx ev = std::exp(cplx{0.0, phase_.keff[0] * x0 + phase_.keff[1] * x1});
        for (int k = 0; k < nn; ++k)
            out.Ewave.data[it * static_cast<std::size_t>(nn)
                           + static_cast<std::size_t>(k)] = ev;
    }

    double trace_defect = 0.0;
    for (std::size_t jc = 0; jc < cascades_.size(); ++jc) {
        const ChartCascade& cc = *cascades_[jc];
        const ChartTables& tab = cc.tables();
        const Chart& chart = dom_.charts.at(static_cast<std::size_t>(charts_[jc]));
        const std::vector<double> pm = plateau_mask(chart, g);

        BoundaryField fb(g);
        for (std::size_t it = 0; it < T; ++it) {
            const double W = cc.window_profile()[it];
            const double W1 = cc.window_profile_d(0)[it];
            const double W2 = cc.window_profile_d(1)[it];
            const bool dead = (W == 0.0 && W1 == 0.0 && W2 == 0.0
                               && cc.window_profile_lap()[it] == 0.0);
            int idx[2];
            decode_tangential_index(g, it, idx);
            const double x0 = g.coord(0, idx[0]);
            const double x1 = g.coord(1, idx[1]);
            const double geff = tab.geff[it];
            const double k1 = tab.k1[it], k2 = tab.k2[it];
            const double K2 = tab.absK2[it];
            const double psi_t = omega_component(phase_, 0) * x0
                               + omega_component(phase_, 1) * x1;

            if (!dead) {
                for (int k = 0; k < nn; ++k) {
                    const double yn = g.coord(2, k);
                    const double xn = sig * yn - geff;
                    if (std::fabs(xn) >= bs_.b_support) continue;
                    const ChartCascade::Jet jet = cc.eval(it, xn);
                    const double phi = xn + geff;
                    const std::size_t vi = it * static_cast<std::size_t>(nn)
                                         + static_cast<std::size_t>(k);
                    // profile a_h = e^{(t - phi - i psi)/h} b
                    {
                        const double re = (jet.t.real() - phi) / h;
                        const double im = (jet.t.imag() - psi_t) / h;
                        const cplx amp = jet.b * cc.bcut(xn) * W;
                        if (amp != cplx{0.0, 0.0})
                            out.a_h.data[vi] += safe_exp(re, im) * amp;
                    }
                    // defect L = e^{(t - phi)/h + i psi_h} * bracket
                    {
                        const FullBJet B = full_b_jet(cc, jet, it, xn);
                        const cplx G1 = jet.t1 + cplx{0.0, h * xih0};
                        const cplx G2 = jet.t2 + cplx{0.0, h * xih1};
                        const cplx Gn = jet.tn;
                        const cplx p1 = G1 - k1 * Gn;
                        const cplx p2 = G2 - k2 * Gn;
                        const cplx q1 = B.B1 - k1 * B.Bn;
                        const cplx q2 = B.B2 - k2 * B.Bn;
                        const cplx gradGG = p1 * p1 + p2 * p2 + Gn * Gn;
                        const cplx lapG = cc.laplacian_t(jet, it);
                        const cplx gradGB = p1 * q1 + p2 * q2 + Gn * B.Bn;
                        const cplx lapB = B.Blap + (1.0 + K2) * B.Bnn
                                        - 2.0 * (k1 * B.B1n + k2 * B.B2n)
                                        - tab.lapg[it] * B.Bn;
                        const cplx bracket = gradGG * B.B + h * lapG * B.B
                                           + 2.0 * h * gradGB + h * h * lapB;
                        if (bracket != cplx{0.0, 0.0}) {
                            const double re = (jet.t.real() - phi) / h;
                            const double im = jet.t.imag() / h + xih0 * x0 + xih1 * x1;
                            out.L.data[vi] += safe_exp(re, im) * bracket;
                        }
                    }
                }
            }

            // Boundary datum on the data piece: the trace values of a_h are
            // exactly 1 there, so only the drift and amplitude slopes
            // survive. Off the plateau the datum is masked by the chart
            // solve, so it is set to zero outright.
            if (pm[it] != 0.0) {
                const cplx ev = std::exp(cplx{0.0, phase_.keff[0] * x0
                                                  + phase_.keff[1] * x1});
                const double root = std::sqrt(1.0 + K2);
                const cplx b1v = cc.b_coeff(1)[it];
                const cplx bracket = cplx{0.0, 2.0 * (k1 * xih0 + k2 * xih1)}
                                   - (1.0 + K2) * b1v;
                fb.data[it] = ev * h * bracket / root;

                const ChartCascade::Jet jet0 = cc.eval(it, 0.0);
                const double re = (jet0.t.real() - geff) / h;
                const double im = (jet0.t.imag() - psi_t) / h;
                const cplx aval = safe_exp(re, im) * jet0.b * cc.bcut(0.0) * W;
                trace_defect = std::max(trace_defect, std::abs(aval - 1.0));
            }
        }
        out.f.push_back(std::move(fb));
    }

    const std::vector<double> om = omega_mask_y(dom_);
    out.trace_defect = trace_defect;
    out.max_abs_a = chunked_max(out.a_h.size(), [&](std::size_t i) {
        return std::abs(out.a_h.data[i]) * om[i];
    });
    out.L_linf = chunked_max(out.L.size(), [&](std::size_t i) {
        return std::abs(out.L.data[i]) * om[i];
    });
    double f2 = 0.0;
    for (const BoundaryField& fb : out.f) {
        const double n = norm_lr(fb, 2.0);
        f2 += n * n;
    }
    out.f_l2 = std::sqrt(f2);
    return out;
}

double CgoBuilder::eikonal_sup(std::size_t j, double delta) const {
    const ChartCascade& cc = *cascades_[j];
    const GridSpec g = dom_.grid();
    const Chart& chart = dom_.charts.at(static_cast<std::size_t>(charts_[j]));
    const std::vector<double> pm = plateau_mask(chart, g);
    const std::size_t T = g.tangential_volume();
    double sup = 0.0;
    const int nsamp = 48;
    for (std::size_t it = 0; it < T; ++it) {
        if (pm[it] == 0.0) continue;
        for (int s = -nsamp; s <= nsamp; ++s) {
            const double xn = delta * s / nsamp;
            const ChartCascade::Jet jet = cc.eval(it, xn);
            sup = std::max(sup, std::abs(cc.eikonal(jet, it)));
        }
    }
    return sup;
}

double CgoBuilder::transport_sup(std::size_t j, double delta) const {
    const ChartCascade& cc = *cascades_[j];
    const GridSpec g = dom_.grid();
    const Chart& chart = dom_.charts.at(static_cast<std::size_t>(charts_[j]));
    const std::vector<double> pm = plateau_mask(chart, g);
    const std::size_t T = g.tangential_volume();
    double sup = 0.0;
    const int nsamp = 48;
    for (std::size_t it = 0; it < T; ++it) {
        if (pm[it] == 0.0) continue;
        for (int s = -nsamp; s <= nsamp; ++s) {
            const double xn = delta * s / nsamp;
            const ChartCascade::Jet jet = cc.eval(it, xn);
            sup = std::max(sup, std::abs(cc.transport(jet, it)));
        }
    }
    return sup;
}

double CgoBuilder::conjugated_defect_sup(std::size_t j, double delta,
                                         double h) const {
    const ChartCascade& cc = *cascades_[j];
    const GridSpec g = dom_.grid();
    const Chart& chart = dom_.charts.at(static_cast<std::size_t>(charts_[j]));
    const std::vector<double> pm = plateau_mask(chart, g);
    const std::size_t T = g.tangential_volume();
    const double xih0 = phase_.xi[0] - phase_.mu * omega_component(phase_, 0);
    const double xih1 = phase_.xi[1] - phase_.mu * omega_component(phase_, 1);
    double sup = 0.0;
    const int nsamp = 48;
    for (std::size_t it = 0; it < T; ++it) {
        if (pm[it] == 0.0) continue;
        const double k1 = cc.tables().k1[it], k2 = cc.tables().k2[it];
        const double K2 = cc.tables().absK2[it];
        for (int s = -nsamp; s <= nsamp; ++s) {
            const double xn = delta * s / nsamp;
            const ChartCascade::Jet jet = cc.eval(it, xn);
            const cplx G1 = jet.t1 + cplx{0.0, h * xih0};
            const cplx G2 = jet.t2 + cplx{0.0, h * xih1};
            const cplx Gn = jet.tn;
            const cplx p1 = G1 - k1 * Gn;
            const cplx p2 = G2 - k2 * Gn;
            const cplx g1 = jet.b1 - k1 * jet.bn;
            const cplx g2 = jet.b2 - k2 * jet.bn;
            const cplx gradGG = p1 * p1 + p2 * p2 + Gn * Gn;
            const cplx lapG = cc.laplacian_t(jet, it);
            const cplx gradGB = p1 * g1 + p2 * g2 + Gn * jet.bn;
            const cplx lapB = jet.blap + (1.0 + K2) * jet.bnn
                            - 2.0 * (k1 * jet.b1n + k2 * jet.b2n)
                            - cc.tables().lapg[it] * jet.bn;
            const cplx bracket = gradGG * jet.b + h * lapG * jet.b
                               + 2.0 * h * gradGB + h * h * lapB;
            sup = std::max(sup, std::abs(bracket));
        }
    }
    return sup;
}

double CgoBuilder::decay_rate_bound(std::size_t j, double delta) const {
    const ChartCascade& cc = *cascades_[j];
    const GridSpec g = dom_.grid();
    const Chart& chart = dom_.charts.at(static_cast<std::size_t>(charts_[j]));
    const std::vector<double> pm = plateau_mask(chart, g);
    const std::size_t T = g.tangential_volume();
    double worst = -1e300;
    const int nsamp = 48;
    for (std::size_t it = 0; it < T; ++it) {
        if (pm[it] == 0.0) continue;
        const double geff = cc.tables().geff[it];
        for (int s = 1; s <= nsamp; ++s) {
            const double xn = delta * s / nsamp;
            const ChartCascade::Jet jet = cc.eval(it, xn);
            worst = std::max(worst, (jet.t.real() - (xn + geff)) / xn);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Remainder fixed point

namespace {

double masked_lr(const Field& f, const std::vector<double>& mask, double r) {
    Field tmp = f;
    for (std::size_t i = 0; i < tmp.size(); ++i) tmp.data[i] *= mask[i];
    return norm_lr(tmp, r);
}

} // namespace

RemainderResult solve_remainder(const XiGreen& green, const CgoFields& cgo,
                                const Field& q, const RemainderConfig& rc) {
    const GridSpec& g = q.grid;
    if (!(g == green.grid())) fail("solve_remainder: grid mismatch");
    if (cgo.f.size() != green.num_charts())
        fail("solve_remainder: boundary datum count mismatch");
    const double h = cgo.phase.h;
    const double h2 = h * h;
    const std::vector<double>& om = green.omega();
    const std::size_t n = q.size();

    // sqrt|q| and the unimodular factor with e^{i theta} |q| = q.
    std::vector<double> sq(n);
    std::vector<cplx> eith(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double aq = std::abs(q.data[i]) * om[i];
        sq[i] = std::sqrt(aq);
        eith[i] = (aq < 1e-14) ? cplx{1.0, 0.0} : q.data[i] * om[i] / aq;
    }

    RemainderResult res{Field(g), Field(g), 0, false, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};

    // Diagnostic split of sqrt|q|: smallest threshold whose overshoot has
    // L^{3/2} norm at most eps_split (bisection; the norm is monotone).
    {
        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, sq[i]);
        const double vol = g.cell_volume();
        auto sharp_norm = [&](double M) {
            const double s = chunked_sum(n, [&](std::size_t i) {
                const double e = std::max(sq[i] - M, 0.0);
                return std::pow(e, 1.5) * vol;
            });
            return std::pow(s, 2.0 / 3.0);
        };
        if (sharp_norm(0.0) <= rc.eps_split) {
            res.split_level = 0.0;
        } else {
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (sharp_norm(mid) <= rc.eps_split) hi = mid; else lo = mid;
            }
            res.split_level = hi;
        }
        res.sharp_norm = sharp_norm(res.split_level);
    }

    // rhs = h^2 e^{i theta} sqrt|q| (a - G(L_g, f)) with a = -E(1+a_h) and
    // L_g = -L; the boundary datum enters only through this one solve.
    Field Lg = cgo.L;
    scale(Lg, cplx{-1.0, 0.0});
    const Field Gf = green.apply(Lg, cgo.f);
    Field rhs(g);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx a = -(cgo.Ewave.data[i] * (1.0 + cgo.a_h.data[i]));
        rhs.data[i] = h2 * eith[i] * sq[i] * (a - Gf.data[i]);
    }

    // Neumann iteration for (1 + K) w = rhs, K = h^2 e^{i theta} sqrt|q|
    // G(sqrt|q| . , 0). The measured step ratio estimates the contraction
    // factor; a persistently expanding iteration aborts.
    Field w = rhs;
    double prev_step = 0.0;
    for (int it = 1; it <= rc.maxit; ++it) {
        Field tmp(g);
        for (std::size_t i = 0; i < n; ++i) tmp.data[i] = sq[i] * w.data[i];
        const Field gv = green.apply(tmp);
        Field wn(g);
        for (std::size_t i = 0; i < n; ++i)
            wn.data[i] = rhs.data[i] - h2 * eith[i] * sq[i] * gv.data[i];
        Field diff = wn;
        axpy(diff, cplx{-1.0, 0.0}, w);
        const double step = norm2(diff);
        const double wnorm = norm2(wn);
        res.iterations = it;
        if (prev_step > 0.0) {
            const double ratio = step / prev_step;
            res.contraction = std::max(res.contraction, ratio);
            if (ratio >= 1.0 && step > rc.tol * wnorm) {
                char buf[160];
                std::snprintf(buf, sizeof buf,
                              "solve_remainder: iteration expanding "
                              "(measured factor %.3f at step %d)", ratio, it);
                fail(buf);
            }
        }
        w = wn;
        prev_step = step;
        if (rc.verbose)
            std::fprintf(stderr, "  [remainder] it=%d step=%.3e\n", it, step);
        if (step <= rc.tol * std::max(wnorm, 1e-300)) {
            res.converged = true;
            break;
        }
    }

    Field datum(g);
    for (std::size_t i = 0; i < n; ++i)
        datum.data[i] = sq[i] * w.data[i] + Lg.data[i];
    res.r0 = green.apply(datum, cgo.f);
    res.w = std::move(w);
    res.w_l2 = norm_lr(res.w, 2.0);
    res.r_l2 = masked_lr(res.r0, om, 2.0);
    res.r_lp = masked_lr(res.r0, om, 6.0);
    return res;
}

// ---------------------------------------------------------------------------
// Full assembly

CgoSolution build_cgo(const XiGreen& green, const CgoBuilder& builder,
                      const Field& q, const RemainderConfig& rc,
                      std::uint64_t test_seed) {
    if (green.sigma() != builder.phase().sigma)
        fail("build_cgo: orientation mismatch between Green solver and builder");
    if (std::fabs(green.h() - builder.phase().h) > 1e-12 * builder.phase().h)
        fail("build_cgo: h mismatch between Green solver and builder");

    CgoSolution sol{builder.assemble(), {}, {}};
    sol.rem = solve_remainder(green, sol.fields, q, rc);

    CgoReport& rep = sol.report;
    rep.trace_defect = sol.fields.trace_defect;
    rep.max_abs_a = sol.fields.max_abs_a;
    rep.f_l2 = sol.fields.f_l2;
    rep.L_linf = sol.fields.L_linf;
    rep.w_l2 = sol.rem.w_l2;
    rep.r_l2 = sol.rem.r_l2;
    rep.r_lp = sol.rem.r_lp;
    rep.contraction = sol.rem.contraction;
    rep.iterations = sol.rem.iterations;

    const GridSpec& g = q.grid;
    const double h = builder.phase().h;
    const double h2 = h * h;
    const std::vector<double>& om = green.omega();
    const std::size_t n = q.size();

    // Conjugated PDE residual: L + h^2 q E (1 + a_h) + (h^2 Dphi + h^2 q) r0
    // should vanish on the domain up to the Green solve defects.
    Field conj = sol.rem.r0;
    apply_conjugated_y(conj, h, green.sigma());
    Field rho(g);
    Field scaleref(g);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx data = sol.fields.L.data[i]
                        + h2 * q.data[i] * sol.fields.Ewave.data[i]
                              * (1.0 + sol.fields.a_h.data[i]);
        rho.data[i] = (data + conj.data[i] + h2 * q.data[i] * sol.rem.r0.data[i])
                    * om[i];
        scaleref.data[i] = data * om[i];
    }
    const double scale = std::max(norm_lr(scaleref, 2.0), 1e-300);

    // Battery of smooth interior probes.
    SplitMix64 rng(test_seed);
    const double vol = g.cell_volume();
    double worst = 0.0;
    for (int p = 0; p < 6; ++p) {
        const double cx = -2.5 + 5.0 * rng.uniform53();
        const double cy = -2.5 + 5.0 * rng.uniform53();
        const double cz = 0.3 + 0.8 * rng.uniform53();
        Field probe(g);
        for (std::size_t i = 0; i < n; ++i) {
            int idx[3];
            decode_index(g, i, idx);
            const double dx = g.coord(0, idx[0]) - cx;
            const double dy = g.coord(1, idx[1]) - cy;
            const double dz = g.coord(2, idx[2]) - cz;
            probe.data[i] = std::exp(-(dx * dx + dy * dy + dz * dz) / 0.5);
        }
        const cplx pair = chunked_csum(n, [&](std::size_t i) {
            return rho.data[i] * std::conj(probe.data[i]) * vol;
        });
        const double pnorm = norm_lr(probe, 2.0);
        worst = std::max(worst, std::abs(pair) / (pnorm * scale));
    }
    rep.weak_pde_rel = worst;

    // Weighted-trace defect of the whole conjugated solution on the data
    // plateaus, relative to the datum scale.
    double bworst = 0.0;
    Field total(g);
    for (std::size_t i = 0; i < n; ++i)
        total.data[i] = sol.fields.Ewave.data[i] * (1.0 + sol.fields.a_h.data[i])
                      + sol.rem.r0.data[i];
    for (std::size_t j = 0; j < green.num_charts(); ++j) {
        const ChartGreen& cgj = green.chart_green(j);
        const Field uc = to_chart_frame(total, cgj.ops().tables());
        BoundaryField tr = cgj.ops().tau_b(uc);
        const std::vector<double>& pl = cgj.plateau_tangential();
        double dnum = 0.0, dden = 0.0;
        for (std::size_t it = 0; it < tr.size(); ++it) {
            dnum += std::norm(tr.data[it] * pl[it]) ;
            dden += std::norm(sol.fields.f[j].data[it] * pl[it]);
        }
        bworst = std::max(bworst, std::sqrt(dnum) / std::max(std::sqrt(dden), 1e-300));
    }
    rep.bdry_defect = bworst;
    return sol;
}

} // namespace cgolab
