#include "cgolab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cgolab/common.hpp"
#include "cgolab/fft.hpp"

namespace cgolab {

// ---------------------------------------------------------------------------
// Bump evaluation. Each bump is a Gaussian-windowed cosine; to make the graph
// a genuine torus function we sum over the 3x3 nearest periodic images. With
// sigma <= 0.6 and box >= 8 the image tails are far below double precision.

namespace {

struct BumpEval {
    double value = 0.0;
    double gx = 0.0, gy = 0.0;
    double lap = 0.0;
};

BumpEval eval_bump_images(const Bump& b, double x, double y, double box) {
    BumpEval r;
    const double s2 = b.sigma * b.sigma;
    for (int mx = -1; mx <= 1; ++mx) {
        for (int my = -1; my <= 1; ++my) {
            const double dx = x - b.cx + mx * box;
            const double dy = y - b.cy + my * box;
            const double rr = dx * dx + dy * dy;
            if (rr > 50.0 * s2) continue;
            const double e = b.amp * std::exp(-0.5 * rr / s2);
            const double th = b.kx * dx + b.ky * dy + b.phase;
            const double c = std::cos(th), s = std::sin(th);
            r.value += e * c;
            r.gx += e * (-(dx / s2) * c - b.kx * s);
            r.gy += e * (-(dy / s2) * c - b.ky * s);
            const double k2 = b.kx * b.kx + b.ky * b.ky;
            const double dk = dx * b.kx + dy * b.ky;
            r.lap += e * ((rr / (s2 * s2) - 2.0 / s2 - k2) * c + 2.0 * (dk / s2) * s);
        }
    }
    return r;
}

// Wrap a tangential offset into [-box/2, box/2).
double wrap_offset(double d, double box) {
    while (d >= 0.5 * box) d -= box;
    while (d < -0.5 * box) d += box;
    return d;
}

} // namespace

double Chart::g(double x, double y, double box) const {
    double v = offset;
    for (const Bump& b : bumps) v += eval_bump_images(b, x, y, box).value;
    return v;
}

void Chart::grad_g(double x, double y, double box, double* out2) const {
    out2[0] = 0.0;
    out2[1] = 0.0;
    for (const Bump& b : bumps) {
        const BumpEval e = eval_bump_images(b, x, y, box);
        out2[0] += e.gx;
        out2[1] += e.gy;
    }
}

double Chart::lap_g(double x, double y, double box) const {
    double v = 0.0;
    for (const Bump& b : bumps) v += eval_bump_images(b, x, y, box).lap;
    return v;
}

double DomainSpec::bottom_graph(double x, double y) const {
    double v = 0.0;
    for (const Chart& c : charts)
        if (c.side > 0) v += c.g(x, y, box);
    return v;
}

// ---------------------------------------------------------------------------
// Chart tables

ChartTables ChartTables::build(const Chart& c, const GridSpec& g, double box) {
    ChartTables t;
    t.grid = g;
    t.side = c.side;
    const std::size_t T = g.tangential_volume();
    t.geff.resize(T);
    t.k1.resize(T);
    t.k2.resize(T);
    t.absK2.resize(T);
    t.lapg.resize(T);
    const double sgn = (c.side > 0) ? 1.0 : -1.0;
    double maxk = 0.0;
    for (std::size_t it = 0; it < T; ++it) {
        int idx[kMaxDim];
        decode_tangential_index(g, it, idx);
        const double x = g.coord(0, idx[0]);
        const double y = g.coord(1, idx[1]);
        double grad[2];
        c.grad_g(x, y, box, grad);
        t.geff[it] = sgn * c.g(x, y, box);
        t.k1[it] = sgn * grad[0];
        t.k2[it] = sgn * grad[1];
        t.absK2[it] = grad[0] * grad[0] + grad[1] * grad[1];
        t.lapg[it] = sgn * c.lap_g(x, y, box);
        maxk = std::max(maxk, t.absK2[it]);
    }
    t.max_absK2 = maxk;
    return t;
}

// ---------------------------------------------------------------------------
// Frame transport

void mirror_normal(Field& u) {
    const GridSpec& g = u.grid;
    const int N = g.normal_pts();
    const std::size_t T = g.tangential_volume();
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (std::ptrdiff_t it = 0; it < (std::ptrdiff_t)T; ++it) {
        cplx* col = u.data.data() + (std::size_t)it * N;
        for (int k = 1; k < N - k; ++k) std::swap(col[k], col[N - k]);
    }
}

namespace {

// Multiply by exp(i xi_n * a(x')) in the normal spectrum: translates each
// tangential column by a(x') along the periodic normal axis.
void shift_normal(Field& u, const std::vector<double>& amount, double sign) {
    const GridSpec& g = u.grid;
    const int N = g.normal_pts();
    const std::size_t T = g.tangential_volume();
    if (amount.size() != T) fail("shift_normal: table size mismatch");
    fft_forward(u, Axes::Normal);
    const int nax = g.dim - 1;
    std::vector<double> xin(N);
    for (int k = 0; k < N; ++k) xin[k] = g.freq(nax, k);
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (std::ptrdiff_t it = 0; it < (std::ptrdiff_t)T; ++it) {
        const double a = sign * amount[it];
        cplx* col = u.data.data() + (std::size_t)it * N;
        for (int k = 0; k < N; ++k)
            col[k] *= std::polar(1.0, xin[k] * a);
    }
    fft_inverse(u, Axes::Normal);
}

} // namespace

Field to_chart_frame(const Field& u, const ChartTables& t) {
    Field v = u;
    if (t.side < 0) mirror_normal(v);
    // x_n = y_n - G  =>  v(x') = u(x' + G): shift content downward by G,
    // i.e. sample at x_n + G, which is the +G phase in the normal spectrum.
    shift_normal(v, t.geff, +1.0);
    return v;
}

Field from_chart_frame(const Field& u, const ChartTables& t) {
    Field v = u;
    shift_normal(v, t.geff, -1.0);
    if (t.side < 0) mirror_normal(v);
    return v;
}

// ---------------------------------------------------------------------------
// Masks

std::vector<double> omega_mask_y(const DomainSpec& d) {
    const GridSpec g = d.grid();
    const int N = g.normal_pts();
    const std::size_t T = g.tangential_volume();
    std::vector<double> m(g.volume(), 0.0);
    for (std::size_t it = 0; it < T; ++it) {
        int idx[kMaxDim];
        decode_tangential_index(g, it, idx);
        const double x = g.coord(0, idx[0]);
        const double y = g.coord(1, idx[1]);
        const double gb = d.bottom_graph(x, y);
        for (int k = 0; k < N; ++k) {
            const double yn = g.coord(2, k);
            if (yn > gb && yn <= d.y_top) m[(std::size_t)it * N + k] = 1.0;
        }
    }
    return m;
}

std::vector<double> omega_mask_chart(const DomainSpec& d, int chart_idx) {
    const GridSpec g = d.grid();
    const Chart& c = d.charts.at(chart_idx);
    const int N = g.normal_pts();
    const std::size_t T = g.tangential_volume();
    std::vector<double> m(g.volume(), 0.0);
    for (std::size_t it = 0; it < T; ++it) {
        int idx[kMaxDim];
        decode_tangential_index(g, it, idx);
        const double x = g.coord(0, idx[0]);
        const double y = g.coord(1, idx[1]);
        const double gc = c.g(x, y, d.box);
        const double gb = d.bottom_graph(x, y);
        for (int k = 0; k < N; ++k) {
            const double xn = g.coord(2, k);
            // Map the chart-frame point back to the y frame.
            double yn;
            if (c.side > 0) {
                yn = xn + gc;
            } else {
                yn = gc - xn;
            }
            // Near the chart's own boundary piece the lower cut is exactly
            // x_n > 0 on the grid; elsewhere the y-frame conditions decide.
            bool inside;
            if (c.side > 0) {
                const bool own_cut = std::abs(gb - gc) < 1e-9;
                const bool above_bottom = own_cut ? (k > N / 2) : (yn > gb);
                inside = above_bottom && (yn <= d.y_top);
            } else {
                // Chart plane is the upper face: x_n > 0 means strictly
                // below it; the bottom graph bounds from the other side.
                const bool below_top = (k > N / 2);
                inside = below_top && (yn > gb);
            }
            if (inside) m[(std::size_t)it * N + k] = 1.0;
        }
    }
    return m;
}

std::vector<double> halfspace_mask(const GridSpec& g) {
    const int N = g.normal_pts();
    const std::size_t T = g.tangential_volume();
    std::vector<double> m(g.volume(), 0.0);
    for (std::size_t it = 0; it < T; ++it)
        for (int k = N / 2; k < N; ++k) m[(std::size_t)it * N + k] = 1.0;
    return m;
}

namespace {

std::vector<double> box_mask_tangential(const Chart& c, const GridSpec& g,
                                        const double* halfw) {
    const std::size_t T = g.tangential_volume();
    std::vector<double> m(T, 0.0);
    for (std::size_t it = 0; it < T; ++it) {
        int idx[kMaxDim];
        decode_tangential_index(g, it, idx);
        const double dx = wrap_offset(g.coord(0, idx[0]) - c.center[0], g.len[0]);
        const double dy = wrap_offset(g.coord(1, idx[1]) - c.center[1], g.len[1]);
        if (std::abs(dx) <= halfw[0] && std::abs(dy) <= halfw[1]) m[it] = 1.0;
    }
    return m;
}

} // namespace

std::vector<double> plateau_mask(const Chart& c, const GridSpec& g) {
    return box_mask_tangential(c, g, c.plateau);
}

std::vector<double> window_mask(const Chart& c, const GridSpec& g) {
    return box_mask_tangential(c, g, c.halfwidth);
}

// ---------------------------------------------------------------------------
// Boundary extension

double extension_profile(double xn) {
    return smooth_step_down(std::abs(xn) - 1.0);
}

Field extend_boundary(const BoundaryField& t) {
    Field out(t.grid);
    const int N = t.grid.normal_pts();
    const std::size_t T = t.grid.tangential_volume();
    std::vector<double> eta(N);
    for (int k = 0; k < N; ++k) eta[k] = extension_profile(t.grid.coord(t.grid.dim - 1, k));
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (std::ptrdiff_t it = 0; it < (std::ptrdiff_t)T; ++it) {
        const cplx tv = t.data[it];
        cplx* col = out.data.data() + (std::size_t)it * N;
        for (int k = 0; k < N; ++k) col[k] = eta[k] * tv;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distances

Field dist_to_charts(const DomainSpec& d, const std::vector<int>& chart_indices) {
    const GridSpec g = d.grid();
    // Sample each chart's plateau graph at double resolution.
    struct P3 { double x, y, z; };
    std::vector<P3> samples;
    for (int ci : chart_indices) {
        const Chart& c = d.charts.at(ci);
        const double step = 0.5 * g.spacing(0);
        const int nx = (int)std::floor(2.0 * c.plateau[0] / step) + 1;
        const int ny = (int)std::floor(2.0 * c.plateau[1] / step) + 1;
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j) {
                const double x = c.center[0] - c.plateau[0] + i * step;
                const double y = c.center[1] - c.plateau[1] + j * step;
                samples.push_back({x, y, c.g(x, y, d.box)});
            }
        }
    }
    if (samples.empty()) fail("dist_to_charts: no charts given");
    Field out(g);
    const int N = g.normal_pts();
    const std::size_t T = g.tangential_volume();
#pragma omp parallel for schedule(static) if (parallel_mode() == ParallelMode::Auto)
    for (std::ptrdiff_t it = 0; it < (std::ptrdiff_t)T; ++it) {
        int idx[kMaxDim];
        decode_tangential_index(g, it, idx);
        const double x = g.coord(0, idx[0]);
        const double y = g.coord(1, idx[1]);
        for (int k = 0; k < N; ++k) {
            const double z = g.coord(2, k);
            double best = 1e300;
            for (const P3& s : samples) {
                const double dx = wrap_offset(x - s.x, g.len[0]);
                const double dy = wrap_offset(y - s.y, g.len[1]);
                const double dz = z - s.z;
                const double rr = dx * dx + dy * dy + dz * dz;
                if (rr < best) best = rr;
            }
            out.data[(std::size_t)it * N + k] = std::sqrt(best);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation and reference domains

double min_chart_separation(const DomainSpec& d) {
    double best = 1e300;
    for (std::size_t a = 0; a < d.charts.size(); ++a) {
        for (std::size_t b = a + 1; b < d.charts.size(); ++b) {
            const Chart& ca = d.charts[a];
            const Chart& cb = d.charts[b];
            if (ca.side != cb.side) continue;
            double sep = 0.0;
            for (int ax = 0; ax < 2; ++ax) {
                const double dc = std::abs(wrap_offset(ca.center[ax] - cb.center[ax], d.box));
                sep = std::max(sep, dc - ca.halfwidth[ax] - cb.halfwidth[ax]);
            }
            best = std::min(best, sep);
        }
    }
    return best;
}

DomainReport validate_domain(const DomainSpec& d) {
    DomainReport rep;
    auto flag = [&rep](const std::string& msg) {
        rep.ok = false;
        rep.notes.push_back(msg);
    };
    try {
        d.grid().validate();
    } catch (const std::exception& e) {
        flag(std::string("grid: ") + e.what());
    }
    if (d.charts.empty()) flag("no charts defined");
    // Sample slope and clearance over a fine tangential lattice.
    const int M = 4 * d.npts;
    double maxk2 = 0.0, maxg = -1e300, ming = 1e300;
    for (int i = 0; i < M; ++i) {
        for (int j = 0; j < M; ++j) {
            const double x = -0.5 * d.box + i * (d.box / M);
            const double y = -0.5 * d.box + j * (d.box / M);
            double grad[2] = {0.0, 0.0}, gsum = 0.0;
            for (const Chart& c : d.charts) {
                if (c.side < 0) continue;
                double gg[2];
                c.grad_g(x, y, d.box, gg);
                grad[0] += gg[0];
                grad[1] += gg[1];
                gsum += c.g(x, y, d.box);
            }
            maxk2 = std::max(maxk2, grad[0] * grad[0] + grad[1] * grad[1]);
            maxg = std::max(maxg, gsum);
            ming = std::min(ming, gsum);
        }
    }
    const double slope_ratio = maxk2 / (1.0 + maxk2);
    if (slope_ratio >= d.cutoff_c) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "slope condition violated: max|K|^2/(1+|K|^2) = %.4f >= c = %.4f",
                      slope_ratio, d.cutoff_c);
        flag(buf);
    } else {
        char buf[160];
        std::snprintf(buf, sizeof buf, "slope margin: max|K|^2 = %.4f, ratio %.4f < c = %.4f",
                      maxk2, slope_ratio, d.cutoff_c);
        rep.notes.push_back(buf);
    }
    if (maxg >= d.y_top - 0.5) flag("bottom graph too close to the top face");
    for (const Chart& c : d.charts) {
        for (int ax = 0; ax < 2; ++ax) {
            if (c.plateau[ax] > c.halfwidth[ax])
                flag("chart '" + c.label + "': plateau exceeds window");
            if (c.halfwidth[ax] > 0.5 * d.box)
                flag("chart '" + c.label + "': window exceeds the periodic box");
        }
        if (c.side < 0 && !c.is_flat())
            rep.notes.push_back("chart '" + c.label + "': curved upper faces are untested");
        if (c.side < 0 && std::abs(c.offset - d.y_top) > 1e-12)
            flag("chart '" + c.label + "': upper chart must sit at the top face");
    }
    if (d.charts.size() > 1) {
        const double sep = min_chart_separation(d);
        if (sep < 1e299) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "minimum window separation: %.4f", sep);
            rep.notes.push_back(buf);
            if (sep < 0.5) flag("chart windows are not separated by at least 0.5");
        } else {
            rep.notes.push_back("minimum window separation: n/a (no same-side pair)");
        }
    }
    auto check_xi = [&](const std::vector<int>& ids, int side, const char* which) {
        for (int i : ids) {
            if (i < 0 || i >= (int)d.charts.size())
                flag(std::string(which) + ": chart index out of range");
            else if (d.charts[i].side != side)
                flag(std::string(which) + ": chart '" + d.charts[i].label + "' has the wrong side");
        }
    };
    check_xi(d.xi_lower, +1, "xi_lower");
    check_xi(d.xi_upper, -1, "xi_upper");
    // The top face must be grid-aligned so the mirrored frame shift is exact.
    const double dz = d.box / d.npts;
    if (std::abs(d.y_top / dz - std::round(d.y_top / dz)) > 1e-12)
        flag("y_top is not a multiple of the grid spacing");
    return rep;
}

namespace {

Chart make_top_chart(double y_top) {
    Chart c;
    c.label = "top";
    c.side = -1;
    c.offset = y_top;
    c.center[0] = c.center[1] = 0.0;
    c.halfwidth[0] = c.halfwidth[1] = 4.0;
    c.plateau[0] = c.plateau[1] = 3.0;
    return c;
}

} // namespace

DomainSpec make_flat_domain(int npts) {
    DomainSpec d;
    d.name = "flat-slab";
    d.npts = npts;
    d.charts.resize(1);
    Chart& c = d.charts[0];
    c.label = "bottom";
    c.side = +1;
    c.center[0] = c.center[1] = 0.0;
    c.halfwidth[0] = c.halfwidth[1] = 1.9;
    c.plateau[0] = c.plateau[1] = 1.4;
    d.charts.push_back(make_top_chart(d.y_top));
    d.xi_lower = {0};
    d.xi_upper = {1};
    return d;
}

DomainSpec make_curved_domain(int npts) {
    DomainSpec d = make_flat_domain(npts);
    d.name = "curved-slab";
    Chart& c = d.charts[0];
    c.bumps = {
        {0.22, -0.5, 0.3, 0.45, 1.1, 0.5, 0.3},
        {-0.18, 0.6, -0.4, 0.40, -0.7, 0.9, 1.1},
        {0.15, 0.1, 0.6, 0.50, 0.3, -1.0, 2.0},
    };
    return d;
}

DomainSpec make_two_chart_domain(int npts) {
    DomainSpec d;
    d.name = "two-chart-slab";
    d.npts = npts;
    d.charts.resize(2);
    Chart& a = d.charts[0];
    a.label = "west";
    a.side = +1;
    a.center[0] = -2.0;
    a.center[1] = 0.0;
    a.halfwidth[0] = a.halfwidth[1] = 1.5;
    a.plateau[0] = a.plateau[1] = 1.0;
    a.bumps = {
        {0.20, -2.2, 0.2, 0.40, 0.9, 0.4, 0.5},
        {-0.14, -1.7, -0.3, 0.35, -0.5, 0.8, 1.4},
    };
    Chart& b = d.charts[1];
    b.label = "east";
    b.side = +1;
    b.center[0] = 2.0;
    b.center[1] = 0.0;
    b.halfwidth[0] = b.halfwidth[1] = 1.5;
    b.plateau[0] = b.plateau[1] = 1.0;
    b.bumps = {
        {0.17, 2.3, -0.2, 0.45, 0.6, -0.7, 2.1},
    };
    d.charts.push_back(make_top_chart(d.y_top));
    d.xi_lower = {0, 1};
    d.xi_upper = {2};
    return d;
}

} // namespace cgolab
