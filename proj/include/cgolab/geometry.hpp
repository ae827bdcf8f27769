// Domain geometry: a periodic slab whose lower boundary is a graph built
// from Gaussian-windowed cosine bumps and whose upper boundary is a plane.
// Boundary pieces where data is imposed are organized into charts; each
// chart owns a tangential window, and the operator machinery runs in the
// chart frame where the boundary piece is the plane x_n = 0 and the domain
// lies in x_n > 0.
//
// Chart frame conventions. For a lower-face chart (side = +1) the frame is
// x = (y', y_n - G(y')); for an upper-face chart (side = -1) the normal
// axis is mirrored first (y_n -> -y_n, exact on the grid), after which the
// boundary is again a lower graph with height -G. ChartTables therefore
// stores the EFFECTIVE graph (side * g) and its derivatives; everything
// downstream consumes effective data only. The weight function in the frame
// is phi = x_n + const, so the frame trace operator is the same for both
// faces.
#pragma once

#include <string>
#include <vector>

#include "cgolab/grid.hpp"

namespace cgolab {

struct Bump {
    double amp = 0.0;
    double cx = 0.0, cy = 0.0;   // tangential center
    double sigma = 0.5;          // Gaussian window width
    double kx = 0.0, ky = 0.0;   // cosine wavevector
    double phase = 0.0;
};

struct Chart {
    std::string label;
    int side = +1;                       // +1 lower graph, -1 upper graph
    double center[2] = {0.0, 0.0};       // window center
    double halfwidth[2] = {2.0, 2.0};    // window halfwidths
    double plateau[2] = {1.0, 1.0};      // inner region carrying the data piece
    double offset = 0.0;                 // constant graph height
    std::vector<Bump> bumps;

    bool is_flat() const { return bumps.empty(); }
    // Graph height and derivatives, periodized over the tangential box
    // (3x3 image sum, so the graph is a genuine torus function).
    double g(double x, double y, double box) const;
    void grad_g(double x, double y, double box, double* out2) const;
    double lap_g(double x, double y, double box) const;
};

struct DomainSpec {
    std::string name;
    int npts = 32;
    double box = 8.0;
    double y_top = 1.5;
    double cutoff_c = 0.5;               // elliptic-region threshold parameter
    std::vector<Chart> charts;
    std::vector<int> xi_lower;           // chart indices: data pieces, lower face
    std::vector<int> xi_upper;           // chart indices: data pieces, upper face

    GridSpec grid() const { return GridSpec::cube(3, npts, box); }
    // Height of the lower boundary graph (sum of lower charts).
    double bottom_graph(double x, double y) const;
};

// Per-chart tables over the tangential lattice of a grid. All entries refer
// to the EFFECTIVE graph (side * g), see the header comment.
struct ChartTables {
    GridSpec grid;
    int side = +1;
    std::vector<double> geff;    // effective graph height
    std::vector<double> k1, k2;  // effective slope (tangential gradient)
    std::vector<double> absK2;   // |K|^2
    std::vector<double> lapg;    // effective tangential Laplacian of the graph
    double max_absK2 = 0.0;

    static ChartTables build(const Chart& c, const GridSpec& g, double box);
};

// Frame transport. to_chart_frame flattens a y-frame field into the chart
// frame (mirror for side=-1, then a spectral normal shift); from_chart_frame
// inverts it exactly.
Field to_chart_frame(const Field& u, const ChartTables& t);
Field from_chart_frame(const Field& u, const ChartTables& t);
void mirror_normal(Field& u);

// Masks (real 0/1 tables, full grid size).
// Domain mask in the y frame: g_bot(y') < y_n <= y_top.
std::vector<double> omega_mask_y(const DomainSpec& d);
// Domain mask transported to a chart frame, evaluated exactly per point.
std::vector<double> omega_mask_chart(const DomainSpec& d, int chart_idx);
// Upper half-space indicator x_n >= 0 (the trace plane belongs to it).
std::vector<double> halfspace_mask(const GridSpec& g);
// Tangential indicator of the chart's plateau (the data piece Gamma).
std::vector<double> plateau_mask(const Chart& c, const GridSpec& g);
// Tangential indicator of the full chart window.
std::vector<double> window_mask(const Chart& c, const GridSpec& g);

// eta(x_n) * t(x'): extension of boundary data off the trace plane; eta has
// plateau |x_n| <= 1 and support |x_n| <= 2 (smooth bridge in between).
Field extend_boundary(const BoundaryField& t);
double extension_profile(double xn);

// Distance from every y-grid point to the union of the listed charts' graph
// pieces (sampled over their plateaus at double resolution).
Field dist_to_charts(const DomainSpec& d, const std::vector<int>& chart_indices);

struct DomainReport {
    bool ok = true;
    std::vector<std::string> notes;
};
// Structural checks: grid admissibility, window containment and separation,
// slope condition max|K|^2/(1+|K|^2) < c, top clearance, side consistency.
DomainReport validate_domain(const DomainSpec& d);

double min_chart_separation(const DomainSpec& d);

// Reference domains used by the tests and the acceptance gate.
DomainSpec make_flat_domain(int npts);
DomainSpec make_curved_domain(int npts);
DomainSpec make_two_chart_domain(int npts);

} // namespace cgolab
