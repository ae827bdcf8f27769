#include "cgolab/norms.hpp"

#include "cgolab/fft.hpp"

namespace cgolab {

double norm_lr(const Field& f, double r) {
    if (r == 0.0) return max_abs(f);
    const double dv = f.grid.cell_volume();
    double s = chunked_sum(f.size(),
                           [&](std::size_t i) { return std::pow(std::abs(f.data[i]), r); });
    return std::pow(s * dv, 1.0 / r);
}

double norm_lr(const BoundaryField& f, double r) {
    if (r == 0.0) return max_abs(f);
    const double da = f.grid.tangential_cell_area();
    double s = chunked_sum(f.size(),
                           [&](std::size_t i) { return std::pow(std::abs(f.data[i]), r); });
    return std::pow(s * da, 1.0 / r);
}

void apply_brackets(Field& f, double k, double l, double h) {
    if (k == 0.0 && l == 0.0) return;
    const int dim = f.grid.dim;
    apply_multiplier(f, Axes::All, [&](const double* xi) {
        double t2 = 0.0;
        for (int a = 0; a + 1 < dim; ++a) t2 += h * xi[a] * h * xi[a];
        double n2 = t2 + h * xi[dim - 1] * h * xi[dim - 1];
        double w = 1.0;
        if (k != 0.0) w *= std::pow(1.0 + t2, 0.5 * k);
        if (l != 0.0) w *= std::pow(1.0 + n2, 0.5 * l);
        return cplx{w, 0.0};
    });
}

double norm_w(const Field& f, double k, double l, double r, double h) {
    Field tmp = f;
    apply_brackets(tmp, k, l, h);
    return norm_lr(tmp, r);
}

double norm_h1(const Field& f, double h) { return norm_w(f, 0.0, 1.0, 2.0, h); }

double norm_hk_weighted(const Field& f, double k, double delta, double h) {
    Field tmp = f;
    apply_brackets(tmp, 0.0, k, h);
    const GridSpec& g = tmp.grid;
    int idx[kMaxDim];
    for (std::size_t i = 0; i < tmp.size(); ++i) {
        decode_index(g, i, idx);
        double x2 = 0.0;
        for (int a = 0; a < g.dim; ++a) {
            double x = g.coord(a, idx[a]);
            x2 += x * x;
        }
        tmp.data[i] *= std::pow(1.0 + x2, 0.5 * delta);
    }
    return norm_lr(tmp, 2.0);
}

} // namespace cgolab
