// Chart-frame operator machinery: the conjugated operator M, its first-order
// factorization, the causal inverse of the outgoing factor, free-field
// resolvents, the boundary pivot, the Poisson term, and the one-sided
// parametrix assembled from them. A small deterministic GMRES drives every
// iterative solve.
#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cgolab/fft.hpp"
#include "cgolab/geometry.hpp"
#include "cgolab/grid.hpp"
#include "cgolab/quantize.hpp"
#include "cgolab/symbols.hpp"

namespace cgolab {

// ---------------------------------------------------------------------------
// GMRES over any vector type providing the kv_* operations below. The solver
// is plain Arnoldi with modified Gram-Schmidt and Givens updates, no
// restarts; bases are short here (tens of vectors).

inline cplx kv_dot(const Field& a, const Field& b) { return dot(a, b); }
inline double kv_norm(const Field& a) { return norm2(a); }
inline void kv_axpy(Field& y, cplx s, const Field& x) { axpy(y, s, x); }
inline void kv_scale(Field& y, cplx s) { scale(y, s); }

inline cplx kv_dot(const BoundaryField& a, const BoundaryField& b) { return dot(a, b); }
inline double kv_norm(const BoundaryField& a) { return norm2(a); }
inline void kv_axpy(BoundaryField& y, cplx s, const BoundaryField& x) { axpy(y, s, x); }
inline void kv_scale(BoundaryField& y, cplx s) { scale(y, s); }

// Volume-plus-boundary unknown for the chart Green solve.
struct PairVec {
    Field vol;
    BoundaryField bdy;
};

inline cplx kv_dot(const PairVec& a, const PairVec& b) {
    return dot(a.vol, b.vol) + dot(a.bdy, b.bdy);
}
inline double kv_norm(const PairVec& a) {
    return std::hypot(norm2(a.vol), norm2(a.bdy));
}
inline void kv_axpy(PairVec& y, cplx s, const PairVec& x) {
    axpy(y.vol, s, x.vol);
    axpy(y.bdy, s, x.bdy);
}
inline void kv_scale(PairVec& y, cplx s) {
    scale(y.vol, s);
    scale(y.bdy, s);
}

struct GmresOptions {
    double tol = 1e-10;   // relative residual target
    int maxit = 60;
    int verbose = 0;
};

struct GmresResult {
    int iterations = 0;
    double relres = 0.0;
    bool converged = false;
};

template <class V, class Apply>
GmresResult gmres(const Apply& A, const V& b, V& x, const GmresOptions& opt) {
    GmresResult res;
    const double bnorm = kv_norm(b);
    if (bnorm == 0.0) {
        kv_scale(x, cplx(0.0, 0.0));
        res.converged = true;
        return res;
    }
    // Initial residual (x may carry a warm start).
    V r = A(x);
    kv_scale(r, cplx(-1.0, 0.0));
    kv_axpy(r, cplx(1.0, 0.0), b);
    double rnorm = kv_norm(r);
    if (rnorm / bnorm <= opt.tol) {
        res.converged = true;
        res.relres = rnorm / bnorm;
        return res;
    }

    std::vector<V> basis;
    basis.reserve(static_cast<std::size_t>(opt.maxit) + 1);
    kv_scale(r, cplx(1.0 / rnorm, 0.0));
    basis.push_back(r);

    const int m = opt.maxit;
    std::vector<cplx> H(static_cast<std::size_t>(m + 1) * m, cplx{0.0, 0.0});
    auto Hat = [&](int i, int j) -> cplx& {
        return H[static_cast<std::size_t>(i) * m + j];
    };
    std::vector<cplx> cs(m), sn(m), g(m + 1, cplx{0.0, 0.0});
    g[0] = rnorm;

    int k = 0;
    for (; k < m; ++k) {
        V w = A(basis[static_cast<std::size_t>(k)]);
        for (int i = 0; i <= k; ++i) {
            const cplx hik = kv_dot(basis[static_cast<std::size_t>(i)], w);
            Hat(i, k) = hik;
            kv_axpy(w, -hik, basis[static_cast<std::size_t>(i)]);
        }
        const double hkk = kv_norm(w);
        // Apply accumulated rotations to the new column.
        for (int i = 0; i < k; ++i) {
            const cplx t = std::conj(cs[i]) * Hat(i, k) + std::conj(sn[i]) * Hat(i + 1, k);
            Hat(i + 1, k) = -sn[i] * Hat(i, k) + cs[i] * Hat(i + 1, k);
            Hat(i, k) = t;
        }
        // New rotation zeroing the subdiagonal entry hkk.
        const cplx a = Hat(k, k);
        const double denom = std::sqrt(std::norm(a) + hkk * hkk);
        if (denom == 0.0) {
            cs[k] = 1.0;
            sn[k] = 0.0;
        } else {
            cs[k] = a / denom;
            sn[k] = hkk / denom;
        }
        Hat(k, k) = std::conj(cs[k]) * a + std::conj(sn[k]) * hkk;
        g[k + 1] = -sn[k] * g[k];
        g[k] = std::conj(cs[k]) * g[k];
        const double resk = std::abs(g[k + 1]);
        if (opt.verbose > 1)
            std::fprintf(stderr, "    gmres it %d relres %.3e\n", k + 1, resk / bnorm);
        if (hkk > 0.0 && k + 1 < m) {
            V v = w;
            kv_scale(v, cplx(1.0 / hkk, 0.0));
            basis.push_back(v);
        }
        if (resk / bnorm <= opt.tol || hkk == 0.0 || k + 1 == m) {
            ++k;
            break;
        }
    }

    // Back substitution for the Hessenberg least-squares solution.
    std::vector<cplx> y(static_cast<std::size_t>(k), cplx{0.0, 0.0});
    for (int i = k - 1; i >= 0; --i) {
        cplx acc = g[i];
        for (int j = i + 1; j < k; ++j) acc -= Hat(i, j) * y[static_cast<std::size_t>(j)];
        if (Hat(i, i) == cplx{0.0, 0.0}) fail("gmres: singular Hessenberg pivot");
        y[static_cast<std::size_t>(i)] = acc / Hat(i, i);
    }
    for (int i = 0; i < k && i < (int)basis.size(); ++i)
        kv_axpy(x, y[static_cast<std::size_t>(i)], basis[static_cast<std::size_t>(i)]);

    res.iterations = k;
    res.relres = std::abs(g[k]) / bnorm;
    res.converged = res.relres <= opt.tol;
    return res;
}

// ---------------------------------------------------------------------------
// Whole-space operators in the unflattened frame. The weight is linear there,
// so conjugation is a global constant-coefficient multiplier regardless of
// the domain shape; sigma = -1 selects the mirrored weight.

void apply_conjugated_y(Field& u, double h, int sigma);
// Outgoing-regularized inverse: u <- -Op(1/(p - i delta)) u.
void free_green_y(Field& u, double h, double delta, int sigma);

// ---------------------------------------------------------------------------
// Chart operator bundle

struct ChartOpConfig {
    int rank_cap = 48;
    double expand_tol = 3e-10;
    double jsolve_tol = 1e-12;
    int jsolve_maxit = 60;
    double free_tol = 1e-9;
    int free_maxit = 120;
    double zsolve_tol = 1e-12;
    int zsolve_maxit = 40;
    int verbose = 0;
};

class ChartOperators {
  public:
    ChartOperators(const DomainSpec& dom, int chart_idx, double h,
                   const ChartOpConfig& cfg = {});

    const GridSpec& grid() const { return grid_; }
    double h() const { return h_; }
    double delta() const { return delta_; }
    bool flat() const { return flat_; }
    const ChartTables& tables() const { return tab_; }
    const MachineData& machine() const { return md_; }
    const SymbolEval& sym() const { return *ev_; }
    const CutoffSet& cutoffs() const { return cut_; }
    const std::vector<double>& omega_mask() const { return omega_mask_; }
    const std::vector<double>& plateau() const { return plateau_mask_; }

    // Conjugated operator and its weighted form (1+|K|^2)^{-1} M.
    void apply_M(Field& u) const;
    void apply_M_weighted(Field& u) const;

    // Factorization pieces: M_w = Q J + A0 - h E1 + h^2 E0eff.
    void apply_J(Field& u) const;
    void apply_Q(Field& u) const;
    void apply_A0(Field& u) const;
    void apply_E1(Field& u) const;
    // Measured residual (applied to a probe): E0eff u = (M_w - QJ - A0 + hE1)u / h^2.
    Field factor_residual(const Field& u) const;

    // Causal inverse of J on a zero-padded normal axis, and the half-space
    // projections built from it.
    Field invert_J(const Field& u) const;
    Field jplus(const Field& u) const;          // J^{-1} (1_{x_n>=0} u)
    Field id_minus_jpj(const Field& u) const;   // u - J^+ J u

    // Free-field resolvent in the chart frame: (M - i delta)^{-1} v.
    Field free_green(const Field& v, GmresResult* info = nullptr) const;

    // Interior parametrix term Op(rho/p) over the full frequency lattice.
    Field apply_Ps(const Field& v) const;

    // Boundary pivot: Z = Op(z0); zinv solves Z t = s. The slice variant
    // applies zinv to every normal slice of a volume field.
    BoundaryField apply_Z(const BoundaryField& t) const;
    BoundaryField zinv(const BoundaryField& t) const;
    void zinv_slices(Field& u) const;

    // Poisson term and boundary extension.
    Field apply_poisson(const BoundaryField& f) const;
    Field extendE(const BoundaryField& t) const;

    // Tangential cutoff filters as frequency multipliers.
    void filter_rho(Field& u, bool complement) const;
    void filter_rho(BoundaryField& u, bool complement) const;
    void filter_rho1(Field& u, bool complement) const;
    void filter_rho1(BoundaryField& u, bool complement) const;

    // Traces at the chart plane x_n = 0: plain restriction and the weighted
    // conormal trace (the latter keeps the geometric slope sign).
    BoundaryField tau(const Field& u) const;
    BoundaryField tau_b(const Field& u) const;

    // One-sided parametrix. v must already be masked to the chart-frame
    // domain; f is the boundary datum on the chart plane.
    Field apply_Pr(const Field& v, const BoundaryField& f) const;

    // Geometric weight tables (1+|K|^2)^{+-1/2} on the tangential lattice.
    const std::vector<double>& sqrtw() const { return sqrtw_; }
    const std::vector<double>& inv_sqrtw() const { return inv_sqrtw_; }

    const SeparableReport& poisson_report() const { return op_poisson_.report; }
    const SeparableReport& ps_report() const { return op_ps_.report; }

  private:
    void apply_J_padded(Field& u) const;
    Field solve_J_padded(const Field& rhs) const;

    GridSpec grid_;
    GridSpec padded_;
    double h_ = 0.0;
    double delta_ = 0.0;
    bool flat_ = false;
    ChartOpConfig cfg_;
    ChartTables tab_;
    MachineData md_;
    CutoffSet cut_;
    std::unique_ptr<SymbolEval> ev_;

    std::vector<double> a0c_;        // 1 + |K|^2
    std::vector<double> inv_a0c_;
    std::vector<double> sqrtw_, inv_sqrtw_;
    std::vector<double> omega_mask_;
    std::vector<double> halfspace_;
    std::vector<double> plateau_mask_;

    std::vector<cplx> rho_mult_, rho1_mult_;   // tangential filter tables
    TangentialOp op_fplus_;
    TangentialOp op_qtang_;
    TangentialOp op_a0_;
    TangentialOp op_e1_;
    TangentialOp op_z_;
    TangentialOp op_zpre_;
    TangentialOp op_poisson_;
    FullOp op_ps_;
    std::vector<cplx> jflat_padded_;           // exact padded multiplier (flat)
    std::vector<cplx> jpre_padded_;            // mean-coefficient preconditioner
    std::vector<cplx> free_pre_;               // mean-coefficient resolvent table
};

} // namespace cgolab
