// Discrete norms: Riemann-sum Lebesgue norms with the grid cell volume,
// semiclassical Sobolev norms via spectral Japanese-bracket factors, and a
// polynomially weighted variant.
#pragma once

#include "cgolab/grid.hpp"

namespace cgolab {

// (sum |f|^r dV)^(1/r); r = 0 is accepted as the sup norm.
double norm_lr(const Field& f, double r);
double norm_lr(const BoundaryField& f, double r);

// || <hD'>^k <hD>^l f ||_{L^r}. Brackets are (1+|h xi'|^2)^{k/2} and
// (1+|h xi|^2)^{l/2}; k or l may be negative (smoothing).
double norm_w(const Field& f, double k, double l, double r, double h);

// Semiclassical H^1: equals norm_w(f, 0, 1, 2, h).
double norm_h1(const Field& f, double h);

// || <x>^delta <hD>^k f ||_{L^2} with <x> = (1+|x|^2)^{1/2}.
double norm_hk_weighted(const Field& f, double k, double delta, double h);

// Applies <hD'>^k <hD>^l in place (shared by the norms and the tests).
void apply_brackets(Field& f, double k, double l, double h);

} // namespace cgolab
