#pragma once

#include <Eigen/SparseCore>

#include "cpsc/chart.hpp"

namespace cpsc {

// Conformal-geometry kernel on 2D axisymmetric charts: the Yamabe operator
//
//   N_{g0}(u) = Lap_{g0} u - co R(g0) u + co R(g) u^{(n+2)/(n-2)},
//
// its linearization, scalar-curvature recovery, and the equivariance
// identities of the conformal Laplacian.

struct StencilEntry {
  int i, j;
  double c;
};

// Row entries of the discrete Laplace-Beltrami operator at node (i, j).
// Theta ghosts are folded by pole parity.  `order` (2 or 4) selects the
// length-direction stencil; 4 is available on cylinder charts only.
// Returns the number of entries written, or 0 when the requested stencil
// does not fit inside the grid at this node.
int laplace_stencil(const Chart& chart, int i, int j, int order, StencilEntry out[12]);

// True when the order-2 stencil at (i, j) fits (cell-centered charts: always;
// node-centered: interior length rows).
bool laplace_row_interior(const Chart& chart, int i);

// Discrete Laplace-Beltrami operator.  Rows without a full stencil are zeroed.
DiscreteField laplace_beltrami(const DiscreteField& f, int order = 2);

// N_{g0}(u) with prescribed target scalar curvature.  Requires u > 0.
DiscreteField yamabe_residual(const DiscreteField& u, double target_R, int order = 2);

// Application of the linearization of N_{g0} at u to v.
DiscreteField linearize_apply(const DiscreteField& u, double target_R, const DiscreteField& v,
                              int order = 2);

// Sparse matrix of the linearization at u (row-major over chart nodes).
// Boundary rows without a full stencil are identity rows.
Eigen::SparseMatrix<double> linearize(const DiscreteField& u, double target_R);

// Scalar curvature of g = u^{4/(n-2)} g0 recovered from the conformal
// transformation law.  Boundary rows copy their interior neighbors.
DiscreteField scalar_curvature_of(const DiscreteField& u, int order = 2);

// Pointwise <grad u, grad v>_{g0} by central differences (interior rows).
double grad_dot(const DiscreteField& u, const DiscreteField& v, int i, int j);

// Sup-norm defect of the conformal-Laplacian equivariance
// L_g(u phi) = u^{(n+2)/(n-2)} L_{g'} phi with g' = u^{4/(n-2)} g,
// both sides discretized independently.  Vanishes to discretization order.
double equivariance_defect(const DiscreteField& u, const DiscreteField& phi);

// Sup-norm defect of the corresponding identity for the full linearization
// when g' has scalar curvature n(n-1):  L_g(u phi) = u^{crit}(Lap_{g'} + n) phi.
double conjugation_defect(const DiscreteField& u, const DiscreteField& phi);

}  // namespace cpsc
