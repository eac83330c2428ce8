#pragma once

#include <unordered_map>
#include <vector>

#include "cpsc/chart.hpp"
#include "cpsc/fowler.hpp"

namespace cpsc {

// Connected sums of Delaunay summands.  Each summand is a Delaunay cylinder
// (s, theta); around a gluing point p = (s_p, theta_p), theta_p in {0, pi},
// the conformally flat chart  x = e^{-(s - s_p)} (sin theta, cos theta)
// sends p to the unit axis point (0, sigma).  The background switch deforms
// the metric inside the flat ball B_alpha(p) to an exact half-infinite
// normalized cylinder; two summands are then identified along their neck
// cylinders by r_1 r_2 = eps alpha_1 alpha_2, i.e. t_1 + t_2 = A_1 + A_2 + T.

struct Vec2 {
  double rho, z;  // meridian half-plane, rho >= 0
};

struct GridSpec {
  double body_dt = 0.08;      // body-chart spacing in s
  double neck_dt = 0.08;      // neck-chart spacing in tau
  int ntheta = 32;            // angular cells on every chart
  double L_end_periods = 4.0; // end truncation past the outermost gluing point
  double overlap = 0.5;       // neck chart extension past the ball boundary, in tau
  double mask_fraction = 0.55;  // body hole radius as a fraction of alpha
};

struct SummandSpec {
  double eps = 0.4;
  double t_p = 0.0;           // gluing-point s-coordinate (the + point)
  int pole = +1;              // theta_p = 0 (+1) or pi (-1) for the + point
  double alpha = 0.3;         // neck ball radius in the flat chart
  int deficiency_end = +1;    // which end (s -> +-infinity) carries the deficiency fields
};

struct GluingConfig {
  Dimension n{3};
  std::vector<SummandSpec> summands;
  std::vector<double> T;      // one neck parameter per junction
  double cutoff_width = 1.0;
  GridSpec grids;

  void validate() const;  // throws config_error
};

// Builds the config of an iterated connected sum: junction j glues summand
// j's + point to summand j+1's - point (the mirrored pole at the same t_p).
GluingConfig chain_config(Dimension n, const std::vector<SummandSpec>& summands,
                          const std::vector<double>& T_list);

// One side of a junction: the geometry of a summand around a gluing point.
struct Attachment {
  int summand = 0;
  double s_p = 0.0;
  double sigma = +1.0;  // cos(theta_p)
  double alpha = 0.3;

  Vec2 gluing_point() const { return {0.0, sigma}; }
  Vec2 body_to_flat(double s, double theta) const;
  Vec2 neck_to_flat(double tau, double thetat) const;
  void flat_to_body(Vec2 x, double& s, double& theta) const;
  void flat_to_neck(Vec2 x, double& tau, double& thetat) const;
};

// Analytic factors of one summand around an attachment.
class SummandGeometry {
 public:
  SummandGeometry(const DelaunayOrbit* orbit, const Attachment& at) : orbit_(orbit), at_(at) {}

  const Attachment& attachment() const { return at_; }

  // flat conformal factor of g_i:  v(x) = u_eps(s(x)) |x|^{-(n-2)/2}
  double flat_factor(Vec2 x) const;
  // factor of g_i over the normalized cylinder at the attachment
  double pure_factor(Vec2 x) const;
  // the switch cutoff rho(r): 0 inside B_alpha, 1 outside B_{2 alpha}
  double switch_cutoff(double r) const;
  // u_i = rho + (1 - rho) pure_factor
  double switch_factor(Vec2 x) const;
  // d/dtau of switch_factor along the neck ray at fixed thetat
  double switch_factor_dtau(double tau, double thetat) const;

 private:
  const DelaunayOrbit* orbit_;
  Attachment at_;
};

enum class NodeClass : unsigned char { interior, coupling, edge, masked };

struct InterpEntry {
  int chart;
  long node;
  double w;
};

struct GluedChart {
  Chart chart;
  bool is_neck = false;
  int owner = 0;  // body: summand index; neck: junction index
  std::vector<NodeClass> cls;
  std::vector<long> unknown;   // node -> compressed unknown id, -1 if masked
  long n_unknowns = 0;
  std::unordered_map<long, std::vector<InterpEntry>> coupling;

  DiscreteField Omega;  // factor of g_{c,T} over the chart background
  DiscreteField F0;     // total approximate factor over the chart background
};

struct Junction {
  Attachment left, right;  // left: summand j's + point, right: summand j+1's - point
  double T = 0.0;
};

class GluedManifold {
 public:
  GluingConfig config;
  std::vector<DelaunayOrbit> orbits;      // one per summand
  std::vector<Junction> junctions;
  std::vector<GluedChart> charts;         // bodies [0..N), then necks
  std::vector<long> offset;               // unknown offset per chart
  long total_unknowns = 0;

  int n_bodies() const { return int(orbits.size()); }
  int n_necks() const { return int(junctions.size()); }
  const GluedChart& body(int i) const { return charts[i]; }
  const GluedChart& neck(int j) const { return charts[n_bodies() + j]; }

  SummandGeometry geometry(const Attachment& at) const {
    return SummandGeometry(&orbits[at.summand], at);
  }

  // g_{c,T} volume weight of a node (used by all global inner products)
  double node_volume(int c, int i, int j) const;

  // cutoffs chi of the approximate solution on neck junction jn
  double chi_left(int jn, double tau) const;
  double chi_right(int jn, double tau) const;
};

GluedManifold build_connected_sum(const GluingConfig& config);

// The approximate conformal factor u_T relative to g_{c,T}, per chart
// (bodies first, then necks).  On bodies this is the background-switch
// factor; on necks the cutoff-patched sum of the two summand tails.
std::vector<DiscreteField> approximate_factor(const GluedManifold& glued);

// The error term f_T = N_{g_{c,T}}(u_T), evaluated in the product-rule form
// with exact derivatives of the cutoffs and of the summand tails; exactly
// supported in the transition zones.
std::vector<DiscreteField> error_field(const GluedManifold& glued,
                                       const std::vector<DiscreteField>& u_T);

// Switch factor u_i and cutoff rho_i of one summand sampled on its body
// chart (composed over the summand's attachments).
std::pair<DiscreteField, DiscreteField> background_switch(const GluedManifold& glued, int summand);

// sup norm of f_T over the neck charts
double error_sup(const GluedManifold& glued, const std::vector<DiscreteField>& f_T);

// sup of |f_T| outside the transition zones (support check; exact zeros)
double error_sup_outside_transition(const GluedManifold& glued,
                                    const std::vector<DiscreteField>& f_T);

// Largest mismatch of the flat-chart conformal factor of g_{c,T} computed
// through the body route and the neck route on chart overlaps.
double overlap_isometry_defect(const GluedManifold& glued);

// Largest interpolation disagreement of the per-chart samples of a global
// analytic field (the approximate factor) across chart overlaps.
double overlap_consistency_defect(const GluedManifold& glued,
                                  const std::vector<DiscreteField>& fields);

struct DecayScan {
  std::vector<double> T;
  std::vector<double> sup_norm;
  double rate = 0.0;       // least-squares slope of log ||f_T|| vs T
  double r_squared = 0.0;
  bool monotone = true;
};

// Rebuilds the configuration for each T in T_list and fits the exponential
// decay rate of ||f_T||_infty.
DecayScan error_decay_scan(const GluingConfig& config, const std::vector<double>& T_list);

}  // namespace cpsc
