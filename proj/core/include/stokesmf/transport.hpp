#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "stokesmf/meso.hpp"
#include "stokesmf/micro.hpp"
#include "stokesmf/vec.hpp"

namespace stokesmf {

// A weighted point cloud in R^dim (dim = 3 for space, 6 for phase space,
// position and velocity coordinates entering the quadratic cost with unit
// weight each).  points is row-major: point k occupies
// [k*dim, (k+1)*dim).
struct WeightedCloud {
  std::vector<double> points;
  std::vector<double> weights;
  int dim = 3;

  int size() const { return dim > 0 ? static_cast<int>(weights.size()) : 0; }
  void validate() const;  // layout, nonnegative weights, total mass 1 (1e-9)
};

WeightedCloud make_cloud(const Vec3List& x, const std::vector<double>& w);
WeightedCloud make_phase_cloud(const Vec3List& x, const Vec3List& v,
                               const std::vector<double>& w);

enum class TransportMethod { exact, entropic };

struct TransportOptions {
  TransportMethod method = TransportMethod::exact;
  int cap = 2048;                 // exact-method size limit
  bool entropic_fallback = false;  // above cap: fall back instead of failing
  // Entropic regularization eps = epsilon_factor * (joint bounding-box
  // diagonal)^2; the reported cost is the transport cost of the rounded
  // feasible plan with no entropic correction, which overshoots the exact
  // cost by at most eps * log(max cloud size).
  double epsilon_factor = 1e-3;
  int max_sinkhorn_iter = 5000;
};

struct TransportResult {
  double cost = 0.0;  // squared-distance transport cost
  double w2 = 0.0;    // sqrt(cost)
  TransportMethod method = TransportMethod::exact;
  double epsilon = 0.0;  // 0 for exact
  std::size_t plan_support_size = 0;

  std::string method_label() const;  // "exact" or "entropic(eps=...)"
};

// Quadratic-cost optimal transport between two weighted clouds of equal
// dimension.  Exact path: shortest-augmenting-path assignment when both
// clouds are uniform with equal size, successive-shortest-path min-cost
// flow otherwise.  Entropic path: log-domain Sinkhorn with eps-scaling,
// rounded to a feasible plan.
TransportResult wasserstein2(const WeightedCloud& a, const WeightedCloud& b,
                             const TransportOptions& opts = {});

// W2 between the particle state's phase cloud ((X_i, V_i), 1/N each) and
// the characteristic cloud ((Y_k, W_k), m_k).
TransportResult phase_distance(const MicroState& state, const LagrangianCloud& cloud,
                               const TransportOptions& opts = {});

// Spatial-only W2 between the position marginals.
TransportResult space_distance(const MicroState& state, const LagrangianCloud& cloud,
                               const TransportOptions& opts = {});

}  // namespace stokesmf
