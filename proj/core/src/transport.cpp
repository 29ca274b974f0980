#include "stokesmf/transport.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "stokesmf/errors.hpp"

namespace stokesmf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void WeightedCloud::validate() const {
  if (dim != 3 && dim != 6) throw validation_error("cloud dimension must be 3 or 6");
  if (weights.empty()) throw validation_error("transport: empty cloud");
  if (points.size() != weights.size() * static_cast<std::size_t>(dim))
    throw validation_error("transport: point buffer does not match weight count");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw validation_error("transport: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw validation_error("transport: cloud mass must be 1 within 1e-9 (got " +
                           std::to_string(total) + ")");
}

WeightedCloud make_cloud(const Vec3List& x, const std::vector<double>& w) {
  if (x.size() != w.size()) throw validation_error("make_cloud: length mismatch");
  WeightedCloud c;
  c.dim = 3;
  c.weights = w;
  c.points.reserve(3 * x.size());
  for (const Vec3& p : x) {
    c.points.push_back(p.x());
    c.points.push_back(p.y());
    c.points.push_back(p.z());
  }
  return c;
}

WeightedCloud make_phase_cloud(const Vec3List& x, const Vec3List& v,
                               const std::vector<double>& w) {
  if (x.size() != w.size() || v.size() != w.size())
    throw validation_error("make_phase_cloud: length mismatch");
  WeightedCloud c;
  c.dim = 6;
  c.weights = w;
  c.points.reserve(6 * x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    c.points.push_back(x[k].x());
    c.points.push_back(x[k].y());
    c.points.push_back(x[k].z());
    c.points.push_back(v[k].x());
    c.points.push_back(v[k].y());
    c.points.push_back(v[k].z());
  }
  return c;
}

std::string TransportResult::method_label() const {
  if (method == TransportMethod::exact) return "exact";
  char buf[40];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), epsilon);
  return "entropic(eps=" + std::string(buf, end) + ")";
}

namespace {

// Squared euclidean cost matrix, row-major a.size() x b.size().
std::vector<double> cost_matrix(const WeightedCloud& a, const WeightedCloud& b) {
  const int na = a.size(), nb = b.size(), dim = a.dim;
  std::vector<double> c(static_cast<std::size_t>(na) * nb);
  for (int i = 0; i < na; ++i) {
    const double* pa = &a.points[static_cast<std::size_t>(i) * dim];
    for (int j = 0; j < nb; ++j) {
      const double* pb = &b.points[static_cast<std::size_t>(j) * dim];
      double s = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double diff = pa[d] - pb[d];
        s += diff * diff;
      }
      c[static_cast<std::size_t>(i) * nb + j] = s;
    }
  }
  return c;
}

double bbox_diag2(const WeightedCloud& a, const WeightedCloud& b) {
  const int dim = a.dim;
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    double lo = kInf, hi = -kInf;
    for (int i = 0; i < a.size(); ++i) {
      const double v = a.points[static_cast<std::size_t>(i) * dim + d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    for (int j = 0; j < b.size(); ++j) {
      const double v = b.points[static_cast<std::size_t>(j) * dim + d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    s += (hi - lo) * (hi - lo);
  }
  return s;
}

// Shortest-augmenting-path optimal assignment with potentials on an n x n
// cost matrix.  Returns the minimal total cost; row_of_col[j] receives the
// matched row.  Deterministic: ties resolve to the lowest column index.
double solve_assignment(const std::vector<double>& c, int n, std::vector<int>& row_of_col) {
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      const double* crow = &c[static_cast<std::size_t>(i0 - 1) * n];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = crow[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  row_of_col.assign(n, -1);
  for (int j = 1; j <= n; ++j) {
    row_of_col[j - 1] = p[j] - 1;
    total += c[static_cast<std::size_t>(p[j] - 1) * n + (j - 1)];
  }
  return total;
}

struct PlanStats {
  double cost = 0.0;
  std::size_t support = 0;
};

// Successive shortest paths with node potentials on the dense bipartite
// transportation graph.  Exact for real-valued supplies/demands up to the
// clamping epsilons; augmentation count is bounded since every path
// saturates a supply, a demand, or a residual arc.
PlanStats solve_mincost_flow(const std::vector<double>& c, std::vector<double> supply,
                             std::vector<double> demand) {
  const int na = static_cast<int>(supply.size());
  const int nb = static_cast<int>(demand.size());
  const int n = na + nb;  // sources first, then sinks
  constexpr double kMassEps = 1e-15;
  std::vector<double> flow(static_cast<std::size_t>(na) * nb, 0.0);
  std::vector<double> pot(n, 0.0), dist(n);
  std::vector<int> parent(n);
  std::vector<char> done(n);

  double remaining = 0.0;
  for (double s : supply) remaining += s;

  const int max_augment = 10 * n + 100;
  for (int round = 0; round < max_augment && remaining > 1e-12; ++round) {
    std::fill(dist.begin(), dist.end(), kInf);
    std::fill(done.begin(), done.end(), 0);
    std::fill(parent.begin(), parent.end(), -1);
    for (int i = 0; i < na; ++i)
      if (supply[i] > kMassEps) dist[i] = 0.0;

    for (int settled = 0; settled < n; ++settled) {
      int u = -1;
      double best = kInf;
      for (int v = 0; v < n; ++v) {
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      }
      if (u < 0) break;
      done[u] = 1;
      if (u < na) {
        const double* crow = &c[static_cast<std::size_t>(u) * nb];
        for (int j = 0; j < nb; ++j) {
          const int v = na + j;
          if (done[v]) continue;
          const double rc = crow[j] + pot[u] - pot[v];
          if (dist[u] + rc < dist[v]) {
            dist[v] = dist[u] + rc;
            parent[v] = u;
          }
        }
      } else {
        const int j = u - na;
        for (int i = 0; i < na; ++i) {
          if (done[i] || flow[static_cast<std::size_t>(i) * nb + j] <= kMassEps) continue;
          const double rc = -c[static_cast<std::size_t>(i) * nb + j] + pot[u] - pot[i];
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            parent[i] = u;
          }
        }
      }
    }

    int sink = -1;
    double best = kInf;
    for (int j = 0; j < nb; ++j) {
      if (demand[j] > kMassEps && dist[na + j] < best) {
        best = dist[na + j];
        sink = na + j;
      }
    }
    if (sink < 0)
      throw solver_error("transport: min-cost flow could not route remaining mass");

    double bottleneck = demand[sink - na];
    for (int v = sink; parent[v] >= 0; v = parent[v]) {
      const int p = parent[v];
      if (p < na && v >= na) {
        // forward arc: uncapacitated
      } else {
        bottleneck = std::min(bottleneck, flow[static_cast<std::size_t>(v) * nb + (p - na)]);
      }
      if (parent[p] < 0) bottleneck = std::min(bottleneck, supply[p]);
    }

    for (int v = sink; parent[v] >= 0; v = parent[v]) {
      const int p = parent[v];
      if (p < na && v >= na) {
        flow[static_cast<std::size_t>(p) * nb + (v - na)] += bottleneck;
      } else {
        flow[static_cast<std::size_t>(v) * nb + (p - na)] -= bottleneck;
      }
      if (parent[p] < 0) supply[p] -= bottleneck;
    }
    demand[sink - na] -= bottleneck;
    remaining -= bottleneck;

    // Cap at the augmenting distance so arcs into unreached nodes keep
    // nonnegative reduced costs.
    for (int v = 0; v < n; ++v) pot[v] += std::min(dist[v], best);
  }
  if (remaining > 1e-12)
    throw solver_error("transport: min-cost flow failed to exhaust supply");

  PlanStats out;
  for (std::size_t k = 0; k < flow.size(); ++k) {
    if (flow[k] > 1e-14) {
      out.cost += flow[k] * c[k];
      ++out.support;
    }
  }
  return out;
}

double logsumexp(const std::vector<double>& terms) {
  double hi = -kInf;
  for (double t : terms) hi = std::max(hi, t);
  if (hi == -kInf) return -kInf;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - hi);
  return hi + std::log(s);
}

// Log-domain Sinkhorn with geometric eps-scaling, rounded to an exactly
// feasible plan whose plain transport cost is reported.
PlanStats solve_entropic(const std::vector<double>& c, const std::vector<double>& a,
                         const std::vector<double>& b, double eps, int max_iter) {
  const int na = static_cast<int>(a.size());
  const int nb = static_cast<int>(b.size());
  std::vector<double> log_a(na), log_b(nb);
  for (int i = 0; i < na; ++i) log_a[i] = a[i] > 0.0 ? std::log(a[i]) : -kInf;
  for (int j = 0; j < nb; ++j) log_b[j] = b[j] > 0.0 ? std::log(b[j]) : -kInf;

  std::vector<double> f(na, 0.0), g(nb, 0.0);
  std::vector<double> row_terms(nb), col_terms(na);

  double cost_scale = 0.0;
  for (double v : c) cost_scale = std::max(cost_scale, v);
  double level_eps = std::max(eps, 0.05 * std::max(cost_scale, 1e-300));

  int iters_left = max_iter;
  while (true) {
    const int level_iters = level_eps > eps ? 50 : iters_left;
    for (int it = 0; it < level_iters && iters_left > 0; ++it, --iters_left) {
      for (int i = 0; i < na; ++i) {
        const double* crow = &c[static_cast<std::size_t>(i) * nb];
        for (int j = 0; j < nb; ++j) row_terms[j] = log_b[j] + (g[j] - crow[j]) / level_eps;
        f[i] = -level_eps * logsumexp(row_terms);
      }
      for (int j = 0; j < nb; ++j) {
        for (int i = 0; i < na; ++i)
          col_terms[i] = log_a[i] + (f[i] - c[static_cast<std::size_t>(i) * nb + j]) / level_eps;
        g[j] = -level_eps * logsumexp(col_terms);
      }
      if (level_eps <= eps && it % 8 == 7) {
        // With f freshly updated the row marginals are exact; check columns.
        double err = 0.0;
        for (int j = 0; j < nb; ++j) {
          for (int i = 0; i < na; ++i)
            col_terms[i] =
                log_a[i] + (f[i] + g[j] - c[static_cast<std::size_t>(i) * nb + j]) / level_eps;
          err += std::abs(std::exp(log_b[j] + logsumexp(col_terms)) - b[j]);
        }
        if (err < 1e-10) iters_left = 0;
      }
    }
    if (level_eps <= eps || iters_left <= 0) break;
    level_eps = std::max(eps, 0.5 * level_eps);
  }

  // Materialize the plan and round it onto the feasible polytope: scale
  // rows down to a, then columns down to b, then patch the deficit with a
  // rank-one correction.
  std::vector<double> plan(static_cast<std::size_t>(na) * nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j)
      plan[static_cast<std::size_t>(i) * nb + j] = std::exp(
          log_a[i] + log_b[j] + (f[i] + g[j] - c[static_cast<std::size_t>(i) * nb + j]) / eps);

  std::vector<double> row_sum(na, 0.0), col_sum(nb, 0.0);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) row_sum[i] += plan[static_cast<std::size_t>(i) * nb + j];
  for (int i = 0; i < na; ++i) {
    const double s = row_sum[i] > 0.0 ? std::min(1.0, a[i] / row_sum[i]) : 0.0;
    for (int j = 0; j < nb; ++j) plan[static_cast<std::size_t>(i) * nb + j] *= s;
  }
  for (int j = 0; j < nb; ++j)
    for (int i = 0; i < na; ++i) col_sum[j] += plan[static_cast<std::size_t>(i) * nb + j];
  for (int j = 0; j < nb; ++j) {
    const double s = col_sum[j] > 0.0 ? std::min(1.0, b[j] / col_sum[j]) : 0.0;
    for (int i = 0; i < na; ++i) plan[static_cast<std::size_t>(i) * nb + j] *= s;
  }
  std::vector<double> err_a(na, 0.0), err_b(nb, 0.0);
  double total_err = 0.0;
  std::fill(row_sum.begin(), row_sum.end(), 0.0);
  std::fill(col_sum.begin(), col_sum.end(), 0.0);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      const double v = plan[static_cast<std::size_t>(i) * nb + j];
      row_sum[i] += v;
      col_sum[j] += v;
    }
  for (int i = 0; i < na; ++i) {
    err_a[i] = std::max(0.0, a[i] - row_sum[i]);
    total_err += err_a[i];
  }
  for (int j = 0; j < nb; ++j) err_b[j] = std::max(0.0, b[j] - col_sum[j]);
  if (total_err > 0.0) {
    for (int i = 0; i < na; ++i) {
      if (err_a[i] == 0.0) continue;
      for (int j = 0; j < nb; ++j)
        plan[static_cast<std::size_t>(i) * nb + j] += err_a[i] * err_b[j] / total_err;
    }
  }

  PlanStats out;
  for (std::size_t k = 0; k < plan.size(); ++k) {
    if (plan[k] > 1e-14) {
      out.cost += plan[k] * c[k];
      ++out.support;
    }
  }
  return out;
}

bool uniform_weights(const std::vector<double>& w) {
  const double target = 1.0 / static_cast<double>(w.size());
  for (double v : w)
    if (std::abs(v - target) > 1e-12 * target) return false;
  return true;
}

}  // namespace

TransportResult wasserstein2(const WeightedCloud& a, const WeightedCloud& b,
                             const TransportOptions& opts) {
  a.validate();
  b.validate();
  if (a.dim != b.dim) throw validation_error("transport: dimension mismatch");
  const int na = a.size(), nb = b.size();

  bool entropic = opts.method == TransportMethod::entropic;
  if (!entropic && std::max(na, nb) > opts.cap) {
    if (!opts.entropic_fallback)
      throw validation_error("transport: clouds exceed the exact-method cap of " +
                             std::to_string(opts.cap) +
                             " points and entropic fallback is disabled");
    entropic = true;
  }

  const std::vector<double> c = cost_matrix(a, b);
  TransportResult result;
  if (entropic) {
    result.method = TransportMethod::entropic;
    result.epsilon = std::max(opts.epsilon_factor * bbox_diag2(a, b), 1e-300);
    const PlanStats stats =
        solve_entropic(c, a.weights, b.weights, result.epsilon, opts.max_sinkhorn_iter);
    result.cost = stats.cost;
    result.plan_support_size = stats.support;
  } else if (na == nb && uniform_weights(a.weights) && uniform_weights(b.weights)) {
    std::vector<int> row_of_col;
    const double total = solve_assignment(c, na, row_of_col);
    result.method = TransportMethod::exact;
    result.cost = total / static_cast<double>(na);
    result.plan_support_size = static_cast<std::size_t>(na);
  } else {
    result.method = TransportMethod::exact;
    const PlanStats stats = solve_mincost_flow(c, a.weights, b.weights);
    result.cost = stats.cost;
    result.plan_support_size = stats.support;
  }
  result.cost = std::max(0.0, result.cost);
  result.w2 = std::sqrt(result.cost);
  return result;
}

TransportResult phase_distance(const MicroState& state, const LagrangianCloud& cloud,
                               const TransportOptions& opts) {
  const std::vector<double> w(state.n(), 1.0 / static_cast<double>(state.n()));
  return wasserstein2(make_phase_cloud(state.X, state.V, w),
                      make_phase_cloud(cloud.Y, cloud.W, cloud.m), opts);
}

TransportResult space_distance(const MicroState& state, const LagrangianCloud& cloud,
                               const TransportOptions& opts) {
  const std::vector<double> w(state.n(), 1.0 / static_cast<double>(state.n()));
  return wasserstein2(make_cloud(state.X, w), make_cloud(cloud.Y, cloud.m), opts);
}

}  // namespace stokesmf
