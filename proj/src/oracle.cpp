#include "edgeoff/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace edgeoff {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw ModelError(what);
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Problem weighted by a fixed distribution.
struct Weighted {
  std::size_t N = 0, C = 0;
  std::vector<std::vector<double>> weight;  // a*rho
  std::vector<double> room;                 // B - sum b*rho
  std::vector<std::vector<std::vector<double>>> coupled;  // [k][n][j] coef*rho
  std::vector<double> capacity;
  const OffloadProblem* problem = nullptr;
  const Marginals* dist = nullptr;
};

Weighted weigh(const OffloadProblem& p, const Marginals& dist) {
  check_marginals(dist, p);
  Weighted w;
  w.problem = &p;
  w.dist = &dist;
  w.N = p.num_devices();
  w.C = p.coupled.size();
  w.weight.resize(w.N);
  w.room.resize(w.N);
  w.coupled.assign(w.C, std::vector<std::vector<double>>(w.N));
  for (std::size_t n = 0; n < w.N; ++n) {
    const std::size_t K = p.num_states(n);
    w.weight[n].resize(K);
    double base = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      w.weight[n][j] = p.device_coef[n][j] * dist[n][j];
      base += p.device_offset[n][j] * dist[n][j];
    }
    w.room[n] = p.device_capacity[n] - base;
    require(w.room[n] >= 0.0, "solve_offline: power budget of device " + std::to_string(n) +
                                  " cannot cover its fixed consumption");
    for (std::size_t k = 0; k < w.C; ++k) {
      w.coupled[k][n].resize(K);
      for (std::size_t j = 0; j < K; ++j) w.coupled[k][n][j] = p.coupled[k].coef[n][j] * dist[n][j];
    }
  }
  for (const auto& row : p.coupled) {
    require(row.capacity > 0.0, "solve_offline: coupled capacity must be > 0");
    w.capacity.push_back(row.capacity);
  }
  return w;
}

using Rows = std::vector<std::vector<double>>;

Rows knapsack_all(const Weighted& w, const std::vector<double>& mult) {
  const auto& p = *w.problem;
  Rows y(w.N);
  std::vector<double> values;
  for (std::size_t n = 0; n < w.N; ++n) {
    const std::size_t K = p.num_states(n);
    values.assign(K, 0.0);
    for (std::size_t j = 0; j < K; ++j) {
      double c = p.gain[n][j];
      for (std::size_t k = 0; k < w.C; ++k) c -= mult[k] * p.coupled[k].coef[n][j];
      values[j] = c * (*w.dist)[n][j];
    }
    signed_knapsack(values, w.weight[n], w.room[n], y[n]);
  }
  return y;
}

double coupled_load(const Weighted& w, std::size_t k, const Rows& y) {
  double load = 0.0;
  for (std::size_t n = 0; n < w.N; ++n)
    for (std::size_t j = 0; j < y[n].size(); ++j) load += w.coupled[k][n][j] * y[n][j];
  return load;
}

struct LevelResult {
  Rows y;
  std::vector<double> mult;
};

// Solves for multipliers k..C-1 given mult[0..k-1]; rows k.. are satisfied on return.
LevelResult solve_level(const Weighted& w, std::size_t k, std::vector<double> mult) {
  if (k == w.C) return {knapsack_all(w, mult), mult};
  const double cap = w.capacity[k];

  mult[k] = 0.0;
  LevelResult lo_res = solve_level(w, k + 1, mult);
  double load_lo = coupled_load(w, k, lo_res.y);
  if (load_lo <= cap) return lo_res;

  const auto& p = *w.problem;
  double hi = 0.0;
  for (std::size_t n = 0; n < w.N; ++n)
    for (std::size_t j = 0; j < p.num_states(n); ++j) {
      const double coef = p.coupled[k].coef[n][j];
      if (coef > 0.0) {
        double c = p.gain[n][j];
        for (std::size_t i = 0; i < k; ++i) c -= mult[i] * p.coupled[i].coef[n][j];
        hi = std::max(hi, c / coef);
      }
    }
  hi += 1.0;
  double lo = 0.0;
  mult[k] = hi;
  LevelResult hi_res = solve_level(w, k + 1, mult);
  double load_hi = coupled_load(w, k, hi_res.y);

  for (int it = 0; it < 200; ++it) {
    if (cap - load_hi < 1e-13 * std::max(1.0, cap)) break;
    if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
    mult[k] = 0.5 * (lo + hi);
    LevelResult mid = solve_level(w, k + 1, mult);
    const double load = coupled_load(w, k, mid.y);
    if (load > cap) {
      lo = mult[k];
      lo_res = std::move(mid);
      load_lo = load;
    } else {
      hi = mult[k];
      hi_res = std::move(mid);
      load_hi = load;
    }
  }

  // mix the two sides so that row k is met with equality
  const double alpha = std::clamp((cap - load_hi) / (load_lo - load_hi), 0.0, 1.0);
  LevelResult out = std::move(hi_res);
  for (std::size_t n = 0; n < w.N; ++n)
    for (std::size_t j = 0; j < out.y[n].size(); ++j)
      out.y[n][j] = std::clamp(alpha * lo_res.y[n][j] + (1.0 - alpha) * out.y[n][j], 0.0, 1.0);
  out.mult[k] = hi;
  return out;
}

}  // namespace

void signed_knapsack(const std::vector<double>& values, const std::vector<double>& weights,
                     double capacity, std::vector<double>& row) {
  const std::size_t K = values.size();
  require(weights.size() == K, "signed_knapsack: dimension mismatch");
  row.assign(K, 0.0);
  double room = capacity;
  struct Item {
    double value, weight;
    std::size_t j;
    bool drop;
  };
  std::vector<Item> items;
  for (std::size_t j = 0; j < K; ++j) {
    const double v = values[j], u = weights[j];
    if (u <= 0.0 && v > 0.0) {
      row[j] = 1.0;
      room -= u;
    } else if (u >= 0.0 && v <= 0.0) {
      row[j] = 0.0;
    } else if (u < 0.0) {
      // taking frees room at a loss; dropping it again is an ordinary item
      row[j] = 1.0;
      room -= u;
      if (v < 0.0) items.push_back({-v, -u, j, true});
    } else {
      items.push_back({v, u, j, false});
    }
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    return a.value * b.weight > b.value * a.weight;
  });
  for (const auto& it : items) {
    if (room <= 0.0) break;
    const double frac = it.weight <= room ? 1.0 : room / it.weight;
    row[it.j] = it.drop ? 1.0 - frac : frac;
    room -= frac * it.weight;
  }
}

OfflineSolution solve_offline(const OffloadProblem& problem, const Marginals& dist) {
  const Weighted w = weigh(problem, dist);
  LevelResult res = solve_level(w, 0, std::vector<double>(w.C, 0.0));
  OfflineSolution sol;
  sol.policy = PolicyTable(std::move(res.y));
  sol.objective = objective_value(sol.policy, dist, problem);
  sol.coupled_multipliers = std::move(res.mult);
  return sol;
}

OfflineSolution solve_offline(const StateTable& table, const Marginals& dist,
                              const ResourceBudgets& budgets, ConstraintVariant variant) {
  return solve_offline(make_problem(table.flatten(), budgets, variant), dist);
}

namespace {

struct Var {
  std::size_t n, j;
};

std::vector<Var> active_vars(const OffloadProblem& p, const Marginals& dist) {
  std::vector<Var> vars;
  for (std::size_t n = 0; n < p.num_devices(); ++n)
    for (std::size_t j = 0; j < p.num_states(n); ++j) {
      if (dist[n][j] <= 0.0) continue;
      bool touches = p.gain[n][j] != 0.0 || p.device_coef[n][j] != 0.0;
      for (const auto& row : p.coupled) touches = touches || row.coef[n][j] != 0.0;
      if (touches) vars.push_back({n, j});
    }
  return vars;
}

}  // namespace

double brute_force_step(const OffloadProblem& problem, const Marginals& dist, double max_points) {
  check_marginals(dist, problem);
  const double v = static_cast<double>(active_vars(problem, dist).size());
  if (v == 0) return 1.0;
  std::uint64_t m = 1;
  while (m < 1000 && std::pow(static_cast<double>(m + 2), v) <= max_points) ++m;
  require(std::pow(static_cast<double>(m + 1), v) <= max_points,
          "brute_force_offline: instance too large");
  return 1.0 / static_cast<double>(m);
}

OfflineSolution brute_force_offline(const OffloadProblem& problem, const Marginals& dist,
                                    double grid_step, double max_points) {
  check_marginals(dist, problem);
  require(grid_step > 0.0 && grid_step <= 1.0, "brute_force_offline: step must lie in (0,1]");
  const auto m = static_cast<std::uint64_t>(std::llround(1.0 / grid_step));
  require(m >= 1, "brute_force_offline: step too coarse");
  const auto vars = active_vars(problem, dist);
  require(std::pow(static_cast<double>(m + 1), static_cast<double>(vars.size())) <= max_points,
          "brute_force_offline: instance too large");

  const std::size_t N = problem.num_devices();
  const std::size_t rows = problem.num_constraints();
  const double step = 1.0 / static_cast<double>(m);

  std::vector<std::vector<double>> y(N);
  for (std::size_t n = 0; n < N; ++n) y[n].assign(problem.num_states(n), 0.0);
  PolicyTable zero{y};
  std::vector<double> load = constraint_values(zero, dist, problem);
  double obj = 0.0;

  // per-variable increments of objective and rows for one grid step
  std::vector<double> dobj(vars.size());
  std::vector<std::vector<std::pair<std::size_t, double>>> drow(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto [n, j] = vars[i];
    const double rho = dist[n][j];
    dobj[i] = problem.gain[n][j] * rho * step;
    drow[i].push_back({n, problem.device_coef[n][j] * rho * step});
    for (std::size_t k = 0; k < problem.coupled.size(); ++k)
      drow[i].push_back({N + k, problem.coupled[k].coef[n][j] * rho * step});
  }

  std::vector<std::uint64_t> digit(vars.size(), 0);
  OfflineSolution best;
  best.policy = zero;
  best.objective = 0.0;
  bool have = false;

  auto consider = [&]() {
    for (std::size_t r = 0; r < rows; ++r)
      if (load[r] > 1e-9) return;
    if (have && obj <= best.objective + 1e-12) return;
    for (std::size_t i = 0; i < vars.size(); ++i)
      y[vars[i].n][vars[i].j] = static_cast<double>(digit[i]) * step;
    PolicyTable cand{y};
    const auto g = constraint_values(cand, dist, problem);
    for (double v : g)
      if (v > 1e-12) return;
    const double exact = objective_value(cand, dist, problem);
    if (!have || exact > best.objective) {
      best.policy = std::move(cand);
      best.objective = exact;
      have = true;
    }
  };

  consider();
  while (true) {
    std::size_t i = 0;
    while (i < vars.size() && digit[i] == m) {
      const double back = static_cast<double>(m);
      obj -= dobj[i] * back;
      for (const auto& [r, d] : drow[i]) load[r] -= d * back;
      digit[i] = 0;
      ++i;
    }
    if (i == vars.size()) break;
    ++digit[i];
    obj += dobj[i];
    for (const auto& [r, d] : drow[i]) load[r] += d;
    consider();
  }
  return best;
}

BoundConstants bound_constants(const OffloadProblem& p, const StepSchedule& schedule) {
  BoundConstants bc;
  const std::size_t N = p.num_devices();
  double sq = 0.0;
  double q = INFINITY;
  for (std::size_t n = 0; n < N; ++n) {
    double cmax = 0.0, hi = -INFINITY, lo = INFINITY, bmax = -INFINITY;
    for (std::size_t j = 0; j < p.num_states(n); ++j) {
      cmax = std::max(cmax, std::abs(p.gain[n][j]));
      const double b = p.device_offset[n][j], a = p.device_coef[n][j];
      hi = std::max(hi, b + std::max(0.0, a));
      lo = std::min(lo, b + std::min(0.0, a));
      bmax = std::max(bmax, b);
    }
    bc.sigma_f += cmax;
    const double cap = p.device_capacity[n];
    const double m = std::max(std::abs(hi - cap), std::abs(lo - cap));
    sq += m * m;
    q = std::min(q, cap - std::max(0.0, bmax));
  }
  for (const auto& row : p.coupled) {
    double hi = 0.0, lo = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      double h = 0.0, l = 0.0;
      for (double c : row.coef[n]) {
        h = std::max(h, c);
        l = std::min(l, c);
      }
      hi += h;
      lo += l;
    }
    const double m = std::max(std::abs(hi - row.capacity), std::abs(lo - row.capacity));
    sq += m * m;
    q = std::min(q, row.capacity);
  }
  bc.sigma_g = std::sqrt(sq);
  require(q > 0.0, "bound_constants: the zero policy is not strictly feasible");
  bc.q = q;
  const double a1 = step_size(schedule, 1);
  bc.lambda_max = a1 * bc.sigma_g * bc.sigma_g / (2.0 * q) + a1 * bc.sigma_g;
  return bc;
}

PolicyTable per_slot_z(const DualVector& dual, const OffloadProblem& problem, const Marginals& truth) {
  check_marginals(truth, problem);
  std::vector<std::vector<double>> rows(problem.num_devices());
  for (std::size_t n = 0; n < problem.num_devices(); ++n) {
    rows[n].resize(problem.num_states(n));
    for (std::size_t j = 0; j < rows[n].size(); ++j)
      rows[n][j] = truth[n][j] > 0.0 && offload_decide(dual, problem, n, j) ? 1.0 : 0.0;
  }
  return PolicyTable(std::move(rows));
}

double eps_term(const PolicyTable& y, const Marginals& empirical, const Marginals& truth,
                const OffloadProblem& problem) {
  check_marginals(empirical, problem);
  check_marginals(truth, problem);
  double s = 0.0;
  for (std::size_t n = 0; n < problem.num_devices(); ++n)
    for (std::size_t j = 0; j < problem.num_states(n); ++j)
      s += problem.gain[n][j] * y.at(n, j) * (truth[n][j] - empirical[n][j]);
  return s;
}

std::vector<double> delta_term(const PolicyTable& y, const Marginals& empirical,
                               const Marginals& truth, const OffloadProblem& problem) {
  check_marginals(empirical, problem);
  check_marginals(truth, problem);
  const std::size_t N = problem.num_devices();
  std::vector<double> d(problem.num_constraints(), 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t j = 0; j < problem.num_states(n); ++j) {
      const double diff = empirical[n][j] - truth[n][j];
      d[n] += (problem.device_offset[n][j] + problem.device_coef[n][j] * y.at(n, j)) * diff;
      for (std::size_t k = 0; k < problem.coupled.size(); ++k)
        d[N + k] += problem.coupled[k].coef[n][j] * y.at(n, j) * diff;
    }
  return d;
}

ErrorTerms error_terms(const PolicyTable& z, const PolicyTable& y, const DualVector& dual,
                       const Marginals& empirical, const Marginals& truth,
                       const OffloadProblem& problem) {
  ErrorTerms e;
  e.eps_gap = eps_term(z, empirical, truth, problem) - eps_term(y, empirical, truth, problem);
  const auto lam = dual_components(dual, problem);
  const auto dz = delta_term(z, empirical, truth, problem);
  for (std::size_t i = 0; i < dz.size(); ++i) e.lambda_delta_z += lam[i] * dz[i];
  e.delta_y_norm = norm(delta_term(y, empirical, truth, problem));
  return e;
}

bool holds_relative(double lhs, std::initializer_list<double> rhs_terms, double scale) {
  double rhs = 0.0, mag = std::abs(lhs) + std::abs(scale);
  for (double r : rhs_terms) {
    rhs += r;
    mag += std::abs(r);
  }
  return lhs <= rhs + 1e-9 * mag;
}

bool BoundReport::all_hold() const {
  return std::all_of(records.begin(), records.end(), [](const BoundRecord& r) { return r.all_hold(); });
}

namespace {

// Dense per-device arrays used by the replay loop.
struct DeviceArrays {
  std::vector<double> c, a, b, h, l, rho;
  double cap = 0.0;
  double b_rho = 0.0;  // sum b*rho
};

}  // namespace

BoundReport theorem1_report(const Trajectory& tr, const OffloadProblem& problem,
                            const Marginals& truth, const OfflineSolution& optimum,
                            const BoundConstants& constants, const StepSchedule& schedule,
                            const std::vector<std::uint64_t>& checkpoints) {
  check_marginals(truth, problem);
  const std::size_t N = problem.num_devices();
  const std::size_t C = problem.coupled.size();
  const std::size_t R = N + C;
  require(tr.num_devices == N, "theorem1_report: device count mismatch");
  require(tr.has_duals(), "theorem1_report: trajectory has no multipliers");
  require(tr.duals.size() == (tr.slots + 1) * tr.dual_width(),
          "theorem1_report: multiplier rows missing");
  require(tr.state.size() == tr.slots * N, "theorem1_report: state records missing");
  require(C <= 2, "theorem1_report: at most two coupled rows");

  std::vector<std::uint64_t> marks;
  for (auto T : checkpoints)
    if (T >= 1 && T <= tr.slots) marks.push_back(T);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());
  if (marks.empty() && tr.slots > 0) marks.push_back(tr.slots);

  std::vector<DeviceArrays> dev(N);
  for (std::size_t n = 0; n < N; ++n) {
    auto& d = dev[n];
    const std::size_t K = problem.num_states(n);
    d.c = problem.gain[n];
    d.a = problem.device_coef[n];
    d.b = problem.device_offset[n];
    d.h = C > 0 ? problem.coupled[0].coef[n] : std::vector<double>(K, 0.0);
    d.l = C > 1 ? problem.coupled[1].coef[n] : std::vector<double>(K, 0.0);
    d.rho = truth[n];
    d.cap = problem.device_capacity[n];
    for (std::size_t j = 0; j < K; ++j) d.b_rho += d.b[j] * d.rho[j];
  }
  std::vector<double> caps(C);
  for (std::size_t k = 0; k < C; ++k) caps[k] = problem.coupled[k].capacity;
  const bool has_offset = std::any_of(dev.begin(), dev.end(), [](const DeviceArrays& d) {
    return std::any_of(d.b.begin(), d.b.end(), [](double x) { return x != 0.0; });
  });

  const double f_star = -optimum.objective;
  const double sg2 = constants.sigma_g * constants.sigma_g;

  std::vector<std::vector<std::uint64_t>> counts(N);
  for (std::size_t n = 0; n < N; ++n) counts[n].assign(problem.num_states(n), 0);

  double sum_f = 0.0, sum_a = 0.0, sum_ratio_sq = 0.0, sum_ratio_norm = 0.0, sum_delta = 0.0;
  double sum_C = 0.0, sum_lower = 0.0, sum_L = 0.0, sum_saddle_rhs = 0.0, lam_max = 0.0;
  std::vector<double> sum_g(R, 0.0), g(R), dy(R), dz(R), lam(R);
  double worst1 = INFINITY, worst3 = INFINITY;
  std::uint64_t fail1 = 0, fail3 = 0;

  BoundReport report;
  report.constants = constants;
  std::size_t next_mark = 0;

  auto load_lambda = [&](std::uint64_t t) {
    const auto row = tr.dual_row(t);
    for (std::size_t n = 0; n < N; ++n) lam[n] = row[n];
    if (C > 0) lam[N] = row[N];
    if (C > 1) lam[N + 1] = row[N + 1];
  };
  auto full_norm = [&](std::uint64_t t) { return norm(tr.dual_row(t)); };

  for (std::uint64_t t = 1; t <= tr.slots; ++t) {
    load_lambda(t);
    const double lam_norm = full_norm(t);
    lam_max = std::max(lam_max, lam_norm);
    const double a_t = step_size(schedule, t);
    const double a_prev = step_size_or_first(schedule, t - 1);
    const double inv_t = 1.0 / static_cast<double>(t);

    std::fill(g.begin(), g.end(), 0.0);
    std::fill(dy.begin(), dy.end(), 0.0);
    std::fill(dz.begin(), dz.end(), 0.0);
    double f_y = 0.0, eps_y = 0.0, eps_z = 0.0;
    const double mu = C > 0 ? lam[N] : 0.0;
    const double link = C > 1 ? lam[N + 1] : 0.0;

    for (std::size_t n = 0; n < N; ++n) {
      const auto& d = dev[n];
      auto& cnt = counts[n];
      ++cnt[tr.state[tr.at(t, n)]];
      const double lambda = lam[n];
      const std::size_t K = d.c.size();
      double gy_dev = 0.0, dy_dev = 0.0, dz_dev = 0.0;
      double gy_h = 0.0, dy_h = 0.0, dz_h = 0.0, gy_l = 0.0, dy_l = 0.0, dz_l = 0.0;
      double offset_diff = 0.0;
      for (std::size_t j = 0; j < K; ++j) {
        const double rho = d.rho[j];
        const double diff = static_cast<double>(cnt[j]) * inv_t - rho;
        if (has_offset) offset_diff += d.b[j] * diff;
        double price = lambda * d.a[j];
        if (C > 0) price += mu * d.h[j];
        if (C > 1) price += link * d.l[j];
        if (!(d.c[j] > price)) continue;
        // y = 1 here; z = 1 as well unless the state has no mass
        f_y -= d.c[j] * rho;
        eps_y -= d.c[j] * diff;
        gy_dev += d.a[j] * rho;
        dy_dev += d.a[j] * diff;
        gy_h += d.h[j] * rho;
        dy_h += d.h[j] * diff;
        gy_l += d.l[j] * rho;
        dy_l += d.l[j] * diff;
        if (rho > 0.0) {
          eps_z -= d.c[j] * diff;
          dz_dev += d.a[j] * diff;
          dz_h += d.h[j] * diff;
          dz_l += d.l[j] * diff;
        }
      }
      g[n] = d.b_rho + gy_dev - d.cap;
      dy[n] = offset_diff + dy_dev;
      dz[n] = offset_diff + dz_dev;
      if (C > 0) {
        g[N] += gy_h;
        dy[N] += dy_h;
        dz[N] += dz_h;
      }
      if (C > 1) {
        g[N + 1] += gy_l;
        dy[N + 1] += dy_l;
        dz[N + 1] += dz_l;
      }
    }
    for (std::size_t k = 0; k < C; ++k) g[N + k] -= caps[k];

    double lam_gt = 0.0, lam_dz = 0.0, dy_sq = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
      lam_gt += lam[i] * (g[i] + dy[i]);
      lam_dz += lam[i] * dz[i];
      dy_sq += dy[i] * dy[i];
      sum_g[i] += g[i];
    }
    sum_f += f_y;
    sum_a += a_t;
    sum_ratio_sq += lam_norm * lam_norm * (1.0 / a_t - 1.0 / a_prev);
    sum_ratio_norm += lam_norm * (1.0 / a_prev - 1.0 / a_t);
    sum_delta += std::sqrt(dy_sq);
    sum_C += eps_z - eps_y + lam_dz;
    sum_lower -= lam_gt;
    sum_L += f_y + eps_y + lam_gt;
    sum_saddle_rhs += eps_z + lam_dz;

    const double next_norm = full_norm(t + 1);
    const double T = static_cast<double>(t);
    const double l1_rhs_a = 0.5 * sg2 * sum_a;
    const double l1_rhs_b = 0.5 * sum_ratio_sq;
    const double l1_rhs_c = -next_norm * next_norm / (2.0 * a_t);
    const bool l1 = holds_relative(sum_lower, {l1_rhs_a, l1_rhs_b, l1_rhs_c});
    worst1 = std::min(worst1, l1_rhs_a + l1_rhs_b + l1_rhs_c - sum_lower);
    if (!l1 && fail1 == 0) fail1 = t;
    const double l3_lhs = sum_L / T - f_star;
    const double l3_rhs = sum_saddle_rhs / T;
    const bool l3 = holds_relative(l3_lhs, {l3_rhs}, std::abs(f_star) + std::abs(sum_L / T));
    worst3 = std::min(worst3, l3_rhs - l3_lhs);
    if (!l3 && fail3 == 0) fail3 = t;

    if (next_mark < marks.size() && marks[next_mark] == t) {
      ++next_mark;
      BoundRecord r;
      r.T = t;
      r.optimal_objective = optimum.objective;
      r.average_objective = -sum_f / T;
      r.C_T = sum_C / T;
      r.gap_step_sum = sg2 * sum_a / (2.0 * T);
      r.gap_step_ratio = sum_ratio_sq / (2.0 * T);
      r.gap_terminal = -next_norm * next_norm / (2.0 * T * a_t);
      r.gap_lhs = sum_f / T - f_star;
      r.gap_rhs = r.C_T + r.gap_step_sum + r.gap_step_ratio + r.gap_terminal;
      r.gap_holds = holds_relative(r.gap_lhs, {r.C_T, r.gap_step_sum, r.gap_step_ratio, r.gap_terminal},
                                   std::abs(f_star) + std::abs(sum_f / T));
      r.avg_constraint.resize(R);
      double pos = 0.0;
      for (std::size_t i = 0; i < R; ++i) {
        r.avg_constraint[i] = sum_g[i] / T;
        const double p = std::max(0.0, r.avg_constraint[i]);
        pos += p * p;
      }
      r.viol_lhs = std::sqrt(pos);
      r.viol_terminal = next_norm / (T * a_t);
      r.viol_step_ratio = sum_ratio_norm / T;
      r.viol_delta = sum_delta / T;
      r.viol_rhs = r.viol_terminal + r.viol_step_ratio + r.viol_delta;
      r.viol_holds = holds_relative(r.viol_lhs, {r.viol_terminal, r.viol_step_ratio, r.viol_delta});
      r.lambda_norm_max = std::max(lam_max, next_norm);
      r.lambda_max = constants.lambda_max;
      r.lambda_holds = holds_relative(r.lambda_norm_max, {r.lambda_max});
      r.lower_bound_slack = l1_rhs_a + l1_rhs_b + l1_rhs_c - sum_lower;
      r.lower_bound_every_slot = fail1 == 0;
      r.saddle_slack = l3_rhs - l3_lhs;
      r.saddle_every_slot = fail3 == 0;
      report.records.push_back(std::move(r));
    }
  }
  report.worst_lower_bound_slack = tr.slots > 0 ? worst1 : 0.0;
  report.worst_saddle_slack = tr.slots > 0 ? worst3 : 0.0;
  return report;
}

nlohmann::ordered_json to_json(const BoundRecord& r) {
  nlohmann::ordered_json j;
  j["T"] = r.T;
  j["gap_lhs"] = r.gap_lhs;
  j["gap_rhs"] = r.gap_rhs;
  j["gap_holds"] = r.gap_holds;
  j["viol_lhs"] = r.viol_lhs;
  j["viol_rhs"] = r.viol_rhs;
  j["viol_holds"] = r.viol_holds;
  j["C_T"] = r.C_T;
  j["lambda_norm_max"] = r.lambda_norm_max;
  j["gap_components"] = {{"C_T", r.C_T},
                         {"step_sum", r.gap_step_sum},
                         {"step_ratio", r.gap_step_ratio},
                         {"terminal", r.gap_terminal}};
  j["viol_components"] = {{"terminal", r.viol_terminal},
                          {"step_ratio", r.viol_step_ratio},
                          {"delta", r.viol_delta}};
  j["avg_constraint"] = r.avg_constraint;
  j["lower_bound_slack"] = r.lower_bound_slack;
  j["lower_bound_every_slot"] = r.lower_bound_every_slot;
  j["saddle_slack"] = r.saddle_slack;
  j["saddle_every_slot"] = r.saddle_every_slot;
  j["lambda_max"] = r.lambda_max;
  j["lambda_holds"] = r.lambda_holds;
  j["optimal_objective"] = r.optimal_objective;
  j["average_objective"] = r.average_objective;
  return j;
}

nlohmann::ordered_json to_json(const BoundReport& report) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : report.records) arr.push_back(to_json(r));
  return arr;
}

}  // namespace edgeoff
