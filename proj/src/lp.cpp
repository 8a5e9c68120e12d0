#include "wattbound/lp.hpp"

#include <algorithm>
#include <cassert>
#include <optional>

#include "wattbound/diagnostics.hpp"

namespace wattbound {

namespace {

// Dense exact-rational simplex tableau. Row layout: one row per constraint
// with rhs kept non-negative; basis[i] names the variable basic in row i.
struct Tableau {
  int n_struct = 0;  // structural variables (prefix of the column space)
  int n_total = 0;   // + slacks/surpluses + artificials
  int first_artificial = 0;
  std::vector<std::vector<Rat>> rows;  // each size n_total + 1 (rhs last)
  std::vector<int> basis;
  std::vector<Rat> z;  // reduced-cost row, size n_total + 1 (objective last)

  Rat& rhs(std::size_t i) { return rows[i][static_cast<std::size_t>(n_total)]; }

  void pivot(std::size_t prow, int pcol) {
    auto& pr = rows[prow];
    Rat pe = pr[static_cast<std::size_t>(pcol)];
    for (auto& v : pr) v /= pe;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i == prow) continue;
      Rat f = rows[i][static_cast<std::size_t>(pcol)];
      if (f == 0) continue;
      for (std::size_t j = 0; j <= static_cast<std::size_t>(n_total); ++j)
        rows[i][j] -= f * pr[j];
    }
    Rat zf = z[static_cast<std::size_t>(pcol)];
    if (zf != 0)
      for (std::size_t j = 0; j <= static_cast<std::size_t>(n_total); ++j)
        z[j] -= zf * pr[j];
    basis[prow] = pcol;
  }

  // Minimizes the current z-row. allowed[j] == false bars a column from
  // entering (used to freeze artificials in phase 2). Returns the entering
  // column on unboundedness, -1 on optimality.
  int run(const std::vector<char>& allowed) {
    while (true) {
      int enter = -1;
      for (int j = 0; j < n_total; ++j)
        if (allowed[static_cast<std::size_t>(j)] && z[static_cast<std::size_t>(j)] < 0) {
          enter = j;  // Bland: smallest index
          break;
        }
      if (enter < 0) return -1;
      std::optional<std::size_t> leave;
      Rat best;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Rat& a = rows[i][static_cast<std::size_t>(enter)];
        if (a <= 0) continue;
        Rat ratio = rhs(i) / a;
        if (!leave || ratio < best ||
            (ratio == best && basis[i] < basis[*leave])) {
          leave = i;
          best = ratio;
        }
      }
      if (!leave) return enter;  // unbounded direction
      pivot(*leave, enter);
    }
  }
};

LpResult solve_lp_impl(const LpProblem& p) {
  std::size_t m = p.constraints.size();
  int n = p.num_vars;

  // Normalize rows to  a.x (<=|=|>=) b  with b >= 0.
  struct Row {
    std::vector<Rat> a;
    Rel rel;
    Rat b;
  };
  std::vector<Row> norm;
  norm.reserve(m);
  for (const auto& c : p.constraints) {
    Row r;
    r.a.assign(static_cast<std::size_t>(n), Rat(0));
    for (const auto& [j, v] : c.coef) {
      if (j < 0 || j >= n) fail(ErrKind::Analysis, "constraint references unknown variable");
      r.a[static_cast<std::size_t>(j)] = v;
    }
    r.rel = c.rel;
    r.b = c.rhs;
    if (r.b < 0) {
      for (auto& v : r.a) v = -v;
      r.b = -r.b;
      if (r.rel == Rel::Le)
        r.rel = Rel::Ge;
      else if (r.rel == Rel::Ge)
        r.rel = Rel::Le;
    }
    norm.push_back(std::move(r));
  }

  int n_slack = 0;
  for (const auto& r : norm)
    if (r.rel != Rel::Eq) ++n_slack;
  int n_art = 0;
  for (const auto& r : norm)
    if (r.rel != Rel::Le) ++n_art;

  Tableau t;
  t.n_struct = n;
  t.first_artificial = n + n_slack;
  t.n_total = n + n_slack + n_art;
  t.rows.assign(m, std::vector<Rat>(static_cast<std::size_t>(t.n_total) + 1, Rat(0)));
  t.basis.assign(m, -1);
  int slack_at = n;
  int art_at = t.first_artificial;
  for (std::size_t i = 0; i < m; ++i) {
    auto& row = t.rows[i];
    for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = norm[i].a[static_cast<std::size_t>(j)];
    row[static_cast<std::size_t>(t.n_total)] = norm[i].b;
    if (norm[i].rel == Rel::Le) {
      row[static_cast<std::size_t>(slack_at)] = 1;
      t.basis[i] = slack_at++;
    } else if (norm[i].rel == Rel::Ge) {
      row[static_cast<std::size_t>(slack_at)] = -1;
      ++slack_at;
      row[static_cast<std::size_t>(art_at)] = 1;
      t.basis[i] = art_at++;
    } else {
      row[static_cast<std::size_t>(art_at)] = 1;
      t.basis[i] = art_at++;
    }
  }

  std::vector<char> allowed(static_cast<std::size_t>(t.n_total), 1);

  // Phase 1: minimize the sum of artificials.
  if (n_art > 0) {
    t.z.assign(static_cast<std::size_t>(t.n_total) + 1, Rat(0));
    for (int j = t.first_artificial; j < t.n_total; ++j) t.z[static_cast<std::size_t>(j)] = 1;
    for (std::size_t i = 0; i < m; ++i)
      if (t.basis[i] >= t.first_artificial)
        for (std::size_t j = 0; j <= static_cast<std::size_t>(t.n_total); ++j)
          t.z[j] -= t.rows[i][j];
    int u = t.run(allowed);
    (void)u;  // phase 1 is bounded below by zero
    Rat w = -t.z[static_cast<std::size_t>(t.n_total)];
    if (w != 0) {
      LpResult r;
      r.status = LpStatus::Infeasible;
      return r;
    }
    // Drive leftover artificials out of the (degenerate) basis.
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basis[i] < t.first_artificial) continue;
      int enter = -1;
      for (int j = 0; j < t.first_artificial; ++j)
        if (t.rows[i][static_cast<std::size_t>(j)] != 0) {
          enter = j;
          break;
        }
      if (enter >= 0) t.pivot(i, enter);
      // else: redundant row; the artificial stays basic at zero, harmless.
    }
  }
  for (int j = t.first_artificial; j < t.n_total; ++j) allowed[static_cast<std::size_t>(j)] = 0;

  // Phase 2 on the real objective, internally minimized.
  t.z.assign(static_cast<std::size_t>(t.n_total) + 1, Rat(0));
  for (int j = 0; j < n; ++j) {
    Rat c = j < static_cast<int>(p.objective.size()) ? p.objective[static_cast<std::size_t>(j)] : Rat(0);
    t.z[static_cast<std::size_t>(j)] = p.sense == Sense::Maximize ? -c : c;
  }
  for (std::size_t i = 0; i < m; ++i) {
    int b = t.basis[i];
    Rat zb = t.z[static_cast<std::size_t>(b)];
    if (zb != 0)
      for (std::size_t j = 0; j <= static_cast<std::size_t>(t.n_total); ++j)
        t.z[j] -= zb * t.rows[i][j];
  }
  int u = t.run(allowed);
  LpResult r;
  if (u >= 0) {
    r.status = LpStatus::Unbounded;
    r.unbounded_var = u < n ? u : -1;
    return r;
  }
  r.status = LpStatus::Optimal;
  r.values.assign(static_cast<std::size_t>(n), Rat(0));
  for (std::size_t i = 0; i < m; ++i)
    if (t.basis[i] < n) r.values[static_cast<std::size_t>(t.basis[i])] = t.rhs(i);
  r.objective = 0;
  for (int j = 0; j < n && j < static_cast<int>(p.objective.size()); ++j)
    r.objective += p.objective[static_cast<std::size_t>(j)] * r.values[static_cast<std::size_t>(j)];
  return r;
}

bool is_integer(const Rat& v) { return boost::multiprecision::denominator(v) == 1; }

BigInt floor_rat(const Rat& v) {
  BigInt q = boost::multiprecision::numerator(v) / boost::multiprecision::denominator(v);
  if (v < 0 && q * boost::multiprecision::denominator(v) != boost::multiprecision::numerator(v)) --q;
  return q;
}

// Depth-first branch & bound; explores the floor branch first and keeps the
// first incumbent of each strictly improving value, so the search order is
// deterministic.
void branch(const LpProblem& base, std::vector<LinConstraint>& extra, std::optional<LpResult>& best,
            bool& unbounded, int& unbounded_var) {
  LpProblem sub = base;
  sub.constraints.insert(sub.constraints.end(), extra.begin(), extra.end());
  LpResult rel = solve_lp(sub);
  if (rel.status == LpStatus::Infeasible) return;
  if (rel.status == LpStatus::Unbounded) {
    unbounded = true;
    unbounded_var = rel.unbounded_var;
    return;
  }
  if (best) {
    if (base.sense == Sense::Maximize && rel.objective <= best->objective) return;
    if (base.sense == Sense::Minimize && rel.objective >= best->objective) return;
  }
  int frac = -1;
  for (std::size_t j = 0; j < rel.values.size(); ++j)
    if (!is_integer(rel.values[j])) {
      frac = static_cast<int>(j);
      break;
    }
  if (frac < 0) {
    best = rel;
    return;
  }
  BigInt fl = floor_rat(rel.values[static_cast<std::size_t>(frac)]);
  LinConstraint down;
  down.coef[frac] = 1;
  down.rel = Rel::Le;
  down.rhs = Rat(fl);
  extra.push_back(down);
  branch(base, extra, best, unbounded, unbounded_var);
  extra.pop_back();
  if (unbounded) return;
  LinConstraint up;
  up.coef[frac] = 1;
  up.rel = Rel::Ge;
  up.rhs = Rat(fl + 1);
  extra.push_back(up);
  branch(base, extra, best, unbounded, unbounded_var);
  extra.pop_back();
}

LpResult solve_ilp_plain(const LpProblem& p) {
  std::optional<LpResult> best;
  std::vector<LinConstraint> extra;
  bool unbounded = false;
  int unbounded_var = -1;
  branch(p, extra, best, unbounded, unbounded_var);
  if (unbounded) {
    LpResult r;
    r.status = LpStatus::Unbounded;
    r.unbounded_var = unbounded_var;
    return r;
  }
  if (!best) {
    LpResult r;
    r.status = LpStatus::Infeasible;
    return r;
  }
  return *best;
}

}  // namespace

LpResult solve_lp(const LpProblem& p) { return solve_lp_impl(p); }

LpResult solve_ilp(const LpProblem& p, bool lexicographic) {
  LpResult opt = solve_ilp_plain(p);
  if (opt.status != LpStatus::Optimal || !lexicographic) return opt;

  // Pin the optimal objective, then minimize each count in index order to
  // obtain the canonical (lexicographically smallest) optimal vector.
  LpProblem fixed = p;
  LinConstraint pin;
  for (int j = 0; j < p.num_vars && j < static_cast<int>(p.objective.size()); ++j)
    if (p.objective[static_cast<std::size_t>(j)] != 0)
      pin.coef[j] = p.objective[static_cast<std::size_t>(j)];
  pin.rel = Rel::Eq;
  pin.rhs = opt.objective;
  pin.tag = "objective-pin";
  fixed.constraints.push_back(pin);
  std::vector<Rat> canon(static_cast<std::size_t>(p.num_vars), Rat(0));
  for (int j = 0; j < p.num_vars; ++j) {
    LpProblem step = fixed;
    step.sense = Sense::Minimize;
    step.objective.assign(static_cast<std::size_t>(p.num_vars), Rat(0));
    step.objective[static_cast<std::size_t>(j)] = 1;
    LpResult r = solve_ilp_plain(step);
    if (r.status != LpStatus::Optimal)
      fail(ErrKind::Analysis, "internal: tie-break subproblem not optimal");
    canon[static_cast<std::size_t>(j)] = r.objective;
    LinConstraint fix;
    fix.coef[j] = 1;
    fix.rel = Rel::Eq;
    fix.rhs = r.objective;
    fixed.constraints.push_back(fix);
  }
  opt.values = std::move(canon);
  return opt;
}

std::vector<int> find_iis(const LpProblem& p) {
  std::vector<int> keep(p.constraints.size());
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = static_cast<int>(i);
  auto feasible = [&](const std::vector<int>& subset) {
    LpProblem sub = p;
    sub.sense = Sense::Minimize;
    sub.objective.assign(static_cast<std::size_t>(p.num_vars), Rat(0));
    sub.constraints.clear();
    for (int idx : subset) sub.constraints.push_back(p.constraints[static_cast<std::size_t>(idx)]);
    return solve_lp(sub).status != LpStatus::Infeasible;
  };
  if (feasible(keep)) return {};  // nothing to report
  for (std::size_t i = 0; i < keep.size();) {
    std::vector<int> trial = keep;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
    if (!feasible(trial))
      keep = std::move(trial);  // constraint i not needed for infeasibility
    else
      ++i;
  }
  return keep;
}

}  // namespace wattbound
