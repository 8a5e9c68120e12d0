#include "wattbound/ipet.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "wattbound/diagnostics.hpp"

namespace wattbound {

namespace {

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

long long parse_count(const std::string& v, const std::string& src, int line,
                      const std::string& key) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](char c) {
        return std::isdigit(static_cast<unsigned char>(c));
      }))
    fail(ErrKind::Annotation, src, ":", line, ": ", key, " expects a non-negative integer, got '",
         v, "'");
  try {
    return std::stoll(v);
  } catch (const std::exception&) {
    fail(ErrKind::Annotation, src, ":", line, ": ", key, " value out of range: '", v, "'");
  }
}

}  // namespace

std::string substitute_vars(const std::string& text,
                            const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] != '$') {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && ident_char(text[j])) ++j;
    if (j == i + 1) fail(ErrKind::Annotation, "stray '$' in annotation text");
    std::string name = text.substr(i + 1, j - i - 1);
    auto it = vars.find(name);
    if (it == vars.end()) fail(ErrKind::Annotation, "unresolved placeholder '$", name, "'");
    out += it->second;
    i = j;
  }
  return out;
}

std::vector<Annotation> parse_annotations(const std::string& text, const std::string& source_name) {
  std::vector<Annotation> anns;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    Annotation a;
    a.line = lineno;
    if (kind == "loopbound")
      a.kind = Annotation::Kind::LoopBound;
    else if (kind == "infeasible")
      a.kind = Annotation::Kind::InfeasibleEdge;
    else if (kind == "callbound")
      a.kind = Annotation::Kind::CallBound;
    else
      fail(ErrKind::Annotation, source_name, ":", lineno, ": unknown annotation kind '", kind, "'");
    std::set<std::string> seen;
    bool have_max = false;
    std::string tok;
    while (ls >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos)
        fail(ErrKind::Annotation, source_name, ":", lineno, ": expected key=value, got '", tok, "'");
      std::string key = tok.substr(0, eq);
      std::string value = tok.substr(eq + 1);
      if (value.empty())
        fail(ErrKind::Annotation, source_name, ":", lineno, ": empty value for '", key, "'");
      if (!seen.insert(key).second)
        fail(ErrKind::Annotation, source_name, ":", lineno, ": duplicate key '", key, "'");
      if (key == "func") {
        a.function = value;
      } else if (key == "header" && a.kind == Annotation::Kind::LoopBound) {
        a.header = value;
      } else if (key == "max" &&
                 (a.kind == Annotation::Kind::LoopBound || a.kind == Annotation::Kind::CallBound)) {
        a.max_bound = parse_count(value, source_name, lineno, "max");
        have_max = true;
      } else if (key == "min" && a.kind == Annotation::Kind::LoopBound) {
        a.min_bound = parse_count(value, source_name, lineno, "min");
      } else if (key == "callee" && a.kind == Annotation::Kind::CallBound) {
        a.callee = value;
      } else if (key == "edge" && a.kind == Annotation::Kind::InfeasibleEdge) {
        auto arrow = value.find("->");
        if (arrow == std::string::npos || arrow == 0 || arrow + 2 >= value.size())
          fail(ErrKind::Annotation, source_name, ":", lineno,
               ": edge expects <label>-><label>, got '", value, "'");
        a.edge_from = value.substr(0, arrow);
        a.edge_to = value.substr(arrow + 2);
      } else {
        fail(ErrKind::Annotation, source_name, ":", lineno, ": unknown key '", key, "' for ", kind);
      }
    }
    if (a.function.empty())
      fail(ErrKind::Annotation, source_name, ":", lineno, ": missing func=");
    switch (a.kind) {
      case Annotation::Kind::LoopBound:
        if (a.header.empty())
          fail(ErrKind::Annotation, source_name, ":", lineno, ": loopbound missing header=");
        if (!have_max)
          fail(ErrKind::Annotation, source_name, ":", lineno, ": loopbound missing max=");
        if (a.min_bound && *a.min_bound > a.max_bound)
          fail(ErrKind::Annotation, source_name, ":", lineno, ": min=", *a.min_bound,
               " exceeds max=", a.max_bound);
        break;
      case Annotation::Kind::InfeasibleEdge:
        if (a.edge_from.empty())
          fail(ErrKind::Annotation, source_name, ":", lineno, ": infeasible missing edge=");
        break;
      case Annotation::Kind::CallBound:
        if (a.callee.empty())
          fail(ErrKind::Annotation, source_name, ":", lineno, ": callbound missing callee=");
        if (!have_max)
          fail(ErrKind::Annotation, source_name, ":", lineno, ": callbound missing max=");
        break;
    }
    anns.push_back(std::move(a));
  }
  return anns;
}

IlpSystem build_ilp(const Cfg& cfg, const std::vector<Rat>& block_cost,
                    const std::vector<Annotation>& annotations, Sense sense) {
  if (!cfg.characterized)
    fail(ErrKind::Analysis, "CFG of '", cfg.function, "' must be characterized before IPET");
  if (block_cost.size() != cfg.blocks.size())
    fail(ErrKind::Analysis, "block cost vector size mismatch for '", cfg.function, "'");

  IlpSystem sys;
  sys.function = cfg.function;
  sys.n_blocks = static_cast<int>(cfg.blocks.size());
  sys.n_edges = static_cast<int>(cfg.edges.size());
  for (const auto& b : cfg.blocks) sys.names.push_back(b.name);
  for (const auto& e : cfg.edges)
    sys.names.push_back(cat(cfg.blocks[static_cast<std::size_t>(e.from)].name, "->",
                            cfg.blocks[static_cast<std::size_t>(e.to)].name));
  std::vector<int> vexit_var(cfg.blocks.size(), -1);
  int next = sys.n_blocks + sys.n_edges;
  for (const auto& b : cfg.blocks)
    if (b.exit_block) {
      vexit_var[static_cast<std::size_t>(b.id)] = next++;
      sys.names.push_back(cat("exit:", b.name));
    }

  LpProblem& p = sys.problem;
  p.sense = sense;
  p.num_vars = next;
  p.var_names = sys.names;
  p.objective.assign(static_cast<std::size_t>(p.num_vars), Rat(0));
  for (int b = 0; b < sys.n_blocks; ++b)
    p.objective[static_cast<std::size_t>(b)] = block_cost[static_cast<std::size_t>(b)];

  auto evar = [&](int edge_idx) { return sys.n_blocks + edge_idx; };

  // Flow conservation: block count equals inflow and outflow.
  for (const auto& b : cfg.blocks) {
    LinConstraint in;
    in.rel = Rel::Eq;
    in.coef[b.id] = 1;
    for (std::size_t e = 0; e < cfg.edges.size(); ++e)
      if (cfg.edges[e].to == b.id) in.coef[evar(static_cast<int>(e))] -= 1;
    in.rhs = b.id == cfg.entry ? 1 : 0;
    in.tag = cat("flow into block '", b.name, "'");
    p.constraints.push_back(std::move(in));

    LinConstraint out;
    out.rel = Rel::Eq;
    out.coef[b.id] = 1;
    for (std::size_t e = 0; e < cfg.edges.size(); ++e)
      if (cfg.edges[e].from == b.id) out.coef[evar(static_cast<int>(e))] -= 1;
    if (vexit_var[static_cast<std::size_t>(b.id)] >= 0)
      out.coef[vexit_var[static_cast<std::size_t>(b.id)]] -= 1;
    out.rhs = 0;
    out.tag = cat("flow out of block '", b.name, "'");
    p.constraints.push_back(std::move(out));
  }

  // Loop-bound constraints, relative to loop entries.
  std::set<int> covered;  // loop indices with a max bound
  for (const auto& a : annotations) {
    if (a.function != cfg.function) continue;
    if (a.kind == Annotation::Kind::LoopBound) {
      int h = cfg.block_of_label(a.header);
      if (h < 0)
        fail(ErrKind::Annotation, "loopbound (line ", a.line, "): no label '", a.header,
             "' in function '", cfg.function, "'");
      if (!cfg.blocks[static_cast<std::size_t>(h)].loop_header)
        fail(ErrKind::Annotation, "loopbound (line ", a.line, "): label '", a.header,
             "' in function '", cfg.function, "' is not a loop header");
      int loop_idx = -1;
      for (std::size_t i = 0; i < cfg.loops.size(); ++i)
        if (cfg.loops[i].header == h) loop_idx = static_cast<int>(i);
      const Loop& loop = cfg.loops[static_cast<std::size_t>(loop_idx)];
      covered.insert(loop_idx);
      std::vector<int> back, entry;
      for (std::size_t e = 0; e < cfg.edges.size(); ++e) {
        if (cfg.edges[e].to != h) continue;
        bool inside = std::binary_search(loop.blocks.begin(), loop.blocks.end(), cfg.edges[e].from);
        (inside ? back : entry).push_back(static_cast<int>(e));
      }
      int entry_const = h == cfg.entry ? 1 : 0;
      LinConstraint up;
      up.rel = Rel::Le;
      for (int e : back) up.coef[evar(e)] += 1;
      for (int e : entry) up.coef[evar(e)] -= Rat(a.max_bound);
      up.rhs = Rat(a.max_bound) * entry_const;
      up.tag = cat("loopbound func=", a.function, " header=", a.header, " max=", a.max_bound,
                   " (line ", a.line, ")");
      p.constraints.push_back(std::move(up));
      if (a.min_bound) {
        LinConstraint lo;
        lo.rel = Rel::Ge;
        for (int e : back) lo.coef[evar(e)] += 1;
        for (int e : entry) lo.coef[evar(e)] -= Rat(*a.min_bound);
        lo.rhs = Rat(*a.min_bound) * entry_const;
        lo.tag = cat("loopbound func=", a.function, " header=", a.header, " min=", *a.min_bound,
                     " (line ", a.line, ")");
        p.constraints.push_back(std::move(lo));
      }
    } else if (a.kind == Annotation::Kind::InfeasibleEdge) {
      int from = cfg.block_of_label(a.edge_from);
      int to = cfg.block_of_label(a.edge_to);
      if (from < 0 || to < 0)
        fail(ErrKind::Annotation, "infeasible (line ", a.line, "): unknown label '",
             from < 0 ? a.edge_from : a.edge_to, "' in function '", cfg.function, "'");
      int e = cfg.edge_index(from, to);
      if (e < 0)
        fail(ErrKind::Annotation, "infeasible (line ", a.line, "): no edge ", a.edge_from, "->",
             a.edge_to, " in function '", cfg.function, "'");
      LinConstraint z;
      z.rel = Rel::Eq;
      z.coef[evar(e)] = 1;
      z.rhs = 0;
      z.tag = cat("infeasible func=", a.function, " edge=", a.edge_from, "->", a.edge_to, " (line ",
                  a.line, ")");
      p.constraints.push_back(std::move(z));
    }
  }
  for (std::size_t i = 0; i < cfg.loops.size(); ++i)
    if (!covered.count(static_cast<int>(i)))
      fail(ErrKind::Annotation, "missing loop bound for header '",
           cfg.blocks[static_cast<std::size_t>(cfg.loops[i].header)].name, "' in function '",
           cfg.function, "'");
  return sys;
}

BoundResult solve(const IlpSystem& sys) {
  LpResult r = solve_ilp(sys.problem, true);
  if (r.status == LpStatus::Infeasible) {
    std::vector<int> iis = find_iis(sys.problem);
    std::ostringstream os;
    os << "constraints for '" << sys.function
       << "' are unsatisfiable; irreducible conflicting set:";
    for (int idx : iis) os << "\n  - " << sys.problem.constraints[static_cast<std::size_t>(idx)].tag;
    fail(ErrKind::Annotation, os.str());
  }
  if (r.status == LpStatus::Unbounded) {
    std::string witness = r.unbounded_var >= 0 && r.unbounded_var < static_cast<int>(sys.names.size())
                              ? sys.names[static_cast<std::size_t>(r.unbounded_var)]
                              : std::string("<unknown>");
    fail(ErrKind::Analysis, "objective for '", sys.function, "' is unbounded along '", witness,
         "'; some cycle lacks an effective bound");
  }
  BoundResult out;
  out.sense = sys.problem.sense;
  out.status = LpStatus::Optimal;
  out.bound = r.objective;
  auto as_int = [&](const Rat& v) {
    if (boost::multiprecision::denominator(v) != 1)
      fail(ErrKind::Analysis, "internal: non-integral optimum component");
    return BigInt(boost::multiprecision::numerator(v));
  };
  for (int b = 0; b < sys.n_blocks; ++b)
    out.block_counts.push_back(as_int(r.values[static_cast<std::size_t>(b)]));
  for (int e = 0; e < sys.n_edges; ++e)
    out.edge_counts.push_back(as_int(r.values[static_cast<std::size_t>(sys.n_blocks + e)]));
  return out;
}

namespace {

struct OracleCtx {
  const Cfg* cfg = nullptr;
  const std::vector<Rat>* cost = nullptr;
  std::vector<long long> max_bound;  // per loop
  std::vector<long long> min_bound;  // per loop, -1 when absent
  std::set<int> infeasible_edges;
  long long budget = 0;
  bool exceeded = false;
  long long paths = 0;
  bool any = false;
  Rat best_max, best_min;

  void record(const Rat& c) {
    if (++paths > budget) {
      exceeded = true;
      return;
    }
    if (!any || c > best_max) best_max = c;
    if (!any || c < best_min) best_min = c;
    any = true;
  }

  void walk(int b, std::vector<long long>& taken, std::vector<char>& active, const Rat& cost_in) {
    if (exceeded) return;
    Rat c = cost_in + (*cost)[static_cast<std::size_t>(b)];
    const BasicBlock& blk = cfg->blocks[static_cast<std::size_t>(b)];
    if (blk.exit_block) {
      bool ok = true;
      for (std::size_t l = 0; l < cfg->loops.size(); ++l)
        if (active[l] && min_bound[l] >= 0 && taken[l] < min_bound[l]) ok = false;
      if (ok) record(c);
      if (exceeded) return;
    }
    for (std::size_t e = 0; e < cfg->edges.size(); ++e) {
      const CfgEdge& edge = cfg->edges[e];
      if (edge.from != b || infeasible_edges.count(static_cast<int>(e))) continue;
      // Loop accounting along this edge; snapshot for backtracking.
      std::vector<long long> t2 = taken;
      std::vector<char> a2 = active;
      bool feasible = true;
      for (std::size_t l = 0; l < cfg->loops.size(); ++l) {
        const Loop& lp = cfg->loops[l];
        bool from_in = std::binary_search(lp.blocks.begin(), lp.blocks.end(), edge.from);
        bool to_in = std::binary_search(lp.blocks.begin(), lp.blocks.end(), edge.to);
        if (from_in && !to_in) {  // leaving: per-entry minimum must be met
          if (a2[l] && min_bound[l] >= 0 && t2[l] < min_bound[l]) feasible = false;
          a2[l] = 0;
        }
        if (edge.to == lp.header) {
          if (from_in) {  // back edge consumes budget
            if (t2[l] >= max_bound[l]) feasible = false;
            ++t2[l];
          } else {  // fresh entry
            a2[l] = 1;
            t2[l] = 0;
          }
        }
      }
      if (!feasible) continue;
      walk(edge.to, t2, a2, c);
      if (exceeded) return;
    }
  }
};

}  // namespace

PathOracle enumerate_paths_oracle(const Cfg& cfg, const std::vector<Rat>& block_cost,
                                  const std::vector<Annotation>& annotations,
                                  long long max_paths) {
  OracleCtx ctx;
  ctx.cfg = &cfg;
  ctx.cost = &block_cost;
  ctx.budget = max_paths;
  ctx.max_bound.assign(cfg.loops.size(), 0);
  ctx.min_bound.assign(cfg.loops.size(), -1);
  std::vector<char> have(cfg.loops.size(), 0);
  for (const auto& a : annotations) {
    if (a.function != cfg.function) continue;
    if (a.kind == Annotation::Kind::LoopBound) {
      int h = cfg.block_of_label(a.header);
      for (std::size_t l = 0; l < cfg.loops.size(); ++l)
        if (cfg.loops[l].header == h) {
          // Multiple annotations: tightest wins, same as the ILP.
          ctx.max_bound[l] = have[l] ? std::min(ctx.max_bound[l], a.max_bound) : a.max_bound;
          if (a.min_bound)
            ctx.min_bound[l] = std::max(ctx.min_bound[l], static_cast<long long>(*a.min_bound));
          have[l] = 1;
        }
    } else if (a.kind == Annotation::Kind::InfeasibleEdge) {
      int from = cfg.block_of_label(a.edge_from);
      int to = cfg.block_of_label(a.edge_to);
      int e = cfg.edge_index(from, to);
      if (e >= 0) ctx.infeasible_edges.insert(e);
    }
  }
  for (std::size_t l = 0; l < cfg.loops.size(); ++l)
    if (!have[l])
      fail(ErrKind::Annotation, "missing loop bound for header '",
           cfg.blocks[static_cast<std::size_t>(cfg.loops[l].header)].name, "' in function '",
           cfg.function, "'");

  std::vector<long long> taken(cfg.loops.size(), 0);
  std::vector<char> active(cfg.loops.size(), 0);
  for (std::size_t l = 0; l < cfg.loops.size(); ++l)
    if (cfg.loops[l].header == cfg.entry) active[l] = 1;
  ctx.walk(cfg.entry, taken, active, Rat(0));

  PathOracle out;
  out.available = !ctx.exceeded && ctx.any;
  out.path_count = ctx.paths;
  if (ctx.any) {
    out.max_energy = ctx.best_max;
    out.min_energy = ctx.best_min;
  }
  return out;
}

}  // namespace wattbound
