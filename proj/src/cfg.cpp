#include "wattbound/cfg.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "wattbound/diagnostics.hpp"

namespace wattbound {

namespace {

constexpr int kBufferCapacity = 4;

// Depth-first reachability over successor lists.
std::vector<bool> reachable_set(const std::vector<BasicBlock>& blocks, int entry) {
  std::vector<bool> seen(blocks.size(), false);
  std::vector<int> stack{entry};
  seen[static_cast<std::size_t>(entry)] = true;
  while (!stack.empty()) {
    int b = stack.back();
    stack.pop_back();
    for (int s : blocks[static_cast<std::size_t>(b)].succ)
      if (!seen[static_cast<std::size_t>(s)]) {
        seen[static_cast<std::size_t>(s)] = true;
        stack.push_back(s);
      }
  }
  return seen;
}

std::vector<int> reverse_postorder(const Cfg& cfg) {
  std::vector<int> order;
  std::vector<char> state(cfg.blocks.size(), 0);  // 0 new, 1 open, 2 done
  // Iterative DFS; children pushed in reverse so traversal matches the
  // recursive formulation.
  std::vector<std::pair<int, std::size_t>> stack{{cfg.entry, 0}};
  state[static_cast<std::size_t>(cfg.entry)] = 1;
  while (!stack.empty()) {
    auto& [b, next] = stack.back();
    const auto& succ = cfg.blocks[static_cast<std::size_t>(b)].succ;
    if (next < succ.size()) {
      int s = succ[next++];
      if (state[static_cast<std::size_t>(s)] == 0) {
        state[static_cast<std::size_t>(s)] = 1;
        stack.emplace_back(s, 0);
      }
    } else {
      state[static_cast<std::size_t>(b)] = 2;
      order.push_back(b);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

}  // namespace

int Cfg::block_of_label(std::string_view label) const {
  auto it = label_to_block.find(label);
  return it == label_to_block.end() ? -1 : it->second;
}

int Cfg::block_of_instr(int instr_index) const {
  for (const auto& b : blocks)
    if (instr_index >= b.first && instr_index < b.last) return b.id;
  return -1;
}

int Cfg::edge_index(int from, int to) const {
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].from == from && edges[i].to == to) return static_cast<int>(i);
  return -1;
}

Cfg build_cfg(const IsaProgram& prog, const std::string& function) {
  int fidx = prog.function_index(function);
  if (fidx < 0) fail(ErrKind::Analysis, "unknown function '", function, "'");
  const IsaFunction& fn = prog.functions[static_cast<std::size_t>(fidx)];
  if (fn.instrs.empty()) fail(ErrKind::Analysis, "function '", function, "' has no instructions");
  int n = static_cast<int>(fn.instrs.size());

  // Leaders: entry, every label, and every instruction after a terminator.
  std::set<int> leaders{0};
  for (const auto& [name, idx] : fn.labels) leaders.insert(idx);
  for (int i = 0; i < n; ++i)
    if (is_block_terminator(fn.instrs[static_cast<std::size_t>(i)].op) && i + 1 < n)
      leaders.insert(i + 1);

  Cfg cfg;
  cfg.function = function;
  cfg.func_index = fidx;
  std::vector<int> starts(leaders.begin(), leaders.end());
  std::vector<int> block_at(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < starts.size(); ++i) {
    BasicBlock b;
    b.id = static_cast<int>(i);
    b.first = starts[i];
    b.last = i + 1 < starts.size() ? starts[i + 1] : n;
    if (auto lab = fn.label_at(b.first))
      b.name = *lab;
    else
      b.name = cat("b", b.id);
    for (int k = b.first; k < b.last; ++k) block_at[static_cast<std::size_t>(k)] = b.id;
    cfg.blocks.push_back(std::move(b));
  }

  auto target_block = [&](const std::string& label) {
    return block_at[static_cast<std::size_t>(*fn.label_index(label))];
  };
  auto add_edge = [&](int from, int to, EdgeKind kind) {
    cfg.edges.push_back({from, to, kind});
    cfg.blocks[static_cast<std::size_t>(from)].succ.push_back(to);
  };
  for (auto& b : cfg.blocks) {
    const IsaInstruction& last = fn.instrs[static_cast<std::size_t>(b.last - 1)];
    bool has_next = b.last < n;
    switch (last.op) {
      case Opcode::Bu:
        add_edge(b.id, target_block(last.target), EdgeKind::Refill);
        break;
      case Opcode::Bt:
      case Opcode::Bf:
        add_edge(b.id, target_block(last.target), EdgeKind::Refill);
        if (has_next)
          add_edge(b.id, b.id + 1, EdgeKind::FallThrough);
        else
          b.exit_block = true;
        break;
      case Opcode::Call:
        // Return resumes at the next instruction with a refilled buffer.
        if (has_next)
          add_edge(b.id, b.id + 1, EdgeKind::Refill);
        else
          b.exit_block = true;
        break;
      case Opcode::Ret:
        b.exit_block = true;
        break;
      default:
        if (has_next)
          add_edge(b.id, b.id + 1, EdgeKind::FallThrough);
        else
          b.exit_block = true;
        break;
    }
  }

  finish_cfg(cfg);
  for (const auto& b : cfg.blocks)
    if (auto lab = fn.label_at(b.first)) {
      // All labels pointing at the block's first instruction resolve to it.
      for (const auto& [lname, lidx] : fn.labels)
        if (lidx == b.first) cfg.label_to_block.emplace(lname, b.id);
    }
  return cfg;
}

void finish_cfg(Cfg& cfg) {
  // Drop blocks unreachable from the entry, keeping ids dense.
  std::vector<bool> live = reachable_set(cfg.blocks, cfg.entry);
  if (std::find(live.begin(), live.end(), false) != live.end()) {
    std::vector<int> remap(cfg.blocks.size(), -1);
    std::vector<BasicBlock> kept;
    for (auto& b : cfg.blocks) {
      if (!live[static_cast<std::size_t>(b.id)]) {
        cfg.warnings.push_back(
            cat("function '", cfg.function, "': unreachable block '", b.name, "' removed"));
        continue;
      }
      remap[static_cast<std::size_t>(b.id)] = static_cast<int>(kept.size());
      kept.push_back(b);
    }
    for (auto& b : kept) {
      b.id = remap[static_cast<std::size_t>(b.id)];
      for (auto& s : b.succ) s = remap[static_cast<std::size_t>(s)];
    }
    std::vector<CfgEdge> kept_edges;
    for (auto e : cfg.edges) {
      if (!live[static_cast<std::size_t>(e.from)] || !live[static_cast<std::size_t>(e.to)])
        continue;
      e.from = remap[static_cast<std::size_t>(e.from)];
      e.to = remap[static_cast<std::size_t>(e.to)];
      kept_edges.push_back(e);
    }
    cfg.blocks = std::move(kept);
    cfg.edges = std::move(kept_edges);
    cfg.entry = remap[static_cast<std::size_t>(cfg.entry)];
  }
  for (const auto& b : cfg.blocks)
    for (int s : b.succ) cfg.blocks[static_cast<std::size_t>(s)].pred.push_back(b.id);

  // Natural loops from dominator-identified back edges.
  std::vector<int> idom = compute_idom(cfg);
  auto dominates = [&](int a, int b) {
    while (true) {
      if (a == b) return true;
      if (b == cfg.entry) return false;
      b = idom[static_cast<std::size_t>(b)];
    }
  };
  std::map<int, std::set<int>> loop_blocks;  // header -> members
  std::set<std::pair<int, int>> back_edges;
  for (const auto& e : cfg.edges) {
    if (!dominates(e.to, e.from)) continue;
    back_edges.insert({e.from, e.to});
    auto& body = loop_blocks[e.to];
    body.insert(e.to);
    std::vector<int> work;
    if (!body.count(e.from)) {
      body.insert(e.from);
      work.push_back(e.from);
    }
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      for (int p : cfg.blocks[static_cast<std::size_t>(b)].pred)
        if (body.insert(p).second) work.push_back(p);
    }
  }

  // Reducibility: removing the back edges must leave an acyclic graph.
  {
    std::vector<int> indeg(cfg.blocks.size(), 0);
    for (const auto& e : cfg.edges)
      if (!back_edges.count({e.from, e.to})) ++indeg[static_cast<std::size_t>(e.to)];
    std::vector<int> ready;
    for (const auto& b : cfg.blocks)
      if (indeg[static_cast<std::size_t>(b.id)] == 0) ready.push_back(b.id);
    std::size_t removed = 0;
    while (!ready.empty()) {
      int b = ready.back();
      ready.pop_back();
      ++removed;
      for (int s : cfg.blocks[static_cast<std::size_t>(b)].succ)
        if (!back_edges.count({b, s}) && --indeg[static_cast<std::size_t>(s)] == 0)
          ready.push_back(s);
    }
    if (removed != cfg.blocks.size()) {
      std::ostringstream os;
      os << "irreducible control flow in function '" << cfg.function << "'; offending edges:";
      // Report edges inside the residual cyclic region.
      for (const auto& e : cfg.edges)
        if (!back_edges.count({e.from, e.to}) && indeg[static_cast<std::size_t>(e.to)] > 0 &&
            indeg[static_cast<std::size_t>(e.from)] > 0)
          os << " " << cfg.blocks[static_cast<std::size_t>(e.from)].name << "->"
             << cfg.blocks[static_cast<std::size_t>(e.to)].name;
      fail(ErrKind::Analysis, os.str());
    }
  }

  for (auto& [header, body] : loop_blocks) {
    Loop lp;
    lp.header = header;
    lp.blocks.assign(body.begin(), body.end());
    cfg.loops.push_back(std::move(lp));
  }
  std::sort(cfg.loops.begin(), cfg.loops.end(),
            [](const Loop& a, const Loop& b) { return a.header < b.header; });
  for (std::size_t i = 0; i < cfg.loops.size(); ++i) {
    cfg.blocks[static_cast<std::size_t>(cfg.loops[i].header)].loop_header = true;
    // Parent: smallest other loop containing this header.
    std::size_t best_size = 0;
    for (std::size_t j = 0; j < cfg.loops.size(); ++j) {
      if (i == j) continue;
      const auto& cand = cfg.loops[j].blocks;
      if (!std::binary_search(cand.begin(), cand.end(), cfg.loops[i].header)) continue;
      if (best_size == 0 || cand.size() < best_size) {
        best_size = cand.size();
        cfg.loops[i].parent = static_cast<int>(j);
      }
    }
  }
  for (auto& b : cfg.blocks) {
    std::size_t best_size = 0;
    for (std::size_t j = 0; j < cfg.loops.size(); ++j) {
      const auto& cand = cfg.loops[j].blocks;
      if (!std::binary_search(cand.begin(), cand.end(), b.id)) continue;
      if (best_size == 0 || cand.size() < best_size) {
        best_size = cand.size();
        b.loop_id = static_cast<int>(j);
      }
    }
  }
}

std::vector<int> compute_idom(const Cfg& cfg) {
  // Cooper-Harvey-Kennedy iterative scheme over reverse postorder.
  std::vector<int> rpo = reverse_postorder(cfg);
  std::vector<int> rpo_pos(cfg.blocks.size(), -1);
  for (std::size_t i = 0; i < rpo.size(); ++i)
    rpo_pos[static_cast<std::size_t>(rpo[i])] = static_cast<int>(i);
  std::vector<int> idom(cfg.blocks.size(), -1);
  idom[static_cast<std::size_t>(cfg.entry)] = cfg.entry;
  auto intersect = [&](int a, int b) {
    while (a != b) {
      while (rpo_pos[static_cast<std::size_t>(a)] > rpo_pos[static_cast<std::size_t>(b)])
        a = idom[static_cast<std::size_t>(a)];
      while (rpo_pos[static_cast<std::size_t>(b)] > rpo_pos[static_cast<std::size_t>(a)])
        b = idom[static_cast<std::size_t>(b)];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (int b : rpo) {
      if (b == cfg.entry) continue;
      int new_idom = -1;
      for (int p : cfg.blocks[static_cast<std::size_t>(b)].pred) {
        if (idom[static_cast<std::size_t>(p)] < 0) continue;
        new_idom = new_idom < 0 ? p : intersect(p, new_idom);
      }
      if (new_idom >= 0 && idom[static_cast<std::size_t>(b)] != new_idom) {
        idom[static_cast<std::size_t>(b)] = new_idom;
        changed = true;
      }
    }
  }
  return idom;
}

CallGraph build_call_graph(const IsaProgram& prog) {
  CallGraph cg;
  std::size_t n = prog.functions.size();
  cg.callees.resize(n);
  cg.self_recursive.assign(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    std::set<int> outs;
    for (const auto& ins : prog.functions[i].instrs)
      if (ins.op == Opcode::Call) outs.insert(prog.function_index(ins.callee));
    cg.callees[i].assign(outs.begin(), outs.end());
    if (outs.count(static_cast<int>(i))) cg.self_recursive[i] = true;
  }
  // Topological order ignoring self-loops; a leftover cycle means mutual
  // recursion, which the analysis cannot bound.
  std::vector<int> indeg(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (int c : cg.callees[i])
      if (c != static_cast<int>(i)) ++indeg[static_cast<std::size_t>(i)];
  std::set<int> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.insert(static_cast<int>(i));
  std::vector<std::vector<int>> callers(n);
  for (std::size_t i = 0; i < n; ++i)
    for (int c : cg.callees[i])
      if (c != static_cast<int>(i)) callers[static_cast<std::size_t>(c)].push_back(static_cast<int>(i));
  while (!ready.empty()) {
    int f = *ready.begin();
    ready.erase(ready.begin());
    cg.order.push_back(f);
    for (int caller : callers[static_cast<std::size_t>(f)])
      if (--indeg[static_cast<std::size_t>(caller)] == 0) ready.insert(caller);
  }
  if (cg.order.size() != n) {
    std::ostringstream os;
    os << "mutual recursion between functions:";
    for (std::size_t i = 0; i < n; ++i)
      if (indeg[i] > 0) os << " '" << prog.functions[i].name << "'";
    fail(ErrKind::Analysis, os.str());
  }
  return cg;
}

BufferStep step_buffer_model(const IsaProgram& prog, const Cfg& cfg, int block, int entry_level) {
  const IsaFunction& fn = prog.functions[static_cast<std::size_t>(cfg.func_index)];
  const BasicBlock& b = cfg.blocks[static_cast<std::size_t>(block)];
  BufferStep st;
  int level = entry_level;
  for (int i = b.first; i < b.last; ++i) {
    const IsaInstruction& ins = fn.instrs[static_cast<std::size_t>(i)];
    if (level == 0) {
      // Starved: the stall slot performs a full refill burst.
      ++st.fnops;
      level = kBufferCapacity;
    }
    --level;  // the instruction leaves the buffer
    if (!is_memory_op(ins.op)) level = std::min(level + 1, kBufferCapacity);
  }
  st.guaranteed = st.fnops;  // in-block stalls are deterministic per entry level
  const IsaInstruction& last = fn.instrs[static_cast<std::size_t>(b.last - 1)];
  if (is_block_terminator(last.op)) {
    // Control transfer flushes the buffer; the refill stall at the target is
    // charged here. Conditional branches are charged on both outcomes in the
    // worst case, but only taken ones stall, so the guaranteed count skips
    // them.
    ++st.fnops;
    if (last.op != Opcode::Bt && last.op != Opcode::Bf) ++st.guaranteed;
  } else if (!b.succ.empty() && level == 0) {
    // Fall-through with a drained buffer: the successor's first issue would
    // stall, charged to the block that drained it.
    ++st.fnops;
    ++st.guaranteed;
    level = kBufferCapacity;
  }
  st.exit_level = level;
  return st;
}

void place_fnops(const IsaProgram& prog, Cfg& cfg) {
  // Possible buffer levels at block entry. Fall-through edges only go to the
  // next block in layout order, so one forward pass after seeding refill
  // targets covers every path.
  std::vector<std::set<int>> entry_levels(cfg.blocks.size());
  entry_levels[static_cast<std::size_t>(cfg.entry)].insert(kBufferCapacity);
  for (const auto& e : cfg.edges)
    if (e.kind == EdgeKind::Refill)
      entry_levels[static_cast<std::size_t>(e.to)].insert(kBufferCapacity);
  for (auto& b : cfg.blocks) {
    auto& levels = entry_levels[static_cast<std::size_t>(b.id)];
    if (levels.empty()) levels.insert(kBufferCapacity);  // defensive; entry is seeded
    int worst = 0, best = -1;
    std::set<int> exits;
    for (int lv : levels) {
      BufferStep st = step_buffer_model(prog, cfg, b.id, lv);
      worst = std::max(worst, st.fnops);
      best = best < 0 ? st.guaranteed : std::min(best, st.guaranteed);
      exits.insert(st.exit_level);
    }
    b.fnops = worst;
    b.fnops_min = best;
    for (const auto& e : cfg.edges)
      if (e.from == b.id && e.kind == EdgeKind::FallThrough)
        entry_levels[static_cast<std::size_t>(e.to)].insert(exits.begin(), exits.end());
  }
}

void characterize_cfg(const IsaProgram& prog, Cfg& cfg, const EnergyModel& model, int n_threads) {
  const IsaFunction& fn = prog.functions[static_cast<std::size_t>(cfg.func_index)];
  int dslots = div_issue_slots(model);
  for (auto& b : cfg.blocks) {
    if (b.fnops < 0 || b.fnops_min < 0)
      fail(ErrKind::Analysis, "fnop placement must run before characterization");
    Rat e = 0;
    BigInt slots = 0;
    for (int i = b.first; i < b.last; ++i) {
      Opcode op = fn.instrs[static_cast<std::size_t>(i)].op;
      e += instr_energy(model, op, n_threads);
      slots += op == Opcode::Div ? dslots : 1;
    }
    Rat fnop_e = instr_energy(model, Opcode::Fnop, n_threads);
    b.energy = e + Rat(b.fnops) * fnop_e;
    b.energy_min = e + Rat(b.fnops_min) * fnop_e;
    slots += b.fnops;
    b.slots = slots;
  }
  cfg.characterized = true;
  cfg.n_threads = n_threads;
}

std::string dump_cfg(const IsaProgram& prog, const Cfg& cfg) {
  const IsaFunction& fn = prog.functions[static_cast<std::size_t>(cfg.func_index)];
  std::ostringstream os;
  os << "function " << cfg.function << " blocks=" << cfg.blocks.size()
     << " loops=" << cfg.loops.size() << "\n";
  for (const auto& b : cfg.blocks) {
    os << "  block " << b.id << " '" << b.name << "' instrs=[" << b.first << "," << b.last << ")";
    if (b.fnops >= 0) os << " fnops=" << b.fnops;
    if (b.fnops_min >= 0 && b.fnops_min != b.fnops) os << " fnops_min=" << b.fnops_min;
    if (cfg.characterized) os << " energy=" << format_sig4(b.energy * 1000000000) << "nJ"
                              << " slots=" << b.slots;
    if (b.loop_header) os << " loop-header";
    if (b.loop_id >= 0) os << " loop=" << b.loop_id;
    if (b.exit_block) os << " exit";
    os << "\n";
    for (int i = b.first; i < b.last; ++i)
      os << "    " << opcode_name(fn.instrs[static_cast<std::size_t>(i)].op) << "\n";
    for (const auto& e : cfg.edges)
      if (e.from == b.id)
        os << "    -> " << e.to << " ("
           << (e.kind == EdgeKind::Refill ? "refill" : "fallthrough") << ")\n";
  }
  for (std::size_t i = 0; i < cfg.loops.size(); ++i) {
    const Loop& lp = cfg.loops[i];
    os << "  loop " << i << " header=" << lp.header << " parent=" << lp.parent << " blocks=[";
    for (std::size_t j = 0; j < lp.blocks.size(); ++j)
      os << (j ? "," : "") << lp.blocks[j];
    os << "]\n";
  }
  for (const auto& w : cfg.warnings) os << "  warning: " << w << "\n";
  return os.str();
}

}  // namespace wattbound
