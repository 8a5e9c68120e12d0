#include "wattbound/mapping.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "wattbound/cfg.hpp"
#include "wattbound/diagnostics.hpp"

namespace wattbound {

namespace {

void add_note(MappingEntry& e, const std::string& note) {
  if (std::find(e.tuning.begin(), e.tuning.end(), note) == e.tuning.end())
    e.tuning.push_back(note);
}

std::vector<bool> reachable_functions(const CallGraph& cg, int entry) {
  std::vector<bool> seen(cg.callees.size(), false);
  std::vector<int> stack{entry};
  seen[static_cast<std::size_t>(entry)] = true;
  while (!stack.empty()) {
    int f = stack.back();
    stack.pop_back();
    for (int c : cg.callees[static_cast<std::size_t>(f)])
      if (!seen[static_cast<std::size_t>(c)]) {
        seen[static_cast<std::size_t>(c)] = true;
        stack.push_back(c);
      }
  }
  return seen;
}

std::optional<long long> callbound_for(const std::vector<Annotation>& anns,
                                       const std::string& function) {
  for (const auto& a : anns)
    if (a.kind == Annotation::Kind::CallBound && a.function == function && a.callee == function)
      return a.max_bound;
  return std::nullopt;
}

// A block/edge skeleton over the IR's own blocks, shaped exactly like the
// machine-level CFG so the same ILP builder runs on it. Block costs come
// from the mapping, so instruction ranges stay unused.
Cfg synthesize_ir_cfg(const IrFunction& fn, int func_index, int n_threads) {
  Cfg cfg;
  cfg.function = fn.name;
  cfg.func_index = func_index;
  cfg.entry = 0;
  std::map<std::string, int> pos;
  for (std::size_t i = 0; i < fn.blocks.size(); ++i) {
    BasicBlock b;
    b.id = static_cast<int>(i);
    b.name = fn.blocks[i].label;
    pos[b.name] = b.id;
    cfg.blocks.push_back(std::move(b));
  }
  auto add_edge = [&](int from, const std::string& to) {
    cfg.edges.push_back({from, pos.at(to), EdgeKind::Refill});
    cfg.blocks[static_cast<std::size_t>(from)].succ.push_back(pos.at(to));
  };
  for (std::size_t i = 0; i < fn.blocks.size(); ++i) {
    const IrInstruction& t = fn.blocks[i].instrs.back();
    switch (t.op) {
      case IrOp::Br:
        add_edge(static_cast<int>(i), t.target_true);
        add_edge(static_cast<int>(i), t.target_false);
        break;
      case IrOp::Jump:
        add_edge(static_cast<int>(i), t.target_true);
        break;
      default:  // ret
        cfg.blocks[i].exit_block = true;
        break;
    }
  }
  finish_cfg(cfg);
  for (const auto& b : cfg.blocks) cfg.label_to_block.emplace(b.name, b.id);
  cfg.characterized = true;
  cfg.n_threads = n_threads;
  return cfg;
}

}  // namespace

MappingTable build_mapping(const IrProgram& ir, const LowerResult& lowered,
                           const EnergyModel& model, int n_threads, bool split_fused_cost) {
  const IsaProgram& prog = lowered.isa;
  MappingTable t;
  t.divergences = lowered.divergences;

  for (const IrFunction& fn : ir.functions) {
    for (const IrBlock& b : fn.blocks) {
      t.block_energy[fn.name][b.label] = Rat(0);
      t.block_energy_min[fn.name][b.label] = Rat(0);
      for (const IrInstruction& ins : b.instrs) t.entries[ins.id];
    }
  }

  std::vector<int> base(prog.functions.size() + 1, 0);
  for (std::size_t f = 0; f < prog.functions.size(); ++f)
    base[f + 1] = base[f] + static_cast<int>(prog.functions[f].instrs.size());
  std::vector<char> covered(static_cast<std::size_t>(base.back()), 0);

  for (std::size_t f = 0; f < prog.functions.size(); ++f)
    for (std::size_t i = 0; i < prog.functions[f].instrs.size(); ++i)
      t.entries[prog.functions[f].instrs[i].debug_loc].isa_indices.push_back(
          base[f] + static_cast<int>(i));

  Rat fnop_e = instr_energy(model, Opcode::Fnop, n_threads);
  for (std::size_t f = 0; f < prog.functions.size(); ++f) {
    const IsaFunction& fn = prog.functions[f];
    const std::string& fname = fn.name;
    Cfg cfg = build_cfg(prog, fname);
    place_fnops(prog, cfg);
    characterize_cfg(prog, cfg, model, n_threads);
    for (const auto& b : cfg.blocks) {
      for (int i = b.first; i < b.last; ++i) {
        const IsaInstruction& ins = fn.instrs[static_cast<std::size_t>(i)];
        MappingEntry& e = t.entries[ins.debug_loc];
        Rat cost = instr_energy(model, ins.op, n_threads);
        e.energy += cost;
        e.energy_min += cost;
        covered[static_cast<std::size_t>(base[f] + i)] = 1;
      }
      MappingEntry& tail = t.entries[fn.instrs[static_cast<std::size_t>(b.last - 1)].debug_loc];
      if (b.fnops > 0) {
        tail.energy += Rat(b.fnops) * fnop_e;
        add_note(tail, "fnop_attribution");
      }
      if (b.fnops_min > 0) {
        tail.energy_min += Rat(b.fnops_min) * fnop_e;
        add_note(tail, "fnop_attribution");
      }
      t.isa_total += b.energy;
      const std::string& home = lowered.home[f][static_cast<std::size_t>(b.first)];
      t.block_energy[fname][home] += b.energy;
      if (!lowered.conditional[f][static_cast<std::size_t>(b.first)])
        t.block_energy_min[fname][home] += b.energy_min;
    }
  }

  for (const auto& fu : lowered.fused) {
    add_note(t.entries[fu.consumer], "fused_pair");
    add_note(t.entries[fu.producer], "fused_pair");
    if (!split_fused_cost) continue;
    // Move half the shared instruction's energy onto the mul's id, if the
    // macc actually sits in reachable code.
    int fidx = prog.function_index(fu.function);
    const IsaFunction& fn = prog.functions[static_cast<std::size_t>(fidx)];
    for (std::size_t i = 0; i < fn.instrs.size(); ++i) {
      const IsaInstruction& ins = fn.instrs[i];
      if (ins.op != Opcode::Macc || ins.debug_loc != fu.consumer) continue;
      if (!covered[static_cast<std::size_t>(base[static_cast<std::size_t>(fidx)] +
                                            static_cast<int>(i))])
        continue;
      Rat share = instr_energy(model, Opcode::Macc, n_threads) / 2;
      t.entries[fu.consumer].energy -= share;
      t.entries[fu.consumer].energy_min -= share;
      t.entries[fu.producer].energy += share;
      t.entries[fu.producer].energy_min += share;
    }
  }

  for (const IrFunction& fn : ir.functions)
    for (const IrBlock& b : fn.blocks)
      for (const IrInstruction& ins : b.instrs)
        if (ins.op == IrOp::Phi && !t.entries[ins.id].isa_indices.empty())
          add_note(t.entries[ins.id], "phi_hoist");

  for (const auto& d : lowered.divergences) {
    auto it = t.entries.find(d.ir_id);
    if (it == t.entries.end()) continue;
    add_note(it->second, d.detail.rfind("critical edge", 0) == 0 ? "critical_edge"
                                                                 : "branch_split");
  }
  return t;
}

std::string mapping_json(const MappingTable& t) {
  std::ostringstream os;
  auto nj = [](const Rat& v) { return format_sig4(v * Rat(1000000000)); };
  os << "{\n  \"isa_total_nj\": " << nj(t.isa_total) << ",\n  \"instructions\": {\n";
  bool first = true;
  for (const auto& [id, e] : t.entries) {
    if (!first) os << ",\n";
    first = false;
    os << "    \"" << id << "\": {\"energy_nj\": " << nj(e.energy)
       << ", \"energy_min_nj\": " << nj(e.energy_min) << ", \"isa\": [";
    for (std::size_t i = 0; i < e.isa_indices.size(); ++i)
      os << (i ? ", " : "") << e.isa_indices[i];
    os << "], \"tuning\": [";
    for (std::size_t i = 0; i < e.tuning.size(); ++i)
      os << (i ? ", \"" : "\"") << e.tuning[i] << "\"";
    os << "]}";
  }
  os << "\n  },\n  \"divergences\": [";
  for (std::size_t i = 0; i < t.divergences.size(); ++i) {
    const auto& d = t.divergences[i];
    os << (i ? ",\n    " : "\n    ") << "{\"function\": \"" << d.function
       << "\", \"ir_id\": " << d.ir_id << ", \"detail\": \"" << d.detail << "\"}";
  }
  if (!t.divergences.empty()) os << "\n  ";
  os << "]\n}\n";
  return os.str();
}

IrAnalysis ir_level_ecsa(const IrProgram& ir, const std::string& entry,
                         const std::vector<Annotation>& annotations,
                         const EnergyModel& model, int n_threads, Sense sense) {
  int entry_idx = ir.function_index(entry);
  if (entry_idx < 0) fail(ErrKind::Analysis, cat("unknown function '", entry, "'"));

  for (const auto& a : annotations) {
    if (ir.function_index(a.function) < 0)
      fail(ErrKind::Annotation,
           cat("annotation (line ", a.line, ") names unknown function '", a.function, "'"));
    if (a.kind == Annotation::Kind::CallBound && a.callee != a.function)
      fail(ErrKind::Annotation,
           cat("callbound (line ", a.line, ") for '", a.function, "' -> '", a.callee,
               "': only self-recursive bounds are supported; non-recursive calls are"
               " folded in exactly"));
  }

  LowerResult lowered = lower(ir);
  MappingTable map = build_mapping(ir, lowered, model, n_threads);

  IrAnalysis out;
  out.energy.sense = sense;
  for (const auto& d : map.divergences)
    out.warnings.push_back(cat("function '@", d.function, "': ", d.detail,
                               "; its cost was charged to the branching block, so the"
                               " bound is conservative there"));

  // The lowered program has the same functions and call sites, so its call
  // graph orders the IR's bottom-up traversal too.
  CallGraph cg = build_call_graph(lowered.isa);
  std::vector<bool> live = reachable_functions(cg, entry_idx);
  bool entry_called = false;
  for (std::size_t f = 0; f < cg.callees.size(); ++f)
    if (live[f])
      for (int c : cg.callees[f])
        if (c == entry_idx) entry_called = true;

  Rat fnop_e = instr_energy(model, Opcode::Fnop, n_threads);
  std::vector<Rat> fn_energy(ir.functions.size());
  for (int f : cg.order) {
    if (!live[static_cast<std::size_t>(f)]) continue;
    const IrFunction& fn = ir.functions[static_cast<std::size_t>(f)];
    Cfg cfg = synthesize_ir_cfg(fn, f, n_threads);
    for (const auto& w : cfg.warnings) out.warnings.push_back(w);

    const auto& worst = map.block_energy.at(fn.name);
    const auto& guaranteed = map.block_energy_min.at(fn.name);
    std::vector<Rat> cost(cfg.blocks.size());
    for (const auto& b : cfg.blocks) {
      auto bi = static_cast<std::size_t>(b.id);
      cost[bi] = sense == Sense::Maximize ? worst.at(b.name) : guaranteed.at(b.name);
      const IrBlock* ib = fn.block(b.name);
      if (f == entry_idx && !entry_called && ib->instrs.back().op == IrOp::Ret)
        cost[bi] -= fnop_e;  // a halting ret never pays its refill stall
      for (const IrInstruction& ins : ib->instrs) {
        if (ins.op != IrOp::Call) continue;
        int callee = ir.function_index(ins.callee);
        if (callee == f) continue;
        cost[bi] += fn_energy[static_cast<std::size_t>(callee)];
      }
    }

    BoundResult r = solve(build_ilp(cfg, cost, annotations, sense));
    Rat mult(1);
    if (cg.self_recursive[static_cast<std::size_t>(f)]) {
      auto k = callbound_for(annotations, fn.name);
      if (!k)
        fail(ErrKind::Annotation,
             cat("recursive function '", fn.name, "' needs a callbound annotation"));
      mult = sense == Sense::Maximize ? Rat(*k + 1) : Rat(1);
    }
    fn_energy[static_cast<std::size_t>(f)] = r.bound * mult;
    if (f == entry_idx) {
      r.bound = r.bound * mult;
      out.energy = std::move(r);
    }
  }
  return out;
}

}  // namespace wattbound
