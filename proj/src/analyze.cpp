#include "wattbound/analyze.hpp"

#include <algorithm>
#include <optional>

#include "wattbound/diagnostics.hpp"

namespace wattbound {

namespace {

// Functions reachable from the entry over the call graph.
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

}  // namespace

AnalysisResult analyze_program(const IsaProgram& prog, const std::string& entry,
                               const std::vector<Annotation>& annotations,
                               const EnergyModel& model, int n_threads, Sense sense) {
  int entry_idx = prog.function_index(entry);
  if (entry_idx < 0) fail(ErrKind::Analysis, cat("unknown function '", entry, "'"));

  for (const auto& a : annotations) {
    if (prog.function_index(a.function) < 0)
      fail(ErrKind::Annotation,
           cat("annotation (line ", a.line, ") names unknown function '", a.function, "'"));
    if (a.kind == Annotation::Kind::CallBound && a.callee != a.function)
      fail(ErrKind::Annotation,
           cat("callbound (line ", a.line, ") for '", a.function, "' -> '", a.callee,
               "': only self-recursive bounds are supported; non-recursive calls are"
               " folded in exactly"));
  }

  CallGraph cg = build_call_graph(prog);
  std::vector<bool> live = reachable_functions(cg, entry_idx);

  // An entry function nobody calls halts its thread at ret, so the
  // ret-flush stall the block model charges can never issue; cancelling it
  // keeps single-path programs exact in both senses.
  bool entry_called = false;
  for (std::size_t f = 0; f < cg.callees.size(); ++f)
    if (live[f])
      for (int c : cg.callees[f])
        if (c == entry_idx) entry_called = true;

  std::vector<Rat> fn_energy(prog.functions.size());
  std::vector<Rat> fn_slots(prog.functions.size());
  AnalysisResult out;
  out.result.sense = sense;

  for (int f : cg.order) {
    if (!live[static_cast<std::size_t>(f)]) continue;
    const std::string& fname = prog.functions[static_cast<std::size_t>(f)].name;

    Cfg cfg = build_cfg(prog, fname);
    place_fnops(prog, cfg);
    characterize_cfg(prog, cfg, model, n_threads);
    for (const auto& w : cfg.warnings) out.warnings.push_back(w);

    // Per-block objective weights: own cost plus per-invocation callee
    // bounds for every call site in the block. Minimizing runs use the
    // guaranteed-FNOP cost so the bound stays below any real execution.
    // Recursive sites add zero here; the multiplier below accounts for
    // them.
    const IsaFunction& fn = prog.functions[static_cast<std::size_t>(f)];
    std::size_t nb = cfg.blocks.size();
    std::vector<Rat> ecost(nb), scost(nb);
    for (const auto& b : cfg.blocks) {
      auto bi = static_cast<std::size_t>(b.id);
      ecost[bi] = sense == Sense::Maximize ? b.energy : b.energy_min;
      scost[bi] = Rat(b.slots);
      if (f == entry_idx && !entry_called && b.last > b.first &&
          fn.instrs[static_cast<std::size_t>(b.last - 1)].op == Opcode::Ret) {
        ecost[bi] -= instr_energy(model, Opcode::Fnop, n_threads);
        scost[bi] -= 1;
      }
      for (int i = b.first; i < b.last; ++i) {
        const auto& ins = fn.instrs[static_cast<std::size_t>(i)];
        if (ins.op != Opcode::Call) continue;
        int callee = prog.function_index(ins.callee);
        if (callee == f) continue;
        ecost[bi] += fn_energy[static_cast<std::size_t>(callee)];
        scost[bi] += fn_slots[static_cast<std::size_t>(callee)];
      }
    }

    BoundResult energy = solve(build_ilp(cfg, ecost, annotations, sense));
    BoundResult slots = solve(build_ilp(cfg, scost, annotations, Sense::Maximize));

    Rat energy_mult(1), slots_mult(1);
    if (cg.self_recursive[static_cast<std::size_t>(f)]) {
      auto k = callbound_for(annotations, fname);
      if (!k)
        fail(ErrKind::Annotation,
             cat("recursive function '", fname, "' needs a callbound annotation"));
      // k bounds the recursive activations, so at most k+1 bodies run. A
      // minimizing bound cannot assume any recursion happens.
      slots_mult = Rat(*k + 1);
      energy_mult = sense == Sense::Maximize ? Rat(*k + 1) : Rat(1);
    }
    fn_energy[static_cast<std::size_t>(f)] = energy.bound * energy_mult;
    fn_slots[static_cast<std::size_t>(f)] = slots.bound * slots_mult;

    if (f == entry_idx) {
      energy.bound = energy.bound * energy_mult;
      out.result = std::move(energy);
      out.slots = slots.bound * slots_mult;
      out.cfg = std::move(cfg);
    }
  }
  return out;
}

}  // namespace wattbound
