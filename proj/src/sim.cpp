#include "wattbound/sim.hpp"

#include <array>
#include <deque>
#include <limits>
#include <sstream>

#include "wattbound/cfg.hpp"
#include "wattbound/diagnostics.hpp"

namespace wattbound {

namespace {

std::int64_t wrap_add(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

bool cmp_eval(Cmp c, std::int64_t a, std::int64_t b) {
  switch (c) {
    case Cmp::Eq: return a == b;
    case Cmp::Ne: return a != b;
    case Cmp::Lt: return a < b;
    case Cmp::Le: return a <= b;
    case Cmp::Gt: return a > b;
    case Cmp::Ge: return a >= b;
  }
  return false;
}

struct Frame {
  int func = -1;
  int pc = 0;
  std::array<std::int64_t, kNumRegisters> regs{};
};

struct Thread {
  int id = 0;
  int func = -1;
  int pc = 0;
  std::array<std::int64_t, kNumRegisters> regs{};
  std::vector<Frame> stack;
  int buffer = 4;  // instruction-buffer level
  int stall = 0;   // remaining rotations of an in-flight divide
  bool halted = false;
  long long slots = 0;
  int last_func = -1, last_block = -1;  // FNOP attribution target
};

}  // namespace

SimInputs parse_inputs(const std::string& text, const std::string& source_name) {
  SimInputs in;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream ls(line);
    std::string lhs, eq;
    if (!(ls >> lhs)) continue;
    auto bad = [&](const std::string& why) {
      fail(ErrKind::Parse, source_name, ":", lineno, ": ", why);
    };
    if (!(ls >> eq) || eq != "=") bad("expected '<target> = <int>'");
    std::int64_t value = 0;
    if (!(ls >> value)) bad("expected integer value");
    std::string rest;
    if (ls >> rest) bad("trailing text '" + rest + "'");
    if (lhs.size() >= 2 && lhs[0] == 'r' && lhs.find('[') == std::string::npos) {
      int r = -1;
      try {
        std::size_t used = 0;
        r = std::stoi(lhs.substr(1), &used);
        if (used != lhs.size() - 1) r = -1;
      } catch (...) {
      }
      if (r < 0 || r >= kNumRegisters) bad("register out of range in '" + lhs + "'");
      in.regs[r] = value;
    } else if (lhs.rfind("mem[", 0) == 0 && lhs.back() == ']') {
      std::int64_t a = -1;
      try {
        a = std::stoll(lhs.substr(4, lhs.size() - 5));
      } catch (...) {
        bad("bad address in '" + lhs + "'");
      }
      if (a < 0) bad("negative address");
      in.mem[a] = value;
    } else {
      bad("expected r<k> or mem[<addr>], got '" + lhs + "'");
    }
  }
  return in;
}

SimTotals run_sim(const IsaProgram& prog, const EnergyModel& model, const SimInputs& inputs,
                  const SimOptions& opts) {
  // Thread layout from the program's thread block.
  std::vector<int> entries;
  if (prog.thread_spec) {
    const ThreadSpec& spec = *prog.thread_spec;
    if (spec.pattern == ThreadSpec::Pattern::Farm) {
      int f = prog.function_index(spec.entry);
      if (f < 0) fail(ErrKind::Simulation, "unknown farm entry '", spec.entry, "'");
      entries.assign(static_cast<std::size_t>(spec.n_threads), f);
    } else {
      for (const auto& s : spec.stages) {
        int f = prog.function_index(s);
        if (f < 0) fail(ErrKind::Simulation, "unknown pipeline stage '", s, "'");
        entries.push_back(f);
      }
    }
  } else {
    int f = prog.function_index("main");
    if (f < 0) fail(ErrKind::Simulation, "program has no 'main' and no thread block");
    entries.push_back(f);
  }
  int n_threads = static_cast<int>(entries.size());
  long long latency = issue_latency(n_threads);

  // The analyzer's block view, for attribution. Built lazily per function.
  std::map<int, Cfg> cfgs;
  auto cfg_of = [&](int f) -> const Cfg& {
    auto it = cfgs.find(f);
    if (it == cfgs.end())
      it = cfgs.emplace(f, build_cfg(prog, prog.functions[static_cast<std::size_t>(f)].name)).first;
    return it->second;
  };

  SimTotals totals;
  totals.n_threads = n_threads;
  totals.memory.assign(static_cast<std::size_t>(prog.mem_words), 0);
  for (const auto& [addr, v] : inputs.mem) {
    if (addr < 0 || addr >= prog.mem_words)
      fail(ErrKind::Simulation, "memory preset mem[", addr, "] outside 0..", prog.mem_words - 1);
    totals.memory[static_cast<std::size_t>(addr)] = v;
  }
  auto counters_for = [&](int f) {
    if (prog.functions[static_cast<std::size_t>(f)].instrs.empty()) return;
    if (!totals.block_exec.count(f)) {
      std::size_t nb = cfg_of(f).blocks.size();
      totals.block_exec[f].assign(nb, 0);
      totals.block_fnops[f].assign(nb, 0);
    }
  };

  std::vector<Thread> threads(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    Thread& th = threads[static_cast<std::size_t>(t)];
    th.id = t;
    th.func = entries[static_cast<std::size_t>(t)];
    th.regs[0] = t;
    for (const auto& [r, v] : inputs.regs) th.regs[static_cast<std::size_t>(r)] = v;
    counters_for(th.func);
  }

  std::map<std::int64_t, std::deque<std::int64_t>> channels;
  long long rotations = 0;
  long long budget = opts.max_slots;
  const Rat fnop_energy = instr_energy(model, Opcode::Fnop, n_threads);
  int div_slots = div_issue_slots(model);

  auto at_end = [&](const Thread& th) {
    return th.pc >= static_cast<int>(prog.functions[static_cast<std::size_t>(th.func)].instrs.size());
  };

  while (true) {
    bool any_live = false;
    for (auto& th : threads) {
      if (!th.halted && th.stall == 0 && at_end(th) && th.stack.empty()) th.halted = true;
      if (!th.halted) any_live = true;
    }
    if (!any_live) break;
    ++rotations;
    if (rotations * n_threads > budget)
      fail(ErrKind::Simulation, "issue budget of ", budget, " slots exceeded");

    for (Thread& th : threads) {
      if (th.halted) continue;
      long long cycle = (rotations - 1) * latency + th.id;
      if (th.stall > 0) {
        --th.stall;
        continue;
      }
      if (at_end(th) && th.stack.empty()) continue;  // halts at next rotation start

      auto trap = [&](const std::string& why) {
        fail(ErrKind::Simulation, why, " (thread ", th.id, ", function '",
             prog.functions[static_cast<std::size_t>(th.func)].name, "', instruction ", th.pc,
             ", cycle ", cycle, ")");
      };

      if (th.buffer == 0) {
        // Starved fetch: the hardware issues an FNOP and the burst refill
        // lands before the next slot.
        th.buffer = 4;
        th.slots += 1;
        ++totals.fnops;
        totals.energy += fnop_energy;
        counters_for(th.last_func);
        totals.block_fnops[th.last_func][static_cast<std::size_t>(th.last_block)] += 1;
        if (opts.trace)
          opts.trace({cycle, th.id, th.last_func, th.last_block, Opcode::Fnop, fnop_energy});
        continue;
      }

      const IsaFunction& fn = prog.functions[static_cast<std::size_t>(th.func)];
      const IsaInstruction& ins = fn.instrs[static_cast<std::size_t>(th.pc)];
      const Cfg& cfg = cfg_of(th.func);
      int block = cfg.block_of_instr(th.pc);
      counters_for(th.func);
      if (th.pc == cfg.blocks[static_cast<std::size_t>(block)].first)
        totals.block_exec[th.func][static_cast<std::size_t>(block)] += 1;

      Rat e = instr_energy(model, ins.op, n_threads);
      totals.energy += e;
      if (opts.trace) opts.trace({cycle, th.id, th.func, block, ins.op, e});
      th.slots += ins.op == Opcode::Div ? div_slots : 1;
      if (ins.op == Opcode::Div) th.stall = div_slots - 1;
      th.last_func = th.func;
      th.last_block = block;

      th.buffer -= 1;
      if (!is_memory_op(ins.op)) th.buffer = std::min(th.buffer + 1, 4);

      auto& regs = th.regs;
      auto rd = [&]() -> std::int64_t& { return regs[static_cast<std::size_t>(ins.rd)]; };
      auto ra = [&]() { return regs[static_cast<std::size_t>(ins.ra)]; };
      auto rb = [&]() { return regs[static_cast<std::size_t>(ins.rb)]; };
      auto mem_at = [&](std::int64_t addr) -> std::int64_t& {
        if (addr < 0 || addr >= prog.mem_words)
          trap(cat("memory access at ", addr, " outside 0..", prog.mem_words - 1));
        return totals.memory[static_cast<std::size_t>(addr)];
      };
      auto jump_to = [&](const std::string& label) {
        th.pc = *fn.label_index(label);
        th.buffer = 0;  // taken transfer flushes the buffer
      };

      int next = th.pc + 1;
      switch (ins.op) {
        case Opcode::Add: rd() = wrap_add(ra(), rb()); th.pc = next; break;
        case Opcode::Sub: rd() = wrap_sub(ra(), rb()); th.pc = next; break;
        case Opcode::Mul: rd() = wrap_mul(ra(), rb()); th.pc = next; break;
        case Opcode::Macc: rd() = wrap_add(rd(), wrap_mul(ra(), rb())); th.pc = next; break;
        case Opcode::Div: {
          if (rb() == 0) trap("division by zero");
          // INT64_MIN / -1 wraps rather than trapping; keeps runs total.
          if (ra() == std::numeric_limits<std::int64_t>::min() && rb() == -1)
            rd() = ra();
          else
            rd() = ra() / rb();
          th.pc = next;
          break;
        }
        case Opcode::Ldc: rd() = ins.imm; th.pc = next; break;
        case Opcode::Ldw: rd() = mem_at(wrap_add(ra(), ins.imm)); th.pc = next; break;
        case Opcode::Stw: mem_at(wrap_add(rb(), ins.imm)) = ra(); th.pc = next; break;
        case Opcode::Mov: rd() = ra(); th.pc = next; break;
        case Opcode::Icmp: rd() = cmp_eval(ins.cmp, ra(), rb()) ? 1 : 0; th.pc = next; break;
        case Opcode::Bt:
          if (ra() != 0) jump_to(ins.target);
          else th.pc = next;
          break;
        case Opcode::Bf:
          if (ra() == 0) jump_to(ins.target);
          else th.pc = next;
          break;
        case Opcode::Bu: jump_to(ins.target); break;
        case Opcode::Call: {
          Frame fr;
          fr.func = th.func;
          fr.pc = next;
          fr.regs = regs;
          th.stack.push_back(fr);
          th.func = prog.function_index(ins.callee);
          th.pc = 0;
          std::array<std::int64_t, kNumRegisters> fresh{};
          for (int r = 0; r < 4; ++r) fresh[static_cast<std::size_t>(r)] = regs[static_cast<std::size_t>(r)];
          regs = fresh;
          th.buffer = 0;
          counters_for(th.func);
          break;
        }
        case Opcode::Ret: {
          if (th.stack.empty()) {
            th.halted = true;
            break;
          }
          Frame fr = th.stack.back();
          th.stack.pop_back();
          std::int64_t rv = regs[0];
          regs = fr.regs;
          regs[0] = rv;
          th.func = fr.func;
          th.pc = fr.pc;
          th.buffer = 0;
          break;
        }
        case Opcode::In: {
          auto& q = channels[ins.imm];
          if (q.empty()) {
            rd() = 0;  // non-blocking: empty channel reads zero
          } else {
            rd() = q.front();
            q.pop_front();
          }
          th.pc = next;
          break;
        }
        case Opcode::Out:
          channels[ins.imm].push_back(ra());
          th.pc = next;
          break;
        case Opcode::Nop: th.pc = next; break;
        case Opcode::Fnop: trap("fnop in program text");  // parser rejects; belt and braces
      }
    }
  }

  for (const auto& th : threads) totals.slots = std::max(totals.slots, th.slots);
  totals.cycles = BigInt(totals.slots) * latency;
  return totals;
}

std::vector<Rat> data_sensitivity_probe(const IsaProgram& prog, const EnergyModel& model,
                                        const std::vector<SimInputs>& inputs,
                                        const SimOptions& opts) {
  std::vector<Rat> energies;
  energies.reserve(inputs.size());
  for (const auto& in : inputs) energies.push_back(run_sim(prog, model, in, opts).energy);
  return energies;
}

}  // namespace wattbound
