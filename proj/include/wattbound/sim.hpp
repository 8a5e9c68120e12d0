#ifndef WATTBOUND_SIM_HPP
#define WATTBOUND_SIM_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wattbound/energy_model.hpp"
#include "wattbound/isa.hpp"
#include "wattbound/rational.hpp"

namespace wattbound {

// One issued slot of one thread. Block ids index the per-function CFG the
// analyzer builds, so trace counts line up with static per-block results.
// FNOP records carry the block of the thread's last real instruction.
struct TraceRecord {
  long long cycle = 0;
  int thread = 0;
  int func = -1;
  int block = -1;
  Opcode op = Opcode::Nop;
  Rat energy;
};

struct SimTotals {
  Rat energy;            // issued contributions; channels never block, so no idle windows
  BigInt cycles;         // longest thread's issued slots x issue_latency(n_threads)
  long long slots = 0;   // issued slots of the longest-running thread
  long long fnops = 0;   // dynamic FNOPs across all threads
  int n_threads = 1;
  // function index -> per-block counters (indexed by CFG block id)
  std::map<int, std::vector<long long>> block_exec;
  std::map<int, std::vector<long long>> block_fnops;
  std::vector<std::int64_t> memory;  // final image, for result checks
};

// Register/memory presets. Registers apply to every thread's initial file
// (after the default r0 = thread id), memory to the shared word array.
struct SimInputs {
  std::map<int, std::int64_t> regs;
  std::map<std::int64_t, std::int64_t> mem;
};

// Line-oriented `.in` preset format: `r<k> = <int>` or `mem[<addr>] = <int>`.
SimInputs parse_inputs(const std::string& text, const std::string& source_name = "<in>");

struct SimOptions {
  long long max_slots = 10'000'000;  // whole-run issue budget over all threads
  std::function<void(const TraceRecord&)> trace;  // optional streaming sink
};

// Round-robin multi-threaded execution: every live thread issues one slot
// per rotation, a rotation lasts issue_latency(n_threads) cycles, divides
// occupy div_issue_slots rotations. Threads come from the program's
// `threads` block (farm replicas or pipeline stages) or default to one
// thread running `main`. Each thread starts with r0 = its index. Calls
// open a fresh register window with r0..r3 copied in; ret copies r0 back.
// Traps (division by zero, memory out of range, budget exhaustion) abort
// with a simulation error carrying thread/function/cycle context.
SimTotals run_sim(const IsaProgram& prog, const EnergyModel& model, const SimInputs& inputs,
                  const SimOptions& opts = {});

// Runs the same program over several input presets. The energy model has
// no data terms, so inputs that share a control path must land on the same
// total; the probe exists to make that limitation checkable.
std::vector<Rat> data_sensitivity_probe(const IsaProgram& prog, const EnergyModel& model,
                                        const std::vector<SimInputs>& inputs,
                                        const SimOptions& opts = {});

}  // namespace wattbound

#endif
