#ifndef WATTBOUND_ENERGY_MODEL_HPP
#define WATTBOUND_ENERGY_MODEL_HPP

#include <array>
#include <map>
#include <string>

#include "wattbound/isa.hpp"
#include "wattbound/rational.hpp"

namespace wattbound {

// Per-instruction energy model of the target core. Powers are in watts,
// t_clk in seconds. Immutable after load; all evaluation is pure.
struct EnergyModel {
  Rat p_static;                         // static power
  Rat p_dyn_idle;                       // dynamic power at idle
  std::map<Opcode, Rat> p_instr;        // per-opcode dynamic power
  Rat overhead = 1;                     // inter-instruction overhead factor
  std::array<Rat, 4> occupancy_scale;   // pipeline occupancy scaling, index N_p-1
  Rat t_clk;                            // seconds per clock cycle
  int cycles_per_issue = 4;
  int div_cycles = 32;
};

// Energy of one issued instruction with n_active_threads runnable:
//   ((p_static + p_instr[op] * M_{N_p} * overhead) / N_p) * c * t_clk
// where N_p = min(n_active_threads, 4) and c = cycles_per_issue, except
// divide which completes in div_cycles.
Rat instr_energy(const EnergyModel& model, Opcode op, int n_active_threads);

// Energy of an idle window: (p_static + p_dyn_idle) * t_idle.
Rat idle_energy(const EnergyModel& model, const Rat& t_idle_seconds);

// Issue slots a divide occupies on its thread (other opcodes occupy one).
int div_issue_slots(const EnergyModel& model);

// Loads the `.em` key-value model format. Rejects files that do not cover
// every opcode (including fnop) and values violating the model invariants.
EnergyModel load_model(const std::string& text, const std::string& source_name = "<model>");
EnergyModel load_model_file(const std::string& path);

// Key-value rendering in canonical order; load(serialize(m)) == m.
std::string serialize_model(const EnergyModel& model);

}  // namespace wattbound

#endif
