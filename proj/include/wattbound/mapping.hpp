#ifndef WATTBOUND_MAPPING_HPP
#define WATTBOUND_MAPPING_HPP

#include <map>
#include <string>
#include <vector>

#include "wattbound/energy_model.hpp"
#include "wattbound/ipet.hpp"
#include "wattbound/ir.hpp"
#include "wattbound/lower.hpp"

namespace wattbound {

// Energy attributed to one IR instruction: the machine instructions that
// implement it (as global indices: functions laid end to end in program
// order) and their summed per-execution cost under both fetch-stall senses.
// `tuning` names the attribution choices that placed cost here, e.g. a
// block's stall charge landing on its last instruction.
struct MappingEntry {
  std::vector<int> isa_indices;
  Rat energy;      // joules per execution, worst-case stalls
  Rat energy_min;  // joules per execution, guaranteed stalls
  std::vector<std::string> tuning;
};

// The instruction-level cost relation between an IR program and its lowered
// machine code, plus per-IR-block roll-ups for block-level analysis. Every
// machine instruction reachable in some CFG is charged to exactly one IR id,
// so the entry energies sum to `isa_total`, the machine program's own
// block-level total. Guaranteed block costs exclude compensation code that
// only some executions of the block reach.
struct MappingTable {
  std::map<int, MappingEntry> entries;
  std::map<std::string, std::map<std::string, Rat>> block_energy;      // fn -> label
  std::map<std::string, std::map<std::string, Rat>> block_energy_min;  // fn -> label
  Rat isa_total;
  std::vector<LowerResult::Divergence> divergences;
};

// Charges each reachable machine instruction's energy to the IR id in its
// !loc tag and rolls the totals up per IR block. A block's fetch-stall
// charge goes to the id of its last instruction. With `split_fused_cost`,
// half of each macc's energy moves from the fused add's id to the mul's id
// (the indices stay with the add, keeping the index partition disjoint).
MappingTable build_mapping(const IrProgram& ir, const LowerResult& lowered,
                           const EnergyModel& model, int n_threads,
                           bool split_fused_cost = false);

// Deterministic rendering: ids ascending, fixed key order, energies in
// nanojoules at four significant digits.
std::string mapping_json(const MappingTable& table);

struct IrAnalysis {
  BoundResult energy;  // joules
  std::vector<std::string> warnings;
};

// Whole-program energy bound computed at the IR level: lowers the program,
// rolls machine block costs up to IR blocks, and runs the same path ILP and
// bottom-up call composition as the machine-level analysis on the IR's own
// control-flow graphs. Loop and call annotations name IR labels here. Where
// lowering changed the program's shape (extra branches), the bound stays
// sound but conservative and a warning says so.
IrAnalysis ir_level_ecsa(const IrProgram& ir, const std::string& entry,
                         const std::vector<Annotation>& annotations,
                         const EnergyModel& model, int n_threads, Sense sense);

}  // namespace wattbound

#endif  // WATTBOUND_MAPPING_HPP
