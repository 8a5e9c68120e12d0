#ifndef WATTBOUND_LOWER_HPP
#define WATTBOUND_LOWER_HPP

#include <string>
#include <vector>

#include "wattbound/ir.hpp"
#include "wattbound/isa.hpp"

namespace wattbound {

// Machine code produced from an IR program, with enough side information to
// attribute every emitted instruction back to the IR. Each instruction
// carries the id of the IR instruction it implements in its !loc tag; `home`
// names the IR block it belongs to. `conditional` marks instructions that an
// execution may skip even when their home block runs (the compensation code
// a two-target branch or a critical edge forces out of line), so guaranteed
// lower-bound costs know to leave them out.
struct LowerResult {
  IsaProgram isa;
  std::vector<std::vector<std::string>> home;  // [function][instruction]
  std::vector<std::vector<char>> conditional;  // [function][instruction]

  // mul feeding a single add collapsed into one macc; both ids kept so cost
  // accounting can acknowledge or split the shared instruction.
  struct Fused {
    std::string function;
    int consumer = 0;  // the add; the macc carries this id
    int producer = 0;  // the mul
  };
  std::vector<Fused> fused;

  // Places where the machine program's shape stops matching the IR's: extra
  // unconditional branches from two-way splits and from critical-edge
  // compensation blocks. Costs stay attributed (conservatively, to the
  // branching block), but per-block agreement with an independent IR-level
  // estimate is no longer exact, so analyses surface these as warnings.
  struct Divergence {
    std::string function;
    int ir_id = 0;
    std::string detail;
  };
  std::vector<Divergence> divergences;
};

// Lowers SSA to machine code: picks instructions, replaces phis with edge
// copies (splitting critical edges), fuses mul+add pairs into macc, and
// assigns r0..r10 by greedy graph coloring with r11 reserved as the scratch
// for copy cycles and literal addresses. Values live across a call get
// callee-saved-free registers r4..r10; parameters are pinned to r0..r3 and
// must not be live across a call. Runs out of registers or breaks one of
// those rules -> analysis error.
LowerResult lower(const IrProgram& prog);

}  // namespace wattbound

#endif  // WATTBOUND_LOWER_HPP
