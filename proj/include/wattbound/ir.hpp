#ifndef WATTBOUND_IR_HPP
#define WATTBOUND_IR_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wattbound/isa.hpp"

namespace wattbound {

// A small SSA form one step above the machine: virtual registers instead of
// r0..r11, explicit phi nodes, and structured two-way branches. Programs at
// this level carry stable per-instruction ids so that machine code produced
// from them can point back at the line it implements.
enum class IrOp {
  Add,
  Sub,
  Mul,
  Div,
  Icmp,
  Phi,
  Const,
  Load,
  Store,
  Call,
  Br,
  Jump,
  Ret,
};

struct IrInstruction {
  int id = 0;          // dense 1..n over the whole program, in textual order
  IrOp op = IrOp::Const;
  std::string result;  // defined value name ("" when the op defines nothing)
  Cmp cmp = Cmp::Eq;   // Icmp only
  std::vector<std::string> args;  // value operands, in syntactic order
  std::int64_t imm = 0;           // Const value, or literal Load/Store address
  bool has_imm = false;
  // Phi: one (predecessor label, value) pair per incoming edge.
  std::vector<std::pair<std::string, std::string>> incomings;
  std::string target_true;   // Br: taken target; Jump: the target
  std::string target_false;  // Br only
  std::string callee;        // Call only
  int loc = 0;               // assigned location tag; 0 until stamped
  int line = 0;              // source line, for diagnostics
};

struct IrBlock {
  std::string label;
  std::vector<IrInstruction> instrs;  // non-empty; last one is the terminator
};

struct IrFunction {
  std::string name;
  std::vector<std::string> params;  // at most four, named like values
  std::vector<IrBlock> blocks;      // blocks[0] is the entry

  const IrBlock* block(const std::string& label) const {
    for (const IrBlock& b : blocks)
      if (b.label == label) return &b;
    return nullptr;
  }
};

struct IrProgram {
  std::vector<IrFunction> functions;
  std::int64_t mem_words = 256;

  const IrFunction* find_function(const std::string& name) const {
    for (const IrFunction& f : functions)
      if (f.name == name) return &f;
    return nullptr;
  }
  int function_index(const std::string& name) const {
    for (std::size_t i = 0; i < functions.size(); ++i)
      if (functions[i].name == name) return static_cast<int>(i);
    return -1;
  }
};

// Parses the textual form. Enforces SSA (one definition per value name),
// phi discipline (phis lead their block and carry exactly one incoming per
// predecessor), terminator discipline (every block ends in exactly one
// br/jump/ret and has none in its interior), defined operands, known branch
// targets and callees, and call arity matching the callee's parameter list.
// Instruction ids come out dense, 1..n in textual order.
IrProgram parse_mir(const std::string& text, const std::string& source_name);

// Canonical text form; parse_mir(print_mir(p)) reproduces a freshly parsed
// program exactly. Ids are positional, so a program whose id sequence has
// holes (after optimization) gets renumbered by the round trip.
std::string print_mir(const IrProgram& prog);

// Constant folding plus dead-code removal, iterated to a fixpoint. Folded
// instructions become Const under their original id; removed ones simply
// disappear, leaving holes in the id sequence rather than renumbering, so
// location tags survive optimization. Division is never folded away when
// the divisor is zero (it must still trap) and never removed as dead.
IrProgram optimize_ir(const IrProgram& prog);

// Stamps every instruction's location tag with its own id.
IrProgram assign_ir_locations(IrProgram prog);

// The ids present in a program, ascending.
std::vector<int> ir_location_set(const IrProgram& prog);

}  // namespace wattbound

#endif  // WATTBOUND_IR_HPP
