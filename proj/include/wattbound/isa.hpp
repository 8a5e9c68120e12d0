#ifndef WATTBOUND_ISA_HPP
#define WATTBOUND_ISA_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace wattbound {

// The analyzable/executable machine vocabulary. FNOP is a synthetic fetch
// stall issued by the processor; it never appears in source programs.
enum class Opcode {
  Add,
  Sub,
  Mul,
  Macc,
  Div,
  Ldc,
  Ldw,
  Stw,
  Mov,
  Icmp,
  Bt,
  Bf,
  Bu,
  Call,
  Ret,
  In,
  Out,
  Nop,
  Fnop,
};

inline constexpr int kNumOpcodes = 19;
inline constexpr int kNumRegisters = 12;  // r0..r11

enum class Cmp { Eq, Ne, Lt, Le, Gt, Ge };

const char* opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(std::string_view name);
const char* cmp_name(Cmp c);
std::optional<Cmp> cmp_from_name(std::string_view name);

// Memory/port instructions occupy the fetch path for their issue slot.
bool is_memory_op(Opcode op);
// Branch-like instructions that flush the instruction buffer when taken.
bool is_block_terminator(Opcode op);  // bt, bf, bu, call, ret

struct IsaInstruction {
  Opcode op = Opcode::Nop;
  Cmp cmp = Cmp::Eq;           // icmp only
  int rd = -1;                 // destination register
  int ra = -1;                 // first source register
  int rb = -1;                 // second source register
  std::int64_t imm = 0;        // ldc value, ldw/stw offset, in/out channel
  std::string target;          // branch label (bt/bf/bu)
  std::string callee;          // call target function
  int debug_loc = -1;          // IR instruction id from a !loc tag, -1 if untagged
  int line = 0;                // source line, diagnostics only
};

struct IsaFunction {
  std::string name;
  std::vector<IsaInstruction> instrs;
  // Label definitions in textual order; index is the instruction the label
  // precedes (== instrs.size() for a trailing label, which is rejected).
  std::vector<std::pair<std::string, int>> labels;

  std::optional<int> label_index(std::string_view label) const;
  // Label attached to instruction index i, if any.
  std::optional<std::string> label_at(int index) const;
};

struct ThreadSpec {
  enum class Pattern { Farm, Pipeline };
  Pattern pattern = Pattern::Farm;
  int n_threads = 1;                // farm
  std::string entry;                // farm entry function
  std::vector<std::string> stages;  // pipeline stage functions, producer first
  std::string items_loop;           // pipeline per-item loop header label
};

struct IsaProgram {
  std::vector<IsaFunction> functions;
  std::int64_t mem_words = 256;
  std::optional<ThreadSpec> thread_spec;

  const IsaFunction* find_function(std::string_view name) const;
  int function_index(std::string_view name) const;  // -1 if absent
};

// Parses the `.isa` text format. Throws Error(ErrKind::Parse) with
// line/column context on malformed input, undefined labels, arity or
// register errors. `source_name` is used in diagnostics only.
IsaProgram parse_isa(const std::string& text, const std::string& source_name = "<input>");

// Deterministic text rendering; parse(print(p)) is structurally identical
// to p.
std::string print_isa(const IsaProgram& prog);

// Cycles between successive instruction issues of one thread.
int issue_latency(int n_active_threads);

// Pipeline occupancy: threads sharing the four-stage pipeline.
int pipeline_occupancy(int n_active_threads);

}  // namespace wattbound

#endif
