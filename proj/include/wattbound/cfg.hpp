#ifndef WATTBOUND_CFG_HPP
#define WATTBOUND_CFG_HPP

#include <map>
#include <string>
#include <vector>

#include "wattbound/energy_model.hpp"
#include "wattbound/isa.hpp"
#include "wattbound/rational.hpp"

namespace wattbound {

// How control reaches the target of an edge. Refill edges (taken branches,
// calls, returns) flush and refill the instruction buffer, so the target
// starts from the canonical full-buffer state; fall-through edges carry the
// predecessor's buffer state across.
enum class EdgeKind { Refill, FallThrough };

struct CfgEdge {
  int from = -1;
  int to = -1;
  EdgeKind kind = EdgeKind::Refill;
};

struct BasicBlock {
  int id = -1;
  int first = 0;  // instruction index range [first, last)
  int last = 0;
  std::string name;  // leading label, or "b<id>"
  std::vector<int> succ;
  std::vector<int> pred;
  bool loop_header = false;
  int loop_id = -1;      // innermost containing loop, -1 if none
  int fnops = -1;        // worst-case FNOPs per execution, -1 until placed
  int fnops_min = -1;    // FNOPs guaranteed on every execution (lower bounds)
  Rat energy;            // joules per execution at worst-case FNOPs
  Rat energy_min;        // joules per execution at guaranteed FNOPs
  BigInt slots = 0;      // issue slots per execution incl. FNOPs, div weighted
  bool exit_block = false;  // ends in ret or falls off the function end
};

struct Loop {
  int header = -1;
  std::vector<int> blocks;  // sorted block ids, includes header
  int parent = -1;          // enclosing loop id, -1 if top level
};

struct Cfg {
  std::string function;
  int func_index = -1;
  std::vector<BasicBlock> blocks;
  std::vector<CfgEdge> edges;
  int entry = 0;
  std::vector<Loop> loops;
  std::vector<std::string> warnings;  // e.g. unreachable code reports
  std::map<std::string, int, std::less<>> label_to_block;
  bool characterized = false;
  int n_threads = 0;  // thread count the block costs were computed at

  int block_of_label(std::string_view label) const;  // -1 if absent
  int block_of_instr(int instr_index) const;
  int edge_index(int from, int to) const;  // -1 if absent
};

// Caller -> callee edges over function indices. Self-recursion is allowed
// (bounded later by call-count annotations); mutual recursion is rejected.
struct CallGraph {
  std::vector<std::vector<int>> callees;  // sorted, unique, self included
  std::vector<int> order;                 // callees before callers, self-loops ignored
  std::vector<bool> self_recursive;
};

CallGraph build_call_graph(const IsaProgram& prog);

// Builds the CFG of one function: leaders, edges, reachability (unreachable
// blocks are dropped with a warning), dominators and the natural-loop
// forest. Irreducible control flow is rejected.
Cfg build_cfg(const IsaProgram& prog, const std::string& function);

// Structural pass over a freshly assembled block/edge set: prunes blocks
// unreachable from the entry (with a warning), fills predecessor lists,
// computes the natural-loop forest from dominator-identified back edges,
// and rejects irreducible control flow. build_cfg calls this; the IR-level
// analyzer reuses it on CFGs it assembles itself.
void finish_cfg(Cfg& cfg);

// Immediate dominators for the reachable blocks of a CFG, entry maps to
// itself. Exposed for the brute-force cross-checks in tests.
std::vector<int> compute_idom(const Cfg& cfg);

// Fills BasicBlock::fnops/fnops_min under the deterministic
// instruction-buffer model: buffer of 4, one instruction fetched per issue
// slot except after memory or port instructions, starvation issues an FNOP
// that refills the buffer, and taken transfers flush (charged to the
// transferring block). The worst-case count charges conditional branches on
// both outcomes; the guaranteed count charges only stalls that occur on
// every execution, so minimizing bounds stay below any real run.
void place_fnops(const IsaProgram& prog, Cfg& cfg);

// Per-block energy at a constant active-thread count: the sum of real
// instruction energies plus the block's FNOP charge, at both the worst-case
// and the guaranteed FNOP count. Also fills the issue-slot weight used for
// time bounds.
void characterize_cfg(const IsaProgram& prog, Cfg& cfg, const EnergyModel& model, int n_threads);

// Deterministic text rendering used by golden tests (--dump-cfg).
std::string dump_cfg(const IsaProgram& prog, const Cfg& cfg);

// Steps the buffer model over one block from a given entry buffer level
// (test hook; place_fnops uses it internally).
struct BufferStep {
  int fnops = 0;       // incl. conditional-branch flush pessimism
  int guaranteed = 0;  // stalls that occur on every execution from this level
  int exit_level = 0;  // buffer level on fall-through exit, after any end charge
};
BufferStep step_buffer_model(const IsaProgram& prog, const Cfg& cfg, int block, int entry_level);

}  // namespace wattbound

#endif
