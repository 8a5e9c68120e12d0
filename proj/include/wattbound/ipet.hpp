#ifndef WATTBOUND_IPET_HPP
#define WATTBOUND_IPET_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wattbound/cfg.hpp"
#include "wattbound/lp.hpp"

namespace wattbound {

struct Annotation {
  enum class Kind { LoopBound, InfeasibleEdge, CallBound };
  Kind kind = Kind::LoopBound;
  std::string function;
  std::string header;                  // loopbound target label
  long long max_bound = -1;            // loopbound / callbound
  std::optional<long long> min_bound;  // loopbound only
  std::string edge_from, edge_to;      // infeasible target labels
  std::string callee;                  // callbound
  int line = 0;
};

// Replaces $name placeholders in annotation text. Placeholders without a
// binding raise annotation errors.
std::string substitute_vars(const std::string& text,
                            const std::map<std::string, std::string>& vars);

// Parses the line-oriented `.ann` format:
//   loopbound func=<f> header=<label> max=<int> [min=<int>]
//   infeasible func=<f> edge=<label>-><label>
//   callbound func=<f> callee=<f2> max=<int>
std::vector<Annotation> parse_annotations(const std::string& text,
                                          const std::string& source_name = "<ann>");

// Execution-count ILP over one characterized CFG. Variable layout: one
// count per block, then one per edge, then one virtual-exit count per
// exit block.
struct IlpSystem {
  LpProblem problem;
  int n_blocks = 0;
  int n_edges = 0;
  std::string function;
  std::vector<std::string> names;  // one per variable
};

// block_cost[b] is the objective weight of block b: its characterized
// energy (or issue-slot count for time bounds) plus any call-site addends
// the interprocedural driver composed in.
IlpSystem build_ilp(const Cfg& cfg, const std::vector<Rat>& block_cost,
                    const std::vector<Annotation>& annotations, Sense sense);

struct BoundResult {
  Sense sense = Sense::Maximize;
  LpStatus status = LpStatus::Optimal;
  Rat bound;
  std::vector<BigInt> block_counts;
  std::vector<BigInt> edge_counts;
};

// Exact integral optimum with canonical tie-breaking. Unsatisfiable
// constraints raise an annotation error that names an irreducible
// conflicting subset; an unbounded objective raises an analysis error
// naming an unconstrained variable.
BoundResult solve(const IlpSystem& sys);

struct PathOracle {
  bool available = false;  // false when max_paths was exceeded
  Rat max_energy;
  Rat min_energy;
  long long path_count = 0;
};

// Exhaustive feasible-path enumeration under the same annotation
// semantics (per-entry loop budgets, infeasible edges). Used as an
// independent check of the ILP results on small fixtures.
PathOracle enumerate_paths_oracle(const Cfg& cfg, const std::vector<Rat>& block_cost,
                                  const std::vector<Annotation>& annotations,
                                  long long max_paths);

}  // namespace wattbound

#endif
