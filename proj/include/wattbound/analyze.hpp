#ifndef WATTBOUND_ANALYZE_HPP
#define WATTBOUND_ANALYZE_HPP

#include <string>
#include <vector>

#include "wattbound/cfg.hpp"
#include "wattbound/energy_model.hpp"
#include "wattbound/ipet.hpp"
#include "wattbound/isa.hpp"

namespace wattbound {

// Whole-program bound for one entry function. Callees are folded in
// bottom-up: every call site adds the callee's per-invocation bound to its
// block's cost, so the entry ILP sees one flat objective. Self-recursive
// functions need a `callbound` annotation; the body is bounded with the
// recursive call costed at zero and the result scaled by the activation
// count (max+1 when maximizing, 1 when minimizing — a lower bound may not
// assume the recursion happens).
struct AnalysisResult {
  BoundResult result;  // entry-function optimum, bound scaled by recursion
  Cfg cfg;             // characterized entry CFG (counts index into this)
  Rat slots;           // issued-slot upper bound incl. callees (time bounds)
  std::vector<std::string> warnings;  // CFG warnings from every analyzed function
};

AnalysisResult analyze_program(const IsaProgram& prog, const std::string& entry,
                               const std::vector<Annotation>& annotations,
                               const EnergyModel& model, int n_threads, Sense sense);

}  // namespace wattbound

#endif
