#ifndef WATTBOUND_LP_HPP
#define WATTBOUND_LP_HPP

#include <map>
#include <string>
#include <vector>

#include "wattbound/rational.hpp"

namespace wattbound {

enum class Rel { Le, Eq, Ge };
enum class Sense { Maximize, Minimize };

struct LinConstraint {
  std::map<int, Rat> coef;  // variable index -> coefficient
  Rel rel = Rel::Le;
  Rat rhs;
  std::string tag;  // shown in infeasibility reports
};

// max/min c^T x subject to the constraints and x >= 0 componentwise.
struct LpProblem {
  Sense sense = Sense::Maximize;
  int num_vars = 0;
  std::vector<Rat> objective;  // dense, size num_vars
  std::vector<LinConstraint> constraints;
  std::vector<std::string> var_names;  // optional, diagnostics only
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Rat objective;
  std::vector<Rat> values;
  int unbounded_var = -1;  // witness variable when status == Unbounded
};

// Exact two-phase primal simplex with Bland's rule (continuous relaxation).
LpResult solve_lp(const LpProblem& p);

// Exact integer optimum via branch & bound over solve_lp. When
// `lexicographic` is set, the returned vector is the lexicographically
// smallest among all optimal integer solutions, making reports reproducible.
LpResult solve_ilp(const LpProblem& p, bool lexicographic = true);

// Deletion-filter irreducible infeasible subsystem of an LP-infeasible
// problem. Returns indices into p.constraints.
std::vector<int> find_iis(const LpProblem& p);

}  // namespace wattbound

#endif
