#ifndef WATTBOUND_MULTITHREAD_HPP
#define WATTBOUND_MULTITHREAD_HPP

#include <string>
#include <vector>

#include "wattbound/analyze.hpp"

namespace wattbound {

// Aggregated bound for a constant-thread-count workload. All per-thread
// analyses run at the same active-thread count, so every instruction cost
// inside uses the same pipeline occupancy.
struct AggregateBound {
  int n_threads = 1;
  Rat total_energy;                // joules, summed over threads
  Rat wall_time;                   // seconds
  Rat per_thread_energy;           // farm only
  std::vector<Rat> stage_energy;   // pipeline only, producer first
  std::vector<Rat> stage_slots;    // pipeline only, issued-slot bounds
};

// Replicated identical threads, no inter-thread communication. Total is
// exactly n x the per-thread bound; wall time is the per-thread slot bound
// at the shared issue latency.
AggregateBound analyze_farm(const IsaProgram& prog, const ThreadSpec& spec,
                            const std::vector<Annotation>& annotations,
                            const EnergyModel& model);

// Streaming pipeline in steady state: stages communicate over channels that
// never block, fill and drain are out of scope. Each stage needs a loop
// bound on the items loop; per-item issue slots must agree across stages
// within `tolerance` (fraction of the slowest stage), else the workload is
// rejected as unbalanced.
AggregateBound analyze_pipeline(const IsaProgram& prog, const ThreadSpec& spec,
                                const std::vector<Annotation>& annotations,
                                const EnergyModel& model, const Rat& tolerance = Rat(1, 20));

// One farm analysis per thread count 1..4. When items_total > 0 the run
// splits a fixed task pool across threads: the annotation text may use the
// `$items` placeholder, bound to items_total / n per row, and counts that
// do not divide evenly are skipped. items_total == 0 keeps per-thread work
// fixed (pure replication).
struct EnergyTimeRow {
  int n_threads = 1;
  Rat energy;  // total across threads, joules
  Rat time;    // wall-clock bound, seconds
};
std::vector<EnergyTimeRow> energy_time_table(const IsaProgram& prog, const ThreadSpec& spec,
                                             const std::string& ann_text,
                                             const std::string& ann_name,
                                             const EnergyModel& model, long long items_total);

}  // namespace wattbound

#endif
