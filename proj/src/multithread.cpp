#include "wattbound/multithread.hpp"

#include <algorithm>

#include "wattbound/diagnostics.hpp"

namespace wattbound {

AggregateBound analyze_farm(const IsaProgram& prog, const ThreadSpec& spec,
                            const std::vector<Annotation>& annotations,
                            const EnergyModel& model) {
  if (spec.pattern != ThreadSpec::Pattern::Farm)
    fail(ErrKind::Analysis, "thread block is not a farm");
  AnalysisResult per = analyze_program(prog, spec.entry, annotations, model, spec.n_threads,
                                       Sense::Maximize);
  AggregateBound agg;
  agg.n_threads = spec.n_threads;
  agg.per_thread_energy = per.result.bound;
  agg.total_energy = per.result.bound * Rat(spec.n_threads);
  agg.wall_time = per.slots * Rat(issue_latency(spec.n_threads)) * model.t_clk;
  return agg;
}

AggregateBound analyze_pipeline(const IsaProgram& prog, const ThreadSpec& spec,
                                const std::vector<Annotation>& annotations,
                                const EnergyModel& model, const Rat& tolerance) {
  if (spec.pattern != ThreadSpec::Pattern::Pipeline)
    fail(ErrKind::Analysis, "thread block is not a pipeline");
  int n = spec.n_threads;
  AggregateBound agg;
  agg.n_threads = n;

  std::vector<Rat> per_item;
  for (const auto& stage : spec.stages) {
    AnalysisResult r = analyze_program(prog, stage, annotations, model, n, Sense::Maximize);
    agg.stage_energy.push_back(r.result.bound);
    agg.stage_slots.push_back(r.slots);
    agg.total_energy += r.result.bound;

    long long items = -1;
    for (const auto& a : annotations)
      if (a.kind == Annotation::Kind::LoopBound && a.function == stage &&
          a.header == spec.items_loop)
        items = a.max_bound;
    if (items < 0)
      fail(ErrKind::Annotation, "pipeline stage '", stage, "' lacks a loopbound for items loop '",
           spec.items_loop, "'");
    if (items == 0)
      fail(ErrKind::Annotation, "pipeline stage '", stage, "' processes zero items");
    per_item.push_back(r.slots / Rat(items));
  }

  Rat slowest = *std::max_element(per_item.begin(), per_item.end());
  Rat fastest = *std::min_element(per_item.begin(), per_item.end());
  if (slowest > 0 && (slowest - fastest) > tolerance * slowest) {
    std::ostringstream os;
    os << "pipeline stages are unbalanced beyond " << format_sig4(tolerance * Rat(100))
       << "% (per-item issue slots:";
    for (std::size_t i = 0; i < per_item.size(); ++i)
      os << " " << spec.stages[i] << "=" << format_sig4(per_item[i]);
    os << ")";
    fail(ErrKind::Analysis, os.str());
  }

  Rat max_slots = *std::max_element(agg.stage_slots.begin(), agg.stage_slots.end());
  agg.wall_time = max_slots * Rat(issue_latency(n)) * model.t_clk;
  return agg;
}

std::vector<EnergyTimeRow> energy_time_table(const IsaProgram& prog, const ThreadSpec& spec,
                                             const std::string& ann_text,
                                             const std::string& ann_name,
                                             const EnergyModel& model, long long items_total) {
  if (spec.pattern != ThreadSpec::Pattern::Farm)
    fail(ErrKind::Analysis, "energy/time table needs a farm thread block");
  std::vector<EnergyTimeRow> rows;
  for (int n = 1; n <= 4; ++n) {
    std::string text = ann_text;
    if (items_total > 0) {
      if (items_total % n != 0) continue;
      text = substitute_vars(ann_text, {{"items", std::to_string(items_total / n)}});
    }
    std::vector<Annotation> anns = parse_annotations(text, ann_name);
    AnalysisResult per = analyze_program(prog, spec.entry, anns, model, n, Sense::Maximize);
    EnergyTimeRow row;
    row.n_threads = n;
    row.energy = per.result.bound * Rat(n);
    row.time = per.slots * Rat(issue_latency(n)) * model.t_clk;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace wattbound
