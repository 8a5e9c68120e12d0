#include "wattbound/energy_model.hpp"

#include <fstream>
#include <sstream>

#include "wattbound/diagnostics.hpp"

namespace wattbound {

Rat instr_energy(const EnergyModel& model, Opcode op, int n_active_threads) {
  if (n_active_threads < 1)
    fail(ErrKind::Model, "active thread count must be >= 1, got ", n_active_threads);
  auto it = model.p_instr.find(op);
  if (it == model.p_instr.end())
    fail(ErrKind::Model, "energy model has no entry for opcode '", opcode_name(op), "'");
  int np = pipeline_occupancy(n_active_threads);
  const Rat& m = model.occupancy_scale[static_cast<std::size_t>(np - 1)];
  int cycles = op == Opcode::Div ? model.div_cycles : model.cycles_per_issue;
  return (model.p_static + it->second * m * model.overhead) / np * cycles * model.t_clk;
}

Rat idle_energy(const EnergyModel& model, const Rat& t_idle_seconds) {
  if (t_idle_seconds < 0) fail(ErrKind::Model, "idle time must be non-negative");
  return (model.p_static + model.p_dyn_idle) * t_idle_seconds;
}

int div_issue_slots(const EnergyModel& model) {
  return (model.div_cycles + model.cycles_per_issue - 1) / model.cycles_per_issue;
}

namespace {

const Rat kMilli(1, 1000);
const Rat kNano(1, 1000000000);

void check_invariants(const EnergyModel& m, const std::string& src) {
  if (m.p_static < 0 || m.p_dyn_idle < 0)
    fail(ErrKind::Model, src, ": powers must be non-negative");
  for (const auto& [op, p] : m.p_instr)
    if (p < 0) fail(ErrKind::Model, src, ": pi.", opcode_name(op), " must be non-negative");
  if (m.overhead < 1) fail(ErrKind::Model, src, ": overhead must be >= 1");
  if (m.t_clk <= 0) fail(ErrKind::Model, src, ": t_clk must be positive");
  for (int i = 1; i < 4; ++i)
    if (m.occupancy_scale[i] < m.occupancy_scale[i - 1])
      fail(ErrKind::Model, src, ": occupancy scale m", i + 1, " must be >= m", i);
  if (m.div_cycles < 1) fail(ErrKind::Model, src, ": div_cycles must be >= 1");
}

}  // namespace

EnergyModel load_model(const std::string& text, const std::string& source_name) {
  EnergyModel model;
  std::array<bool, 4> have_m{};
  bool have_static = false, have_idle = false, have_overhead = false, have_tclk = false;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  int entries = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw.substr(0, raw.find('#'));
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrKind::Parse, source_name, ":", lineno, ": expected 'key = value'");
    auto trim = [](std::string s) {
      auto b2 = s.find_first_not_of(" \t");
      auto e2 = s.find_last_not_of(" \t");
      return b2 == std::string::npos ? std::string() : s.substr(b2, e2 - b2 + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    auto num = parse_decimal(value);
    if (!num) fail(ErrKind::Parse, source_name, ":", lineno, ": bad number '", value, "'");
    ++entries;
    if (key == "p_static_mw") {
      model.p_static = *num * kMilli;
      have_static = true;
    } else if (key == "p_dyn_idle_mw") {
      model.p_dyn_idle = *num * kMilli;
      have_idle = true;
    } else if (key == "overhead") {
      model.overhead = *num;
      have_overhead = true;
    } else if (key == "t_clk_ns") {
      model.t_clk = *num * kNano;
      have_tclk = true;
    } else if (key == "div_cycles") {
      model.div_cycles = static_cast<int>(numerator(*num));
      if (denominator(*num) != 1)
        fail(ErrKind::Parse, source_name, ":", lineno, ": div_cycles must be an integer");
    } else if (key.size() == 2 && key[0] == 'm' && key[1] >= '1' && key[1] <= '4') {
      int idx = key[1] - '1';
      model.occupancy_scale[static_cast<std::size_t>(idx)] = *num;
      have_m[static_cast<std::size_t>(idx)] = true;
    } else if (key.rfind("pi.", 0) == 0 && key.size() > 6 && key.substr(key.size() - 3) == "_mw") {
      std::string opname = key.substr(3, key.size() - 6);
      auto op = opcode_from_name(opname);
      if (!op) fail(ErrKind::Parse, source_name, ":", lineno, ": unknown opcode '", opname, "'");
      model.p_instr[*op] = *num * kMilli;
    } else {
      fail(ErrKind::Parse, source_name, ":", lineno, ": unknown key '", key, "'");
    }
  }
  if (entries == 0) fail(ErrKind::Parse, source_name, ": empty model file");
  if (!have_static) fail(ErrKind::Parse, source_name, ": missing p_static_mw");
  if (!have_idle) fail(ErrKind::Parse, source_name, ": missing p_dyn_idle_mw");
  if (!have_overhead) fail(ErrKind::Parse, source_name, ": missing overhead");
  if (!have_tclk) fail(ErrKind::Parse, source_name, ": missing t_clk_ns");
  for (int i = 0; i < 4; ++i)
    if (!have_m[static_cast<std::size_t>(i)])
      fail(ErrKind::Parse, source_name, ": missing m", i + 1);
  // Model coverage: every opcode, including the synthetic fnop.
  std::string missing;
  for (int i = 0; i < kNumOpcodes; ++i) {
    Opcode op = static_cast<Opcode>(i);
    if (!model.p_instr.count(op)) missing += std::string(missing.empty() ? "" : ", ") + opcode_name(op);
  }
  if (!missing.empty())
    fail(ErrKind::Model, source_name, ": model does not cover opcode(s): ", missing);
  check_invariants(model, source_name);
  return model;
}

EnergyModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrKind::Model, "cannot open model file '", path, "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_model(ss.str(), path);
}

namespace {

std::string rat_to_plain(const Rat& v) {
  // Model values are decimal by construction; render with enough digits to
  // round-trip (denominators are powers of ten after load).
  BigInt num = numerator(v), den = denominator(v);
  bool neg = num < 0;
  if (neg) num = -num;
  BigInt ip = num / den;
  BigInt rem = num % den;
  std::string out = (neg ? "-" : "") + ip.str();
  if (rem != 0) {
    std::string frac;
    for (int i = 0; i < 30 && rem != 0; ++i) {
      rem *= 10;
      frac += BigInt(rem / den).str();
      rem %= den;
    }
    out += "." + frac;
  }
  return out;
}

}  // namespace

std::string serialize_model(const EnergyModel& model) {
  const Rat kilo(1000);
  std::ostringstream os;
  os << "p_static_mw = " << rat_to_plain(model.p_static * kilo) << "\n";
  os << "p_dyn_idle_mw = " << rat_to_plain(model.p_dyn_idle * kilo) << "\n";
  os << "overhead = " << rat_to_plain(model.overhead) << "\n";
  os << "t_clk_ns = " << rat_to_plain(model.t_clk * Rat(1000000000)) << "\n";
  os << "div_cycles = " << model.div_cycles << "\n";
  for (int i = 0; i < 4; ++i)
    os << "m" << i + 1 << " = " << rat_to_plain(model.occupancy_scale[static_cast<std::size_t>(i)])
       << "\n";
  for (const auto& [op, p] : model.p_instr)
    os << "pi." << opcode_name(op) << "_mw = " << rat_to_plain(p * kilo) << "\n";
  return os.str();
}

}  // namespace wattbound
