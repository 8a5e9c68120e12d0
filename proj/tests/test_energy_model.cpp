#include "doctest.h"
#include "test_util.hpp"
#include "wattbound/energy_model.hpp"

using namespace wattbound;

namespace {
EnergyModel fixture_model() { return load_model_file(fixture_path("default.em")); }
const Rat kNsPerS = Rat(1, 1000000000);
}  // namespace

TEST_CASE("add at one active thread costs 0.316 nJ under the fixture model") {
  EnergyModel m = fixture_model();
  // (20mW + 15mW * 1.0 * 1.3) / 1 * 4 cycles * 2ns, computed independently.
  Rat expect = (Rat(20, 1000) + Rat(15, 1000) * Rat(13, 10)) * 4 * (Rat(2) * kNsPerS);
  CHECK(instr_energy(m, Opcode::Add, 1) == expect);
  CHECK(expect == Rat(316, 1000) * kNsPerS);  // 0.316 nJ
  CHECK(format_sig4(expect * 1000000000) == "0.316");
}

TEST_CASE("add at four active threads costs 0.1414 nJ") {
  EnergyModel m = fixture_model();
  Rat expect = (Rat(20, 1000) + Rat(15, 1000) * Rat(26, 10) * Rat(13, 10)) / 4 * 4 * (Rat(2) * kNsPerS);
  CHECK(instr_energy(m, Opcode::Add, 4) == expect);
  CHECK(expect == Rat(1414, 10000) * kNsPerS);  // 0.1414 nJ
  CHECK(format_sig4(expect * 1000000000) == "0.1414");
}

TEST_CASE("divide is weighted by its 32-cycle completion") {
  EnergyModel m = fixture_model();
  Rat expect = (Rat(20, 1000) + Rat(18, 1000) * Rat(13, 10)) * 32 * (Rat(2) * kNsPerS);
  CHECK(instr_energy(m, Opcode::Div, 1) == expect);
  CHECK(div_issue_slots(m) == 8);
}

TEST_CASE("one microsecond of idle costs 30 nJ") {
  EnergyModel m = fixture_model();
  CHECK(idle_energy(m, Rat(1, 1000000)) == Rat(30) * kNsPerS);
  CHECK(idle_energy(m, Rat(0)) == 0);
  expect_error([&] { idle_energy(m, Rat(-1)); }, ErrKind::Model);
}

TEST_CASE("per-instruction energy decreases as threads fill the pipeline") {
  EnergyModel m = fixture_model();
  for (int op = 0; op < kNumOpcodes; ++op) {
    Opcode oc = static_cast<Opcode>(op);
    CHECK(instr_energy(m, oc, 1) > instr_energy(m, oc, 2));
    CHECK(instr_energy(m, oc, 2) > instr_energy(m, oc, 3));
    CHECK(instr_energy(m, oc, 3) > instr_energy(m, oc, 4));
  }
}

TEST_CASE("pipeline saturates at four threads") {
  EnergyModel m = fixture_model();
  CHECK(instr_energy(m, Opcode::Add, 4) == instr_energy(m, Opcode::Add, 6));
  CHECK(instr_energy(m, Opcode::Add, 4) == instr_energy(m, Opcode::Add, 8));
  CHECK(issue_latency(1) == 4);
  CHECK(issue_latency(4) == 4);
  CHECK(issue_latency(6) == 6);
  CHECK(pipeline_occupancy(1) == 1);
  CHECK(pipeline_occupancy(6) == 4);
}

TEST_CASE("model serialization round-trips") {
  EnergyModel m = fixture_model();
  EnergyModel again = load_model(serialize_model(m), "<roundtrip>");
  CHECK(again.p_static == m.p_static);
  CHECK(again.p_dyn_idle == m.p_dyn_idle);
  CHECK(again.overhead == m.overhead);
  CHECK(again.t_clk == m.t_clk);
  CHECK(again.div_cycles == m.div_cycles);
  for (int i = 0; i < 4; ++i)
    CHECK(again.occupancy_scale[static_cast<std::size_t>(i)] ==
          m.occupancy_scale[static_cast<std::size_t>(i)]);
  CHECK(again.p_instr == m.p_instr);
  CHECK(serialize_model(again) == serialize_model(m));
}

TEST_CASE("model errors") {
  std::string base = read_fixture("default.em");

  SUBCASE("empty file") {
    std::string msg = expect_error([&] { load_model("", "<t>"); }, ErrKind::Parse);
    CHECK(contains(msg, "empty"));
  }
  SUBCASE("missing opcode coverage names the opcode") {
    std::string text;
    std::istringstream in(base);
    std::string line;
    while (std::getline(in, line))
      if (line.rfind("pi.add_mw", 0) != 0) text += line + "\n";
    std::string msg = expect_error([&] { load_model(text, "<t>"); }, ErrKind::Model);
    CHECK(contains(msg, "does not cover"));
    CHECK(contains(msg, "add"));
  }
  SUBCASE("negative power rejected") {
    std::string msg =
        expect_error([&] { load_model(base + "\npi.add_mw = -1\n", "<t>"); }, ErrKind::Model);
    CHECK(contains(msg, "non-negative"));
  }
  SUBCASE("occupancy scale must be non-decreasing") {
    std::string msg = expect_error([&] { load_model(base + "\nm2 = 0.5\n", "<t>"); }, ErrKind::Model);
    CHECK(contains(msg, "m2"));
  }
  SUBCASE("overhead below one rejected") {
    expect_error([&] { load_model(base + "\noverhead = 0.9\n", "<t>"); }, ErrKind::Model);
  }
  SUBCASE("unknown key rejected") {
    expect_error([&] { load_model(base + "\nwhatever = 1\n", "<t>"); }, ErrKind::Parse);
  }
  SUBCASE("missing required key") {
    std::string msg = expect_error([&] { load_model("m1 = 1\n", "<t>"); }, ErrKind::Parse);
    CHECK(contains(msg, "missing"));
  }
  SUBCASE("thread count below one") {
    EnergyModel m = fixture_model();
    expect_error([&] { instr_energy(m, Opcode::Add, 0); }, ErrKind::Model);
  }
}
