#include <algorithm>
#include <set>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "wattbound/cfg.hpp"
#include "wattbound/energy_model.hpp"

using namespace wattbound;

namespace {

Cfg built(const std::string& fixture, const std::string& fn = "main") {
  IsaProgram p = parse_isa(read_fixture(fixture), fixture);
  return build_cfg(p, fn);
}

// Removal-based dominance: v dominates b iff b is unreachable from the
// entry once v is deleted (or v == b).
bool dominates_brute(const Cfg& cfg, int v, int b) {
  if (v == b) return true;
  std::vector<bool> seen(cfg.blocks.size(), false);
  std::vector<int> stack;
  if (cfg.entry != v) {
    seen[static_cast<std::size_t>(cfg.entry)] = true;
    stack.push_back(cfg.entry);
  }
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    for (int s : cfg.blocks[static_cast<std::size_t>(x)].succ)
      if (s != v && !seen[static_cast<std::size_t>(s)]) {
        seen[static_cast<std::size_t>(s)] = true;
        stack.push_back(s);
      }
  }
  return !seen[static_cast<std::size_t>(b)];
}

bool idom_dominates(const Cfg& cfg, const std::vector<int>& idom, int a, int b) {
  while (true) {
    if (a == b) return true;
    if (b == cfg.entry) return false;
    b = idom[static_cast<std::size_t>(b)];
  }
}

// Can `from` reach a node in `targets` without passing through `avoid`?
bool reaches_avoiding(const Cfg& cfg, int from, const std::set<int>& targets, int avoid) {
  if (from == avoid) return false;
  std::vector<bool> seen(cfg.blocks.size(), false);
  std::vector<int> stack{from};
  seen[static_cast<std::size_t>(from)] = true;
  while (!stack.empty()) {
    int x = stack.back();
    stack.pop_back();
    if (targets.count(x)) return true;
    for (int s : cfg.blocks[static_cast<std::size_t>(x)].succ)
      if (s != avoid && !seen[static_cast<std::size_t>(s)]) {
        seen[static_cast<std::size_t>(s)] = true;
        stack.push_back(s);
      }
  }
  return false;
}

}  // namespace

TEST_CASE("straight-line function is a single exit block") {
  Cfg cfg = built("straight1.isa");
  REQUIRE(cfg.blocks.size() == 1);
  CHECK(cfg.loops.empty());
  CHECK(cfg.blocks[0].exit_block);
  CHECK(cfg.blocks[0].succ.empty());
  CHECK(cfg.edges.empty());
  CHECK(cfg.warnings.empty());
}

TEST_CASE("diamond builds four blocks and no loops") {
  Cfg cfg = built("diamond.isa");
  REQUIRE(cfg.blocks.size() == 4);
  CHECK(cfg.loops.empty());
  int big = cfg.block_of_label("big");
  int join = cfg.block_of_label("join");
  REQUIRE(big >= 0);
  REQUIRE(join >= 0);
  CHECK(cfg.blocks[0].succ.size() == 2);
  CHECK(cfg.edge_index(0, big) >= 0);
  CHECK(cfg.edge_index(1, join) >= 0);
  CHECK(cfg.edge_index(big, join) >= 0);
  CHECK(cfg.edges[static_cast<std::size_t>(cfg.edge_index(0, big))].kind == EdgeKind::Refill);
  CHECK(cfg.edges[static_cast<std::size_t>(cfg.edge_index(big, join))].kind ==
        EdgeKind::FallThrough);
  CHECK(cfg.blocks[static_cast<std::size_t>(join)].exit_block);
  // Mutual consistency of successor/predecessor lists.
  for (const auto& b : cfg.blocks)
    for (int s : b.succ) {
      const auto& p = cfg.blocks[static_cast<std::size_t>(s)].pred;
      CHECK(std::count(p.begin(), p.end(), b.id) >= 1);
    }
}

TEST_CASE("counted loop: one loop whose header dominates the body") {
  Cfg cfg = built("loop.isa");
  REQUIRE(cfg.loops.size() == 1);
  int head = cfg.block_of_label("head");
  CHECK(cfg.loops[0].header == head);
  CHECK(cfg.blocks[static_cast<std::size_t>(head)].loop_header);
  // Independent dominance check over the small graph.
  std::vector<int> idom = compute_idom(cfg);
  for (int member : cfg.loops[0].blocks) {
    CHECK(dominates_brute(cfg, head, member));
    CHECK(idom_dominates(cfg, idom, head, member));
  }
  // Body and header are in the loop; preamble and exit are not.
  std::vector<int> want{head, cfg.block_of_label("head") + 1};
  std::sort(want.begin(), want.end());
  CHECK(cfg.loops[0].blocks == want);
  CHECK(cfg.blocks[0].loop_id == -1);
  CHECK(cfg.blocks[static_cast<std::size_t>(head)].loop_id == 0);
}

TEST_CASE("two-level nest: inner loop nests inside outer") {
  Cfg cfg = built("nested.isa");
  REQUIRE(cfg.loops.size() == 2);
  int outer_h = cfg.block_of_label("outer");
  int inner_h = cfg.block_of_label("inner");
  int outer_idx = cfg.loops[0].header == outer_h ? 0 : 1;
  int inner_idx = 1 - outer_idx;
  CHECK(cfg.loops[static_cast<std::size_t>(outer_idx)].header == outer_h);
  CHECK(cfg.loops[static_cast<std::size_t>(inner_idx)].header == inner_h);
  CHECK(cfg.loops[static_cast<std::size_t>(inner_idx)].parent == outer_idx);
  CHECK(cfg.loops[static_cast<std::size_t>(outer_idx)].parent == -1);
  // Inner members are a strict subset of outer members.
  const auto& in_b = cfg.loops[static_cast<std::size_t>(inner_idx)].blocks;
  const auto& out_b = cfg.loops[static_cast<std::size_t>(outer_idx)].blocks;
  CHECK(std::includes(out_b.begin(), out_b.end(), in_b.begin(), in_b.end()));
  CHECK(in_b.size() < out_b.size());
  // loop_id reports the innermost loop.
  CHECK(cfg.blocks[static_cast<std::size_t>(inner_h)].loop_id == inner_idx);
  CHECK(cfg.blocks[static_cast<std::size_t>(outer_h)].loop_id == outer_idx);
}

TEST_CASE("buffer model: four non-memory instructions cost no fnop") {
  IsaProgram p = parse_isa(
      "func main:\n  add r0, r0, r1\n  add r0, r0, r1\n  add r0, r0, r1\n  add r0, r0, r1\n");
  Cfg cfg = build_cfg(p, "main");
  place_fnops(p, cfg);
  REQUIRE(cfg.blocks.size() == 1);
  CHECK(cfg.blocks[0].fnops == 0);
}

TEST_CASE("buffer model: four consecutive memory ops starve the fetch once") {
  IsaProgram p = parse_isa(
      "func main:\n  ldw r0, r1, 0\n  ldw r0, r1, 1\n  stw r0, r1, 2\n  stw r0, r1, 3\n"
      "next:\n  nop\n");
  Cfg cfg = build_cfg(p, "main");
  place_fnops(p, cfg);
  REQUIRE(cfg.blocks.size() == 2);
  CHECK(cfg.blocks[0].fnops == 1);  // drained to empty at the hand-off
  CHECK(cfg.blocks[1].fnops == 0);
  // Hand-stepped: entry 4, each memory op issues without a fetch.
  BufferStep st = step_buffer_model(p, cfg, 0, 4);
  CHECK(st.fnops == 1);
  CHECK(st.exit_level == 4);  // refilled by the charged stall
}

TEST_CASE("buffer model: empty-body loop pays the branch refill each iteration") {
  IsaProgram p = parse_isa("func main:\nspin:\n  bu spin\n");
  Cfg cfg = build_cfg(p, "main");
  place_fnops(p, cfg);
  REQUIRE(cfg.blocks.size() == 1);
  CHECK(cfg.blocks[0].fnops == 1);
  REQUIRE(cfg.loops.size() == 1);
  CHECK(cfg.loops[0].header == 0);
}

TEST_CASE("buffer model: longer memory runs starve repeatedly") {
  // 9 memory ops from a full buffer: stall after the 4th and 8th, then the
  // 9th drains the refilled buffer partway.
  std::string text = "func main:\n";
  for (int i = 0; i < 9; ++i) text += "  ldw r0, r1, 0\n";
  IsaProgram p = parse_isa(text);
  Cfg cfg = build_cfg(p, "main");
  place_fnops(p, cfg);
  CHECK(cfg.blocks[0].fnops == 2);
}

TEST_CASE("conditional branches are charged on both outcomes") {
  Cfg cfg = built("diamond.isa");
  IsaProgram p = parse_isa(read_fixture("diamond.isa"), "diamond.isa");
  place_fnops(p, cfg);
  CHECK(cfg.blocks[0].fnops == 1);  // bt
  CHECK(cfg.blocks[1].fnops == 1);  // bu
  CHECK(cfg.blocks[static_cast<std::size_t>(cfg.block_of_label("big"))].fnops == 0);
  CHECK(cfg.blocks[static_cast<std::size_t>(cfg.block_of_label("join"))].fnops == 0);
}

TEST_CASE("unreachable code is dropped with a warning") {
  IsaProgram p = parse_isa(
      "func main:\n  bu end\n  nop\n  nop\nend:\n  nop\n");
  Cfg cfg = build_cfg(p, "main");
  REQUIRE(cfg.blocks.size() == 2);
  REQUIRE(cfg.warnings.size() == 1);
  CHECK(contains(cfg.warnings[0], "unreachable"));
  // Ids stay dense after removal.
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i)
    CHECK(cfg.blocks[i].id == static_cast<int>(i));
}

TEST_CASE("irreducible control flow is rejected with offending edges") {
  IsaProgram p = parse_isa(
      "func main:\n  bt r0, bb\naa:\n  nop\n  bu bb\nbb:\n  nop\n  bu aa\n");
  std::string msg = expect_error([&] { build_cfg(p, "main"); }, ErrKind::Analysis);
  CHECK(contains(msg, "irreducible"));
  CHECK(contains(msg, "->"));
  CHECK(contains(msg, "aa"));
}

TEST_CASE("characterization matches the per-instruction model") {
  EnergyModel m = load_model_file(fixture_path("default.em"));

  SUBCASE("single add block costs 0.316 nJ") {
    IsaProgram p = parse_isa("func main:\n  add r0, r0, r1\n");
    Cfg cfg = build_cfg(p, "main");
    place_fnops(p, cfg);
    characterize_cfg(p, cfg, m, 1);
    CHECK(cfg.blocks[0].energy == Rat(316, 1000) * Rat(1, 1000000000));
    CHECK(cfg.blocks[0].slots == 1);
  }
  SUBCASE("add + div block weights the divide by 32 cycles") {
    IsaProgram p = parse_isa("func main:\n  add r0, r0, r1\n  div r2, r0, r1\n");
    Cfg cfg = build_cfg(p, "main");
    place_fnops(p, cfg);
    characterize_cfg(p, cfg, m, 1);
    CHECK(cfg.blocks[0].energy ==
          instr_energy(m, Opcode::Add, 1) + instr_energy(m, Opcode::Div, 1));
    CHECK(cfg.blocks[0].slots == 1 + 8);
  }
  SUBCASE("empty synthetic block costs nothing") {
    IsaProgram p = parse_isa("func main:\n  nop\n");
    Cfg cfg = build_cfg(p, "main");
    cfg.blocks[0].first = cfg.blocks[0].last = 0;  // force an empty range
    cfg.blocks[0].fnops = 0;
    cfg.blocks[0].fnops_min = 0;
    characterize_cfg(p, cfg, m, 1);
    CHECK(cfg.blocks[0].energy == 0);
    CHECK(cfg.blocks[0].slots == 0);
  }
  SUBCASE("fnop charges are included") {
    Cfg cfg = built("diamond.isa");
    IsaProgram p = parse_isa(read_fixture("diamond.isa"), "diamond.isa");
    place_fnops(p, cfg);
    characterize_cfg(p, cfg, m, 1);
    Rat b0_real = instr_energy(m, Opcode::Ldc, 1) * 2 + instr_energy(m, Opcode::Icmp, 1) +
                  instr_energy(m, Opcode::Bt, 1);
    CHECK(cfg.blocks[0].energy == b0_real + instr_energy(m, Opcode::Fnop, 1));
  }
}

TEST_CASE("call graph orders callees before callers") {
  IsaProgram p = parse_isa(read_fixture("callchain.isa"), "callchain.isa");
  CallGraph cg = build_call_graph(p);
  int leaf = p.function_index("leaf");
  int mid = p.function_index("mid");
  int main_i = p.function_index("main");
  auto pos = [&](int f) {
    return std::find(cg.order.begin(), cg.order.end(), f) - cg.order.begin();
  };
  CHECK(pos(leaf) < pos(mid));
  CHECK(pos(mid) < pos(main_i));
  CHECK(!cg.self_recursive[static_cast<std::size_t>(leaf)]);

  IsaProgram rec = parse_isa("func f:\n  call f\n  ret\nfunc main:\n  call f\n");
  CallGraph rcg = build_call_graph(rec);
  CHECK(rcg.self_recursive[static_cast<std::size_t>(rec.function_index("f"))]);

  IsaProgram mut = parse_isa(
      "func a:\n  call b\n  ret\nfunc b:\n  call a\n  ret\nfunc main:\n  call a\n");
  std::string msg = expect_error([&] { build_call_graph(mut); }, ErrKind::Analysis);
  CHECK(contains(msg, "mutual recursion"));
  CHECK(contains(msg, "'a'"));
  CHECK(contains(msg, "'b'"));
}

TEST_CASE("dominators and loops agree with brute force on random small CFGs") {
  // Deterministic LCG; programs of 2..6 labeled blocks with random branches.
  std::uint64_t state = 0x2545F4914F6CDD1DULL;
  auto rng = [&]() {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<std::uint32_t>(state >> 33);
  };
  int built_ok = 0, rejected = 0;
  for (int iter = 0; iter < 300; ++iter) {
    int k = 2 + static_cast<int>(rng() % 5);
    std::string text = "func main:\n";
    for (int i = 0; i < k; ++i) {
      text += cat("L", i, ":\n  nop\n");
      // Branch-heavy mix so both reducible and irreducible shapes show up.
      std::uint32_t r = rng() % 8;
      if (r < 3)
        text += cat("  bt r0, L", rng() % k, "\n");
      else if (r < 5)
        text += cat("  bu L", rng() % k, "\n");
      else if (r == 5)
        text += "  ret\n";
      // else: fall through (or off the end)
    }
    IsaProgram p = parse_isa(text, "rand.isa");
    Cfg cfg;
    try {
      cfg = build_cfg(p, "main");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrKind::Analysis);
      CHECK(contains(e.what(), "irreducible"));
      ++rejected;
      continue;
    }
    ++built_ok;
    std::vector<int> idom = compute_idom(cfg);
    int n = static_cast<int>(cfg.blocks.size());
    // Dominance via the idom tree matches removal-based dominance.
    for (int v = 0; v < n; ++v)
      for (int b = 0; b < n; ++b)
        CHECK(idom_dominates(cfg, idom, v, b) == dominates_brute(cfg, v, b));
    // Loop headers = targets of brute-force back edges.
    std::set<int> brute_headers;
    std::set<std::pair<int, int>> brute_back;
    for (const auto& e : cfg.edges)
      if (dominates_brute(cfg, e.to, e.from)) {
        brute_headers.insert(e.to);
        brute_back.insert({e.from, e.to});
      }
    std::set<int> got_headers;
    for (const auto& lp : cfg.loops) got_headers.insert(lp.header);
    CHECK(got_headers == brute_headers);
    // Members: m is in loop(h) iff m reaches a back-edge source avoiding h.
    for (const auto& lp : cfg.loops) {
      std::set<int> sources;
      for (const auto& [u, v] : brute_back)
        if (v == lp.header) sources.insert(u);
      std::set<int> brute_members{lp.header};
      for (int mblk = 0; mblk < n; ++mblk)
        if (mblk != lp.header && reaches_avoiding(cfg, mblk, sources, lp.header) &&
            dominates_brute(cfg, lp.header, mblk))
          brute_members.insert(mblk);
      std::set<int> got(lp.blocks.begin(), lp.blocks.end());
      CHECK(got == brute_members);
      for (int mblk : lp.blocks) CHECK(dominates_brute(cfg, lp.header, mblk));
    }
  }
  // The generator must exercise both outcomes.
  CHECK(built_ok > 50);
  CHECK(rejected > 5);
}

TEST_CASE("cfg dump is deterministic and golden") {
  IsaProgram p = parse_isa(read_fixture("diamond.isa"), "diamond.isa");
  Cfg cfg = build_cfg(p, "main");
  place_fnops(p, cfg);
  EnergyModel m = load_model_file(fixture_path("default.em"));
  characterize_cfg(p, cfg, m, 1);
  std::string dump = dump_cfg(p, cfg);
  CHECK(dump == read_fixture("golden/diamond.cfg"));
  CHECK(dump_cfg(p, cfg) == dump);
}
