#include "doctest.h"
#include "test_util.hpp"
#include "wattbound/isa.hpp"

using namespace wattbound;

namespace {

const char* kAllOps = R"(mem 64
func helper:
  add r0, r0, r1
  ret

func main:
  ldc r1, 5
  ldw r2, r1, 0
  stw r2, r1, 4
  mov r3, r2
  icmp lt, r4, r3, r1
  bt r4, done
  sub r5, r3, r1    !loc 7
  mul r6, r5, r5
  macc r7, r6, r5
  div r8, r7, r1
  in r9, 3
  out 3, r9
  call helper
  nop
done:
  bu end
end:
  nop
)";

}  // namespace

TEST_CASE("full-vocabulary program parses and round-trips") {
  IsaProgram p = parse_isa(kAllOps, "all.isa");
  REQUIRE(p.functions.size() == 2);
  CHECK(p.mem_words == 64);
  const IsaFunction* main_fn = p.find_function("main");
  REQUIRE(main_fn != nullptr);
  CHECK(main_fn->instrs.size() == 16);
  CHECK(main_fn->instrs[6].debug_loc == 7);
  CHECK(main_fn->instrs[0].debug_loc == -1);
  CHECK(main_fn->instrs[4].cmp == Cmp::Lt);
  CHECK(*main_fn->label_index("done") == 14);

  std::string once = print_isa(p);
  IsaProgram q = parse_isa(once, "again.isa");
  CHECK(print_isa(q) == once);
  REQUIRE(q.functions.size() == p.functions.size());
  for (std::size_t f = 0; f < p.functions.size(); ++f) {
    CHECK(q.functions[f].name == p.functions[f].name);
    REQUIRE(q.functions[f].instrs.size() == p.functions[f].instrs.size());
    for (std::size_t i = 0; i < p.functions[f].instrs.size(); ++i) {
      const auto& a = p.functions[f].instrs[i];
      const auto& b = q.functions[f].instrs[i];
      CHECK(a.op == b.op);
      CHECK(a.rd == b.rd);
      CHECK(a.ra == b.ra);
      CHECK(a.rb == b.rb);
      CHECK(a.imm == b.imm);
      CHECK(a.target == b.target);
      CHECK(a.callee == b.callee);
      CHECK(a.debug_loc == b.debug_loc);
    }
    CHECK(q.functions[f].labels == p.functions[f].labels);
  }
}

TEST_CASE("thread specs parse") {
  IsaProgram farm = parse_isa("threads { pattern=farm n=4 entry=main }\nfunc main:\n  nop\n");
  REQUIRE(farm.thread_spec.has_value());
  CHECK(farm.thread_spec->pattern == ThreadSpec::Pattern::Farm);
  CHECK(farm.thread_spec->n_threads == 4);
  CHECK(farm.thread_spec->entry == "main");

  IsaProgram pipe = parse_isa(
      "threads { pattern=pipeline stages=[s1,s2,s3] items_loop=item }\n"
      "func s1:\n  nop\nfunc s2:\n  nop\nfunc s3:\n  nop\n");
  REQUIRE(pipe.thread_spec.has_value());
  CHECK(pipe.thread_spec->pattern == ThreadSpec::Pattern::Pipeline);
  CHECK(pipe.thread_spec->n_threads == 3);
  CHECK(pipe.thread_spec->stages == std::vector<std::string>{"s1", "s2", "s3"});
  CHECK(pipe.thread_spec->items_loop == "item");
  CHECK(contains(print_isa(pipe), "stages=[s1,s2,s3]"));
}

TEST_CASE("parse errors carry location and kind") {
  auto bad = [](const std::string& text) {
    return expect_error([&] { parse_isa(text, "t.isa"); }, ErrKind::Parse);
  };
  CHECK(contains(bad("func f:\n  add r0, r1\n"), "expects 3 operand(s)"));
  CHECK(contains(bad("func f:\n  add r0, r1, r12\n"), "register out of range"));
  CHECK(contains(bad("func f:\n  frobnicate r0\n"), "unknown opcode"));
  CHECK(contains(bad("func f:\n  fnop\n"), "synthetic"));
  CHECK(contains(bad("func f:\n  bt r0, nowhere\n"), "undefined label"));
  CHECK(contains(bad("func f:\n  call ghost\n"), "undefined function"));
  CHECK(contains(bad("func f:\nx:\nx:\n  nop\n"), "duplicate label"));
  CHECK(contains(bad("func f:\n  nop\nfunc f:\n  nop\n"), "duplicate function"));
  CHECK(contains(bad("func f:\n  nop\ntrailing:\n"), "does not precede"));
  CHECK(contains(bad("  nop\n"), "outside 'func'"));
  CHECK(contains(bad("func f:\n  in r0, 64\n"), "channel"));
  CHECK(contains(bad("func f:\n  nop\nmem 32\n"), "precede"));
  CHECK(contains(bad("func f:\n  icmp zz, r0, r1, r2\n"), "predicate"));
  CHECK(contains(bad("func f:\n  nop\n  add r0\n"), ":3:"));  // line numbers in messages
}

TEST_CASE("called functions must end in ret or an unconditional branch") {
  std::string msg = expect_error(
      [] {
        parse_isa(
            "func f:\n  nop\n"
            "func main:\n  call f\n",
            "t.isa");
      },
      ErrKind::Parse);
  CHECK(contains(msg, "fall off"));

  // Entry (uncalled) functions may halt by running off the end.
  CHECK_NOTHROW(parse_isa("func main:\n  nop\n"));
  // Tail-loop via bu is fine for a called function.
  CHECK_NOTHROW(parse_isa("func f:\ntop:\n  bu top\nfunc main:\n  call f\n"));
}

TEST_CASE("thread spec validation") {
  expect_error([] { parse_isa("threads { pattern=farm n=9 entry=m }\nfunc m:\n  nop\n"); },
               ErrKind::Parse);
  expect_error([] { parse_isa("threads { pattern=farm n=2 entry=ghost }\nfunc m:\n  nop\n"); },
               ErrKind::Parse);
  expect_error(
      [] { parse_isa("threads { pattern=pipeline stages=[a,ghost] items_loop=l }\nfunc a:\n  nop\n"); },
      ErrKind::Parse);
  expect_error([] { parse_isa("threads { pattern=ring n=2 entry=m }\nfunc m:\n  nop\n"); },
               ErrKind::Parse);
}

TEST_CASE("opcode names round-trip") {
  for (int i = 0; i < kNumOpcodes; ++i) {
    Opcode op = static_cast<Opcode>(i);
    auto back = opcode_from_name(opcode_name(op));
    REQUIRE(back.has_value());
    CHECK(*back == op);
  }
  CHECK(!opcode_from_name("bogus"));
}
