#include "wattbound/ir.hpp"

#include "test_util.hpp"

using namespace wattbound;

namespace {

IrProgram fixture(const std::string& name) {
  return parse_mir(read_fixture(name), name);
}

IrProgram parse(const std::string& text) { return parse_mir(text, "<test>"); }

const IrInstruction* instr_by_id(const IrProgram& p, int id) {
  for (const auto& fn : p.functions)
    for (const auto& b : fn.blocks)
      for (const auto& ins : b.instrs)
        if (ins.id == id) return &ins;
  return nullptr;
}

}  // namespace

TEST_CASE("parser: ids are dense and follow textual order") {
  IrProgram p = fixture("matmul.mir");
  CHECK(p.mem_words == 512);
  REQUIRE(p.functions.size() == 1);
  const IrFunction& fn = p.functions[0];
  CHECK(fn.name == "main");
  CHECK(fn.blocks.size() == 10);
  CHECK(fn.blocks[0].label == "entry");

  int n = 0;
  for (const auto& b : fn.blocks) n += static_cast<int>(b.instrs.size());
  std::vector<int> ids = ir_location_set(p);
  REQUIRE(static_cast<int>(ids.size()) == n);
  for (int i = 0; i < n; ++i) CHECK(ids[static_cast<std::size_t>(i)] == i + 1);

  CHECK(fn.blocks[0].instrs[0].op == IrOp::Load);
  CHECK(fn.blocks[0].instrs[0].id == 1);
  CHECK(fn.blocks[0].instrs[0].has_imm);
  CHECK(fn.blocks[0].instrs[0].imm == 0);
}

TEST_CASE("printer: canonical text survives a round trip") {
  for (const char* name : {"straight.mir", "diamond.mir", "loop.mir", "nested.mir",
                           "macc.mir", "phi_swap.mir", "call.mir", "matmul.mir",
                           "divergent.mir"}) {
    IrProgram p = parse_mir(read_fixture(name), name);
    std::string once = print_mir(p);
    IrProgram q = parse_mir(once, "<reprint>");
    CHECK_MESSAGE(print_mir(q) == once, name);
  }
}

TEST_CASE("parser: phi incomings, calls, and branches") {
  IrProgram p = fixture("diamond.mir");
  const IrFunction& fn = p.functions[0];
  CHECK(fn.params.empty());
  const IrBlock* join = fn.block("join");
  REQUIRE(join != nullptr);
  const IrInstruction& phi = join->instrs[0];
  CHECK(phi.op == IrOp::Phi);
  REQUIRE(phi.incomings.size() == 2);
  CHECK(phi.incomings[0].first == "big");
  CHECK(phi.incomings[0].second == "b2");
  const IrInstruction& br = fn.blocks[0].instrs.back();
  CHECK(br.op == IrOp::Br);
  CHECK(br.target_true == "small");
  CHECK(br.target_false == "big");

  IrProgram c = fixture("call.mir");
  REQUIRE(c.functions.size() == 2);
  REQUIRE(c.functions[0].params.size() == 2);
  CHECK(c.functions[0].params[0] == "x");
  const IrInstruction* call = instr_by_id(c, 6);
  REQUIRE(call != nullptr);
  CHECK(call->op == IrOp::Call);
  CHECK(call->callee == "leaf");
  REQUIRE(call->args.size() == 2);
  CHECK(call->args[0] == "a");
  const IrInstruction& leaf_ret = c.functions[0].blocks[0].instrs.back();
  CHECK(leaf_ret.op == IrOp::Ret);
  REQUIRE(leaf_ret.args.size() == 1);
  CHECK(leaf_ret.args[0] == "t");
}

TEST_CASE("parser: rejections") {
  auto bad = [&](const std::string& body, const std::string& needle) {
    std::string msg = expect_error([&] { parse(body); }, ErrKind::Parse);
    CHECK_MESSAGE(contains(msg, needle), msg, " should mention: ", needle);
  };

  bad("func @f() {\nentry:\n  %a = const 1\n  %a = const 2\n  ret\n}\n",
      "second assignment to '%a'");
  bad("func @f() {\nentry:\n  %b = add %a, %a\n  ret\n}\n", "use of undefined value '%a'");
  bad("func @f() {\nentry:\n  %a = const 1\n}\n", "does not end in br/jump/ret");
  bad("func @f() {\nentry:\n  ret\n  %a = const 1\n}\n", "terminator in the middle");
  bad("func @f() {\nentry:\n  jump nowhere\n}\n", "branch to unknown label 'nowhere'");
  bad("func @f() {\nentry:\n  call @g()\n  ret\n}\n", "call to unknown function '@g'");
  bad("func @g(%x, %y) {\nentry:\n  ret\n}\nfunc @f() {\nentry:\n  %a = const 1\n"
      "  call @g(%a)\n  ret\n}\n",
      "passes 1 arguments for 2 parameters");
  bad("func @f() {\nentry:\nentry:\n  ret\n}\n", "duplicate label");
  bad("func @f() {\nentry:\n  ret\n}\nfunc @f() {\nentry:\n  ret\n}\n",
      "duplicate function '@f'");
  bad("func @f(%a, %b, %c, %d, %e) {\nentry:\n  ret\n}\n",
      "calling convention passes at most 4");
  bad("func @f() {\nentry:\n  %c = const 1\n  br %c, t, t\nt:\n  ret\n}\n",
      "br with identical targets");
  bad("func @f() {\nentry:\n  ret\n", "unterminated function");
  bad("func @f() {\nentry:\n  ret\n}\nmem 64\n", "'mem' directive must precede");
  bad("%a = const 1\n", "instruction outside 'func'");
  bad("func @f() {\n  %a = const 1\n  ret\n}\n", "instruction before the first label");
  bad("func @f() {\nentry:\nsecond:\n  ret\n}\n", "block 'entry' is empty");
  bad("func @f() {\nentry:\n  %p = phi\n  ret\n}\n", "phi needs at least one incoming");
  bad("func @f() {\nentry:\n  %a = const 1\n  %p = phi [entry: %a]\n  ret\n}\n",
      "phi after a non-phi");
  bad("func @f() {\nentry:\n  add %a, %b\n  ret\n}\n", "add must assign its result");
  bad("func @f() {\nentry:\n  %a = const 1\n  %v = store %a, 0\n  ret\n}\n",
      "store does not produce a value");
  bad("func @f() {\nentry:\n  %a = frobnicate 1\n  ret\n}\n", "unknown operation");
  bad("func @f() {\nentry:\n  %a = const 1\n  %c = icmp weird, %a, %a\n  ret\n}\n",
      "unknown comparison");
  bad("func @f() {\nentry:\n  %a = const nope\n  ret\n}\n", "expected an integer");
  bad("", "no functions defined");
}

TEST_CASE("parser: phi incomings must match predecessors exactly") {
  // One incoming, two predecessors.
  std::string two_preds =
      "func @f() {\n"
      "entry:\n  %a = const 1\n  %c = icmp lt, %a, %a\n  br %c, l, r\n"
      "l:\n  jump join\n"
      "r:\n  jump join\n"
      "join:\n  %p = phi [l: %a]\n  ret\n}\n";
  std::string msg = expect_error([&] { parse(two_preds); }, ErrKind::Parse);
  CHECK(contains(msg, "has 1 incomings for 2 predecessors"));

  std::string not_pred =
      "func @f() {\n"
      "entry:\n  %a = const 1\n  jump join\n"
      "join:\n  %p = phi [elsewhere: %a]\n  ret\n}\n";
  msg = expect_error([&] { parse(not_pred); }, ErrKind::Parse);
  CHECK(contains(msg, "'elsewhere' is not a predecessor"));

  std::string ghost =
      "func @f() {\n"
      "entry:\n  %a = const 1\n  jump join\n"
      "join:\n  %p = phi [entry: %ghost]\n  ret\n}\n";
  msg = expect_error([&] { parse(ghost); }, ErrKind::Parse);
  CHECK(contains(msg, "undefined value '%ghost'"));
}

TEST_CASE("optimize: folding keeps ids, removal leaves holes") {
  IrProgram p = parse(
      "func @main() {\n"
      "entry:\n"
      "  %a = const 3\n"       // 1: dead after everything downstream folds
      "  %b = const 4\n"       // 2: likewise
      "  %c = add %a, %b\n"    // 3: folds to 7, then its consumer folds -> dead
      "  %d = mul %c, %b\n"    // 4: folds to const 28, stays (store reads it)
      "  %u = add %d, %a\n"    // 5: unused -> removed
      "  %z = const 0\n"       // 6: kept, the div still needs it
      "  %q = div %d, %z\n"    // 7: division by zero cannot fold or vanish
      "  %lost = load 9\n"     // 8: unused load -> removed
      "  store %d, 0\n"        // 9
      "  ret\n"                // 10
      "}\n");
  IrProgram o = optimize_ir(p);
  std::vector<int> ids = ir_location_set(o);
  CHECK(ids == std::vector<int>{4, 6, 7, 9, 10});

  const IrInstruction* d = instr_by_id(o, 4);
  REQUIRE(d != nullptr);
  CHECK(d->op == IrOp::Const);  // folded in place, same id, same name
  CHECK(d->imm == 28);
  CHECK(d->result == "d");
  const IrInstruction* q = instr_by_id(o, 7);
  CHECK(q->op == IrOp::Div);  // must still trap at run time

  // The original program is untouched.
  CHECK(ir_location_set(p).size() == 10);
}

TEST_CASE("optimize: division by a nonzero constant folds") {
  IrProgram o = optimize_ir(parse(
      "func @main() {\n"
      "entry:\n  %a = const 28\n  %b = const 4\n  %q = div %a, %b\n"
      "  store %q, 0\n  ret\n}\n"));
  const IrInstruction* q = instr_by_id(o, 3);
  REQUIRE(q != nullptr);
  CHECK(q->op == IrOp::Const);
  CHECK(q->imm == 7);
}

TEST_CASE("optimize: comparisons fold and phis can die") {
  IrProgram o = optimize_ir(parse(
      "func @main() {\n"
      "entry:\n"
      "  %x = const 9\n"
      "  %t = const 10\n"
      "  %c = icmp lt, %x, %t\n"
      "  br %c, a, b\n"
      "a:\n  jump join\n"
      "b:\n  jump join\n"
      "join:\n  %dead = phi [a: %x], [b: %t]\n  store %c, 0\n  ret\n}\n"));
  const IrInstruction* c = instr_by_id(o, 3);
  CHECK(c->op == IrOp::Const);
  CHECK(c->imm == 1);
  CHECK(instr_by_id(o, 7) == nullptr);  // the unused phi is gone
}

TEST_CASE("optimize: a loop-carried program is a fixpoint already") {
  IrProgram p = fixture("matmul.mir");
  CHECK(print_mir(optimize_ir(p)) == print_mir(p));
}

TEST_CASE("locations: stamped from ids, listed in order") {
  IrProgram p = assign_ir_locations(fixture("loop.mir"));
  for (const auto& fn : p.functions)
    for (const auto& b : fn.blocks)
      for (const auto& ins : b.instrs) CHECK(ins.loc == ins.id);
  std::vector<int> ids = ir_location_set(p);
  CHECK(std::is_sorted(ids.begin(), ids.end()));
}
