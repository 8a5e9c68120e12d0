#include "wattbound/lower.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <variant>

#include "wattbound/diagnostics.hpp"

namespace wattbound {

namespace {

// Code between instruction selection and register assignment: machine-shaped
// operations over value names. "$..." names are synthesized temporaries.
struct VInstr {
  enum class K { Arith, Compare, LoadImm, Load, Store, Copy, CallK, BrK, JumpK, RetK };
  K kind = K::Arith;
  Opcode op = Opcode::Add;  // Arith only: add/sub/mul/div/macc
  Cmp cmp = Cmp::Eq;
  std::string dst, a, b;
  std::string acc;           // macc: the value accumulated into
  std::int64_t imm = 0;
  bool lit_addr = false;     // Load/Store address is `imm`
  std::vector<std::string> args;  // CallK
  std::string callee;
  std::string t1, t2;        // BrK taken/other; JumpK target
  int ir_id = 0;
};

struct VBlock {
  std::string label;
  std::string home;   // IR block whose work this is
  bool split = false; // critical-edge compensation block
  std::vector<VInstr> code;
};

constexpr int kScratch = 11;   // never allocated; cycle/address temporary
constexpr int kTopReg = 10;    // r0..r10 allocatable
constexpr int kFirstSafe = 4;  // r4.. survive calls (r0..r3 are the window)

class FunctionLowerer {
 public:
  FunctionLowerer(const IrFunction& fn, LowerResult& out) : fn_(fn), out_(out) {}

  IsaFunction run() {
    if (fn_.blocks.empty())
      fail(ErrKind::Analysis, "cannot lower empty function '@", fn_.name, "'");
    select();
    eliminate_phis();
    fuse_maccs();
    allocate();
    return emit();
  }

 private:
  [[noreturn]] void err(const std::string& msg) {
    fail(ErrKind::Analysis, "function '@", fn_.name, "': ", msg);
  }

  // --- instruction selection ------------------------------------------------

  void select() {
    for (const IrBlock& ib : fn_.blocks) {
      VBlock vb;
      vb.label = ib.label;
      vb.home = ib.label;
      labels_.insert(ib.label);
      for (const IrInstruction& ins : ib.instrs) {
        VInstr v;
        v.ir_id = ins.id;
        switch (ins.op) {
          case IrOp::Add:
          case IrOp::Sub:
          case IrOp::Mul:
          case IrOp::Div:
            v.kind = VInstr::K::Arith;
            v.op = ins.op == IrOp::Add   ? Opcode::Add
                   : ins.op == IrOp::Sub ? Opcode::Sub
                   : ins.op == IrOp::Mul ? Opcode::Mul
                                         : Opcode::Div;
            v.dst = ins.result;
            v.a = ins.args[0];
            v.b = ins.args[1];
            break;
          case IrOp::Icmp:
            v.kind = VInstr::K::Compare;
            v.cmp = ins.cmp;
            v.dst = ins.result;
            v.a = ins.args[0];
            v.b = ins.args[1];
            break;
          case IrOp::Const:
            v.kind = VInstr::K::LoadImm;
            v.dst = ins.result;
            v.imm = ins.imm;
            break;
          case IrOp::Load:
            v.kind = VInstr::K::Load;
            v.dst = ins.result;
            if (ins.has_imm) {
              v.lit_addr = true;
              v.imm = ins.imm;
            } else {
              v.a = ins.args[0];
            }
            break;
          case IrOp::Store:
            v.kind = VInstr::K::Store;
            v.a = ins.args[0];
            if (ins.has_imm) {
              v.lit_addr = true;
              v.imm = ins.imm;
            } else {
              v.b = ins.args[1];
            }
            break;
          case IrOp::Call:
            v.kind = VInstr::K::CallK;
            v.dst = ins.result;  // may be empty
            v.args = ins.args;
            v.callee = ins.callee;
            break;
          case IrOp::Br:
            v.kind = VInstr::K::BrK;
            v.a = ins.args[0];
            v.t1 = ins.target_true;
            v.t2 = ins.target_false;
            break;
          case IrOp::Jump:
            v.kind = VInstr::K::JumpK;
            v.t1 = ins.target_true;
            break;
          case IrOp::Ret:
            v.kind = VInstr::K::RetK;
            if (!ins.args.empty()) v.a = ins.args[0];
            break;
          case IrOp::Phi:
            continue;  // becomes edge copies below
        }
        vb.code.push_back(std::move(v));
      }
      vcode_.push_back(std::move(vb));
    }
  }

  // --- phi elimination --------------------------------------------------------

  VBlock* vblock(const std::string& label) {
    for (VBlock& vb : vcode_)
      if (vb.label == label) return &vb;
    return nullptr;
  }

  // Orders a parallel copy set into movs. A destination that other pending
  // copies still read is saved into a fresh scratch-pinned temporary first,
  // which breaks swap cycles.
  std::vector<VInstr> sequentialize(std::vector<std::array<std::string, 2>> pending,
                                    std::vector<int> ids) {
    std::vector<VInstr> out;
    auto copy = [&](const std::string& dst, const std::string& src, int id) {
      VInstr v;
      v.kind = VInstr::K::Copy;
      v.dst = dst;
      v.a = src;
      v.ir_id = id;
      out.push_back(std::move(v));
    };
    while (!pending.empty()) {
      bool progress = false;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        bool blocked = false;
        for (std::size_t j = 0; j < pending.size(); ++j)
          if (j != i && pending[j][1] == pending[i][0]) blocked = true;
        if (blocked) continue;
        copy(pending[i][0], pending[i][1], ids[i]);
        pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(i));
        ids.erase(ids.begin() + static_cast<std::ptrdiff_t>(i));
        progress = true;
        break;
      }
      if (progress) continue;
      // Pure cycle: every destination is still somebody's source.
      const std::string clobbered = pending.front()[0];
      std::string tmp = "$cyc" + std::to_string(n_cycle_temps_++);
      forced_[tmp] = kScratch;
      int tag = ids.front();
      for (std::size_t j = 0; j < pending.size(); ++j)
        if (pending[j][1] == clobbered) tag = ids[j];
      copy(tmp, clobbered, tag);
      for (auto& p : pending)
        if (p[1] == clobbered) p[1] = tmp;
    }
    return out;
  }

  std::string fresh_label(const std::string& base) {
    std::string name = base;
    int n = 0;
    while (labels_.count(name)) name = base + "." + std::to_string(n++);
    labels_.insert(name);
    return name;
  }

  void eliminate_phis() {
    // Predecessors per the IR, fixed before any retargeting.
    std::map<std::string, std::vector<std::string>> preds;
    std::map<std::string, int> n_succs;
    for (const IrBlock& ib : fn_.blocks) {
      const IrInstruction& t = ib.instrs.back();
      for (const std::string* lbl : {&t.target_true, &t.target_false}) {
        if (lbl->empty()) continue;
        preds[*lbl].push_back(ib.label);
        ++n_succs[ib.label];
      }
    }
    std::vector<VBlock> splits;
    for (const IrBlock& ib : fn_.blocks) {
      if (ib.instrs[0].op != IrOp::Phi) continue;
      for (const std::string& p : preds[ib.label]) {
        std::vector<std::array<std::string, 2>> copies;
        std::vector<int> ids;
        for (const IrInstruction& phi : ib.instrs) {
          if (phi.op != IrOp::Phi) break;
          for (const auto& [label, value] : phi.incomings) {
            if (label != p || value == phi.result) continue;
            copies.push_back({phi.result, value});
            ids.push_back(phi.id);
          }
        }
        if (copies.empty()) continue;
        std::vector<VInstr> seq = sequentialize(std::move(copies), std::move(ids));
        VBlock* pb = vblock(p);
        if (n_succs[p] == 1) {
          pb->code.insert(pb->code.end() - 1, seq.begin(), seq.end());
        } else if (preds[ib.label].size() == 1) {
          VBlock* sb = vblock(ib.label);
          sb->code.insert(sb->code.begin(), seq.begin(), seq.end());
        } else {
          // Critical edge: compensation code gets its own block, billed to
          // the predecessor since that is where the transfer grew.
          VInstr& term = pb->code.back();
          VBlock xb;
          xb.label = fresh_label(p + "." + ib.label + ".phi");
          xb.home = p;
          xb.split = true;
          xb.code = std::move(seq);
          VInstr j;
          j.kind = VInstr::K::JumpK;
          j.t1 = ib.label;
          j.ir_id = term.ir_id;
          xb.code.push_back(std::move(j));
          if (term.t1 == ib.label) term.t1 = xb.label;
          if (term.t2 == ib.label) term.t2 = xb.label;
          out_.divergences.push_back(
              {fn_.name, term.ir_id,
               "critical edge " + p + " -> " + ib.label + " needs a compensation block"});
          splits.push_back(std::move(xb));
        }
      }
    }
    for (VBlock& s : splits) vcode_.push_back(std::move(s));
  }

  // --- macc fusion -------------------------------------------------------------

  void fuse_maccs() {
    std::map<std::string, int> uses;
    auto count = [&](const std::string& v) {
      if (!v.empty()) ++uses[v];
    };
    for (const VBlock& vb : vcode_)
      for (const VInstr& v : vb.code) {
        count(v.a);
        count(v.b);
        count(v.acc);
        for (const std::string& arg : v.args) count(arg);
      }
    for (VBlock& vb : vcode_) {
      for (std::size_t i = 0; i + 1 < vb.code.size(); ++i) {
        VInstr& mul = vb.code[i];
        VInstr& add = vb.code[i + 1];
        if (mul.kind != VInstr::K::Arith || mul.op != Opcode::Mul) continue;
        if (add.kind != VInstr::K::Arith || add.op != Opcode::Add) continue;
        if (uses[mul.dst] != 1) continue;
        bool in_a = add.a == mul.dst, in_b = add.b == mul.dst;
        if (in_a == in_b) continue;  // exactly one operand must be the product
        VInstr m;
        m.kind = VInstr::K::Arith;
        m.op = Opcode::Macc;
        m.dst = add.dst;
        m.acc = in_a ? add.b : add.a;
        m.a = mul.a;
        m.b = mul.b;
        m.ir_id = add.ir_id;
        out_.fused.push_back({fn_.name, add.ir_id, mul.ir_id});
        vb.code[i] = std::move(m);
        vb.code.erase(vb.code.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      }
    }
  }

  // --- liveness, interference, coloring -----------------------------------------

  static std::optional<std::string> def_of(const VInstr& v) {
    switch (v.kind) {
      case VInstr::K::Arith:
      case VInstr::K::Compare:
      case VInstr::K::LoadImm:
      case VInstr::K::Load:
      case VInstr::K::Copy:
        return v.dst;
      case VInstr::K::CallK:
        if (!v.dst.empty()) return v.dst;
        return std::nullopt;
      default:
        return std::nullopt;
    }
  }

  static std::vector<std::string> uses_of(const VInstr& v) {
    std::vector<std::string> u;
    switch (v.kind) {
      case VInstr::K::Arith:
        u = {v.a, v.b};
        if (!v.acc.empty()) u.push_back(v.acc);
        break;
      case VInstr::K::Compare:
        u = {v.a, v.b};
        break;
      case VInstr::K::LoadImm:
        break;
      case VInstr::K::Load:
        if (!v.lit_addr) u.push_back(v.a);
        break;
      case VInstr::K::Store:
        u.push_back(v.a);
        if (!v.lit_addr) u.push_back(v.b);
        break;
      case VInstr::K::CallK:
        u = v.args;
        break;
      case VInstr::K::BrK:
        u.push_back(v.a);
        break;
      case VInstr::K::RetK:
        if (!v.a.empty()) u.push_back(v.a);
        break;
      case VInstr::K::JumpK:
        break;
      case VInstr::K::Copy:
        u.push_back(v.a);
        break;
    }
    return u;
  }

  void allocate() {
    // Backward liveness to a fixpoint over the block graph.
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < vcode_.size(); ++i) index[vcode_[i].label] = i;
    auto succs = [&](const VBlock& vb) {
      std::vector<std::size_t> s;
      const VInstr& t = vb.code.back();
      if (t.kind == VInstr::K::BrK) s = {index.at(t.t1), index.at(t.t2)};
      if (t.kind == VInstr::K::JumpK) s = {index.at(t.t1)};
      return s;
    };
    std::vector<std::set<std::string>> live_in(vcode_.size()), live_out(vcode_.size());
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t i = vcode_.size(); i-- > 0;) {
        const VBlock& vb = vcode_[i];
        std::set<std::string> out;
        for (std::size_t s : succs(vb))
          out.insert(live_in[s].begin(), live_in[s].end());
        std::set<std::string> in = out;
        for (std::size_t k = vb.code.size(); k-- > 0;) {
          if (auto d = def_of(vb.code[k])) in.erase(*d);
          for (const std::string& u : uses_of(vb.code[k])) in.insert(u);
        }
        if (out != live_out[i] || in != live_in[i]) {
          live_out[i] = std::move(out);
          live_in[i] = std::move(in);
          changed = true;
        }
      }
    }
    for (const std::string& v : live_in[0]) {
      if (std::find(fn_.params.begin(), fn_.params.end(), v) == fn_.params.end())
        err("value '%" + v + "' may be read before it is written");
    }

    // Interference: a definition conflicts with everything live after it,
    // except that a copy may share with its own source (sharing makes the
    // copy a no-op, which is exactly what we want).
    std::map<std::string, std::set<std::string>> adj;
    std::set<std::string> crosses;
    auto edge = [&](const std::string& x, const std::string& y) {
      adj[x].insert(y);
      adj[y].insert(x);
    };
    for (std::size_t i = 0; i < vcode_.size(); ++i) {
      std::set<std::string> live = live_out[i];
      const VBlock& vb = vcode_[i];
      for (std::size_t k = vb.code.size(); k-- > 0;) {
        const VInstr& v = vb.code[k];
        if (auto d = def_of(v)) {
          for (const std::string& l : live) {
            if (l == *d) continue;
            if (v.kind == VInstr::K::Copy && l == v.a) continue;
            edge(*d, l);
          }
          live.erase(*d);
        }
        if (v.kind == VInstr::K::Arith && v.op == Opcode::Macc) {
          // A macc whose destination misses the accumulator's register gets
          // a mov in front; the destination must not alias the multiplicands
          // or that mov would clobber them before the macc reads them.
          if (v.dst != v.a) edge(v.dst, v.a);
          if (v.dst != v.b) edge(v.dst, v.b);
        }
        if (v.kind == VInstr::K::CallK)
          for (const std::string& l : live) crosses.insert(l);
        for (const std::string& u : uses_of(v)) live.insert(u);
      }
    }

    for (std::size_t i = 0; i < fn_.params.size(); ++i) {
      forced_[fn_.params[i]] = static_cast<int>(i);
      if (crosses.count(fn_.params[i]))
        err("parameter '%" + fn_.params[i] +
            "' stays live across a call; copy it into a local first");
    }

    // Wishes that make later copies collapse into self-movs: copy partners,
    // the accumulator a macc folds into, and the r0-based call convention.
    std::map<std::string, std::vector<std::variant<int, std::string>>> wish;
    for (const VBlock& vb : vcode_) {
      for (const VInstr& v : vb.code) {
        switch (v.kind) {
          case VInstr::K::Copy:
            wish[v.dst].push_back(v.a);
            wish[v.a].push_back(v.dst);
            break;
          case VInstr::K::Arith:
            if (v.op == Opcode::Macc) {
              wish[v.dst].push_back(v.acc);
              wish[v.acc].push_back(v.dst);
            }
            break;
          case VInstr::K::CallK:
            if (!v.dst.empty()) wish[v.dst].push_back(0);
            for (std::size_t a = 0; a < v.args.size(); ++a)
              wish[v.args[a]].push_back(static_cast<int>(a));
            break;
          case VInstr::K::RetK:
            if (!v.a.empty()) wish[v.a].push_back(0);
            break;
          default:
            break;
        }
      }
    }

    // First-definition order: parameters, then each value at the point it is
    // first written. Greedy assignment in that order, wishes first.
    std::vector<std::string> order;
    std::set<std::string> seen;
    auto note = [&](const std::string& v) {
      if (seen.insert(v).second) order.push_back(v);
    };
    for (const std::string& p : fn_.params) note(p);
    for (const VBlock& vb : vcode_)
      for (const VInstr& v : vb.code)
        if (auto d = def_of(v)) note(*d);

    for (const std::string& v : order) {
      auto f = forced_.find(v);
      if (f != forced_.end()) {
        color_[v] = f->second;
        continue;
      }
      std::set<int> forbidden;
      for (const std::string& n : adj[v]) {
        auto c = color_.find(n);
        if (c != color_.end()) forbidden.insert(c->second);
      }
      int lo = crosses.count(v) ? kFirstSafe : 0;
      int picked = -1;
      for (const auto& w : wish[v]) {
        int c = -1;
        if (std::holds_alternative<int>(w)) {
          c = std::get<int>(w);
        } else {
          auto partner = color_.find(std::get<std::string>(w));
          if (partner != color_.end()) c = partner->second;
        }
        if (c >= lo && c <= kTopReg && !forbidden.count(c)) {
          picked = c;
          break;
        }
      }
      for (int c = lo; picked < 0 && c <= kTopReg; ++c)
        if (!forbidden.count(c)) picked = c;
      if (picked < 0)
        err("out of registers: no register left for '%" + v + "'");
      color_[v] = picked;
    }
  }

  // --- emission -----------------------------------------------------------------

  int reg(const std::string& v) const { return color_.at(v); }

  IsaFunction emit() {
    IsaFunction out;
    out.name = fn_.name;
    std::vector<std::string>& home = out_.home.emplace_back();
    std::vector<char>& cond = out_.conditional.emplace_back();
    std::string home_label;
    bool in_split = false;
    bool extra_cond = false;
    auto push = [&](IsaInstruction ins, int ir_id) {
      ins.debug_loc = ir_id;
      out.instrs.push_back(std::move(ins));
      home.push_back(home_label);
      cond.push_back(in_split || extra_cond);
    };
    auto mov = [&](int rd, int ra, int ir_id) {
      if (rd == ra) return;
      IsaInstruction m;
      m.op = Opcode::Mov;
      m.rd = rd;
      m.ra = ra;
      push(m, ir_id);
    };
    for (std::size_t i = 0; i < vcode_.size(); ++i) {
      const VBlock& vb = vcode_[i];
      home_label = vb.home;
      in_split = vb.split;
      const std::string next = i + 1 < vcode_.size() ? vcode_[i + 1].label : "";
      out.labels.emplace_back(vb.label, static_cast<int>(out.instrs.size()));
      for (const VInstr& v : vb.code) {
        switch (v.kind) {
          case VInstr::K::Arith: {
            if (v.op == Opcode::Macc) mov(reg(v.dst), reg(v.acc), v.ir_id);
            IsaInstruction m;
            m.op = v.op;
            m.rd = reg(v.dst);
            m.ra = reg(v.a);
            m.rb = reg(v.b);
            push(m, v.ir_id);
            break;
          }
          case VInstr::K::Compare: {
            IsaInstruction m;
            m.op = Opcode::Icmp;
            m.cmp = v.cmp;
            m.rd = reg(v.dst);
            m.ra = reg(v.a);
            m.rb = reg(v.b);
            push(m, v.ir_id);
            break;
          }
          case VInstr::K::LoadImm: {
            IsaInstruction m;
            m.op = Opcode::Ldc;
            m.rd = reg(v.dst);
            m.imm = v.imm;
            push(m, v.ir_id);
            break;
          }
          case VInstr::K::Load: {
            IsaInstruction m;
            m.op = Opcode::Ldw;
            m.rd = reg(v.dst);
            if (v.lit_addr) {
              IsaInstruction lc;
              lc.op = Opcode::Ldc;
              lc.rd = kScratch;
              lc.imm = v.imm;
              push(lc, v.ir_id);
              m.ra = kScratch;
            } else {
              m.ra = reg(v.a);
            }
            m.imm = 0;
            push(m, v.ir_id);
            break;
          }
          case VInstr::K::Store: {
            IsaInstruction m;
            m.op = Opcode::Stw;
            m.ra = reg(v.a);  // value
            if (v.lit_addr) {
              IsaInstruction lc;
              lc.op = Opcode::Ldc;
              lc.rd = kScratch;
              lc.imm = v.imm;
              push(lc, v.ir_id);
              m.rb = kScratch;
            } else {
              m.rb = reg(v.b);
            }
            m.imm = 0;
            push(m, v.ir_id);
            break;
          }
          case VInstr::K::Copy:
            mov(reg(v.dst), reg(v.a), v.ir_id);
            break;
          case VInstr::K::CallK: {
            emit_arg_moves(v, push);
            IsaInstruction c;
            c.op = Opcode::Call;
            c.callee = v.callee;
            push(c, v.ir_id);
            if (!v.dst.empty()) mov(reg(v.dst), 0, v.ir_id);
            break;
          }
          case VInstr::K::BrK: {
            IsaInstruction m;
            m.ra = reg(v.a);
            if (v.t2 == next) {
              m.op = Opcode::Bt;
              m.target = v.t1;
              push(m, v.ir_id);
            } else if (v.t1 == next) {
              m.op = Opcode::Bf;
              m.target = v.t2;
              push(m, v.ir_id);
            } else {
              m.op = Opcode::Bt;
              m.target = v.t1;
              push(m, v.ir_id);
              IsaInstruction u;
              u.op = Opcode::Bu;
              u.target = v.t2;
              extra_cond = true;  // only the fall-through path runs the bu
              push(u, v.ir_id);
              extra_cond = false;
              out_.divergences.push_back(
                  {fn_.name, v.ir_id,
                   "two-way branch needed a bt+bu pair (neither target follows)"});
            }
            break;
          }
          case VInstr::K::JumpK: {
            if (v.t1 == next) break;
            IsaInstruction m;
            m.op = Opcode::Bu;
            m.target = v.t1;
            push(m, v.ir_id);
            break;
          }
          case VInstr::K::RetK: {
            if (!v.a.empty()) mov(0, reg(v.a), v.ir_id);
            IsaInstruction m;
            m.op = Opcode::Ret;
            push(m, v.ir_id);
            break;
          }
        }
      }
    }
    return out;
  }

  // Arguments travel in r0..r3. Order the moves so no source is clobbered
  // before it is read, borrowing the scratch register for cycles.
  template <typename Push>
  void emit_arg_moves(const VInstr& call, Push&& push) {
    std::vector<std::array<int, 2>> pending;  // {target, source}
    for (std::size_t i = 0; i < call.args.size(); ++i) {
      int t = static_cast<int>(i), s = reg(call.args[i]);
      if (t != s) pending.push_back({t, s});
    }
    auto mov = [&](int rd, int ra) {
      IsaInstruction m;
      m.op = Opcode::Mov;
      m.rd = rd;
      m.ra = ra;
      push(m, call.ir_id);
    };
    while (!pending.empty()) {
      bool progress = false;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        bool blocked = false;
        for (std::size_t j = 0; j < pending.size(); ++j)
          if (j != i && pending[j][1] == pending[i][0]) blocked = true;
        if (blocked) continue;
        mov(pending[i][0], pending[i][1]);
        pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(i));
        progress = true;
        break;
      }
      if (progress) continue;
      int clobbered = pending.front()[0];
      mov(kScratch, clobbered);
      for (auto& p : pending)
        if (p[1] == clobbered) p[1] = kScratch;
    }
  }

  const IrFunction& fn_;
  LowerResult& out_;
  std::vector<VBlock> vcode_;
  std::set<std::string> labels_;
  std::map<std::string, int> forced_;  // params and cycle temporaries
  std::map<std::string, int> color_;
  int n_cycle_temps_ = 0;
};

}  // namespace

LowerResult lower(const IrProgram& prog) {
  LowerResult out;
  out.isa.mem_words = prog.mem_words;
  for (const IrFunction& fn : prog.functions) {
    FunctionLowerer fl(fn, out);
    out.isa.functions.push_back(fl.run());
  }
  return out;
}

}  // namespace wattbound
