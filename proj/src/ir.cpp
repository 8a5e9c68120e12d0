#include "wattbound/ir.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "wattbound/diagnostics.hpp"

namespace wattbound {

namespace {

const std::map<std::string, IrOp>& op_names() {
  static const std::map<std::string, IrOp> names = {
      {"add", IrOp::Add},   {"sub", IrOp::Sub},     {"mul", IrOp::Mul},
      {"div", IrOp::Div},   {"icmp", IrOp::Icmp},   {"phi", IrOp::Phi},
      {"const", IrOp::Const}, {"load", IrOp::Load}, {"store", IrOp::Store},
      {"call", IrOp::Call}, {"br", IrOp::Br},       {"jump", IrOp::Jump},
      {"ret", IrOp::Ret},
  };
  return names;
}

const char* op_name(IrOp op) {
  for (const auto& [name, o] : op_names())
    if (o == op) return name.c_str();
  return "?";
}

const std::map<std::string, Cmp>& cmp_names() {
  static const std::map<std::string, Cmp> names = {
      {"eq", Cmp::Eq}, {"ne", Cmp::Ne}, {"lt", Cmp::Lt},
      {"le", Cmp::Le}, {"gt", Cmp::Gt}, {"ge", Cmp::Ge},
  };
  return names;
}

bool is_terminator(IrOp op) {
  return op == IrOp::Br || op == IrOp::Jump || op == IrOp::Ret;
}

class MirParser {
 public:
  MirParser(std::string text, std::string source)
      : text_(std::move(text)), source_(std::move(source)) {}

  IrProgram parse() {
    std::istringstream in(text_);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string line = strip_comment(raw);
      if (line.empty()) continue;
      parse_line(line, lineno);
    }
    if (in_func_) err(lineno, "unterminated function '" + cur_.name + "' (missing '}')");
    validate();
    return std::move(prog_);
  }

 private:
  [[noreturn]] void err(int line, const std::string& msg) {
    fail(ErrKind::Parse, source_, ":", line, ": ", msg);
  }

  static std::string strip_comment(const std::string& s) {
    std::string out = s.substr(0, s.find('#'));
    auto b = out.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = out.find_last_not_of(" \t\r");
    return out.substr(b, e - b + 1);
  }

  // Punctuation that shapes the grammar becomes its own token; value and
  // label names stay whole. "%d = phi [a: %x], [b: %y]" tokenizes as
  // %d = phi [ a : %x ] [ b : %y ]
  static std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> toks;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) toks.push_back(cur), cur.clear();
    };
    for (char c : s) {
      if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
        flush();
      } else if (c == '[' || c == ']' || c == '(' || c == ')' || c == ':' || c == '=') {
        flush();
        toks.push_back(std::string(1, c));
      } else {
        cur.push_back(c);
      }
    }
    flush();
    return toks;
  }

  static bool is_ident(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
      return std::isalnum(c) || c == '_' || c == '.';
    });
  }

  static bool is_value(const std::string& s) {
    return s.size() > 1 && s[0] == '%' && is_ident(s.substr(1));
  }

  static bool is_integer(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-') ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i)
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
  }

  std::int64_t parse_int(const std::string& s, int lineno) {
    if (!is_integer(s)) err(lineno, "expected an integer, got '" + s + "'");
    try {
      return std::stoll(s);
    } catch (...) {
      err(lineno, "integer out of range: '" + s + "'");
    }
  }

  void parse_line(const std::string& line, int lineno) {
    if (line.rfind("mem ", 0) == 0) {
      if (in_func_ || !prog_.functions.empty())
        err(lineno, "'mem' directive must precede function definitions");
      std::int64_t words = parse_int(strip_comment(line.substr(4)), lineno);
      if (words <= 0) err(lineno, "memory size must be positive");
      prog_.mem_words = words;
      return;
    }
    if (line.rfind("func ", 0) == 0) {
      parse_func_header(line, lineno);
      return;
    }
    if (line == "}") {
      if (!in_func_) err(lineno, "'}' outside a function");
      finish_function(lineno);
      return;
    }
    if (!in_func_) err(lineno, "instruction outside 'func'");
    if (line.back() == ':' && line.find(' ') == std::string::npos) {
      std::string label = line.substr(0, line.size() - 1);
      if (!is_ident(label)) err(lineno, "bad label '" + label + "'");
      for (const IrBlock& b : cur_.blocks)
        if (b.label == label) err(lineno, "duplicate label '" + label + "'");
      if (!cur_.blocks.empty() && cur_.blocks.back().instrs.empty())
        err(lineno, "block '" + cur_.blocks.back().label + "' is empty");
      cur_.blocks.push_back({label, {}});
      return;
    }
    parse_instruction(line, lineno);
  }

  void parse_func_header(const std::string& line, int lineno) {
    if (in_func_) err(lineno, "nested 'func' (missing '}'?)");
    std::string rest = line.substr(5);
    if (rest.empty() || rest.back() != '{')
      err(lineno, "expected 'func @name(...) {'");
    rest.pop_back();
    std::vector<std::string> toks = tokenize(rest);
    std::size_t i = 0;
    if (i >= toks.size() || toks[i].size() < 2 || toks[i][0] != '@' ||
        !is_ident(toks[i].substr(1)))
      err(lineno, "expected a function name like '@main'");
    cur_ = IrFunction{};
    cur_.name = toks[i++].substr(1);
    if (prog_.find_function(cur_.name))
      err(lineno, "duplicate function '@" + cur_.name + "'");
    if (i < toks.size()) {
      if (toks[i] != "(") err(lineno, "expected '(' after the function name");
      ++i;
      while (i < toks.size() && toks[i] != ")") {
        if (!is_value(toks[i])) err(lineno, "bad parameter '" + toks[i] + "'");
        std::string p = toks[i++].substr(1);
        if (std::find(cur_.params.begin(), cur_.params.end(), p) != cur_.params.end())
          err(lineno, "duplicate parameter '%" + p + "'");
        cur_.params.push_back(p);
      }
      if (i >= toks.size()) err(lineno, "missing ')' in parameter list");
      ++i;
    }
    if (i != toks.size()) err(lineno, "trailing tokens after the parameter list");
    if (cur_.params.size() > 4)
      err(lineno, "function '@" + cur_.name + "' has " +
                      std::to_string(cur_.params.size()) +
                      " parameters; the calling convention passes at most 4");
    defined_.clear();
    for (const std::string& p : cur_.params) defined_.insert(p);
    in_func_ = true;
  }

  void finish_function(int lineno) {
    if (cur_.blocks.empty()) err(lineno, "function '@" + cur_.name + "' has no blocks");
    if (cur_.blocks.back().instrs.empty())
      err(lineno, "block '" + cur_.blocks.back().label + "' is empty");
    for (const IrBlock& b : cur_.blocks) {
      for (std::size_t i = 0; i < b.instrs.size(); ++i) {
        const IrInstruction& ins = b.instrs[i];
        bool last = i + 1 == b.instrs.size();
        if (last && !is_terminator(ins.op))
          err(ins.line, "block '" + b.label + "' does not end in br/jump/ret");
        if (!last && is_terminator(ins.op))
          err(ins.line, "terminator in the middle of block '" + b.label + "'");
        if (ins.op == IrOp::Phi && i > 0 && b.instrs[i - 1].op != IrOp::Phi)
          err(ins.line, "phi after a non-phi in block '" + b.label + "'");
      }
    }
    prog_.functions.push_back(std::move(cur_));
    in_func_ = false;
  }

  void define(const std::string& value, int lineno) {
    if (!defined_.insert(value).second)
      err(lineno, "second assignment to '%" + value + "' breaks single assignment");
  }

  std::string use(const std::string& tok, int lineno) {
    if (!is_value(tok)) err(lineno, "expected a value like '%x', got '" + tok + "'");
    std::string v = tok.substr(1);
    if (!defined_.count(v)) err(lineno, "use of undefined value '%" + v + "'");
    return v;
  }

  void parse_instruction(const std::string& line, int lineno) {
    if (cur_.blocks.empty()) err(lineno, "instruction before the first label");
    std::vector<std::string> toks = tokenize(line);
    IrInstruction ins;
    ins.id = next_id_++;
    ins.line = lineno;
    std::size_t i = 0;
    // Uses may only reference values already in scope textually; phi
    // incomings are exempt (they flow around back edges by design).
    if (is_value(toks[0]) && toks.size() > 1 && toks[1] == "=") {
      ins.result = toks[0].substr(1);
      i = 2;
    }
    if (i >= toks.size()) err(lineno, "missing operation");
    auto it = op_names().find(toks[i]);
    if (it == op_names().end()) err(lineno, "unknown operation '" + toks[i] + "'");
    ins.op = it->second;
    ++i;
    auto want_result = [&](bool want) {
      if (want && ins.result.empty())
        err(lineno, std::string(op_name(ins.op)) + " must assign its result");
      if (!want && !ins.result.empty())
        err(lineno, std::string(op_name(ins.op)) + " does not produce a value");
    };
    auto take = [&]() -> std::string {
      if (i >= toks.size()) err(lineno, "missing operand");
      return toks[i++];
    };
    auto done = [&] {
      if (i != toks.size()) err(lineno, "trailing tokens: '" + toks[i] + "'");
    };
    switch (ins.op) {
      case IrOp::Add:
      case IrOp::Sub:
      case IrOp::Mul:
      case IrOp::Div: {
        want_result(true);
        ins.args.push_back(use(take(), lineno));
        ins.args.push_back(use(take(), lineno));
        done();
        break;
      }
      case IrOp::Icmp: {
        want_result(true);
        std::string c = take();
        auto cit = cmp_names().find(c);
        if (cit == cmp_names().end()) err(lineno, "unknown comparison '" + c + "'");
        ins.cmp = cit->second;
        ins.args.push_back(use(take(), lineno));
        ins.args.push_back(use(take(), lineno));
        done();
        break;
      }
      case IrOp::Phi: {
        want_result(true);
        while (i < toks.size()) {
          if (take() != "[") err(lineno, "expected '[' in phi incoming");
          std::string label = take();
          if (!is_ident(label)) err(lineno, "bad phi predecessor '" + label + "'");
          if (take() != ":") err(lineno, "expected ':' in phi incoming");
          std::string v = take();
          if (!is_value(v)) err(lineno, "expected a value in phi incoming, got '" + v + "'");
          if (take() != "]") err(lineno, "expected ']' in phi incoming");
          for (const auto& [l, unused] : ins.incomings)
            if (l == label) err(lineno, "duplicate phi incoming for '" + label + "'");
          ins.incomings.emplace_back(label, v.substr(1));
        }
        if (ins.incomings.empty()) err(lineno, "phi needs at least one incoming");
        break;
      }
      case IrOp::Const: {
        want_result(true);
        ins.imm = parse_int(take(), lineno);
        ins.has_imm = true;
        done();
        break;
      }
      case IrOp::Load: {
        want_result(true);
        std::string a = take();
        if (is_value(a)) {
          ins.args.push_back(use(a, lineno));
        } else {
          ins.imm = parse_int(a, lineno);
          ins.has_imm = true;
        }
        done();
        break;
      }
      case IrOp::Store: {
        want_result(false);
        ins.args.push_back(use(take(), lineno));
        std::string a = take();
        if (is_value(a)) {
          ins.args.push_back(use(a, lineno));
        } else {
          ins.imm = parse_int(a, lineno);
          ins.has_imm = true;
        }
        done();
        break;
      }
      case IrOp::Call: {
        std::string f = take();
        if (f.size() < 2 || f[0] != '@' || !is_ident(f.substr(1)))
          err(lineno, "expected a callee like '@f', got '" + f + "'");
        ins.callee = f.substr(1);
        if (i < toks.size()) {
          if (take() != "(") err(lineno, "expected '(' after the callee");
          while (i < toks.size() && toks[i] != ")")
            ins.args.push_back(use(toks[i++], lineno));
          if (i >= toks.size()) err(lineno, "missing ')' in call arguments");
          ++i;
        }
        done();
        if (ins.args.size() > 4)
          err(lineno, "call passes " + std::to_string(ins.args.size()) +
                          " arguments; the calling convention allows at most 4");
        calls_.push_back({cur_.name, ins.callee, ins.args.size(), lineno});
        break;
      }
      case IrOp::Br: {
        want_result(false);
        ins.args.push_back(use(take(), lineno));
        ins.target_true = take();
        ins.target_false = take();
        if (!is_ident(ins.target_true) || !is_ident(ins.target_false))
          err(lineno, "br needs two target labels");
        if (ins.target_true == ins.target_false)
          err(lineno, "br with identical targets; use jump");
        done();
        break;
      }
      case IrOp::Jump: {
        want_result(false);
        ins.target_true = take();
        if (!is_ident(ins.target_true)) err(lineno, "bad jump target '" + ins.target_true + "'");
        done();
        break;
      }
      case IrOp::Ret: {
        want_result(false);
        if (i < toks.size()) ins.args.push_back(use(take(), lineno));
        done();
        break;
      }
    }
    if (!ins.result.empty()) define(ins.result, lineno);
    cur_.blocks.back().instrs.push_back(std::move(ins));
  }

  // Cross-block and cross-function checks that need the whole program.
  void validate() {
    if (prog_.functions.empty()) err(1, "no functions defined");
    for (const IrFunction& fn : prog_.functions) {
      std::map<std::string, std::vector<std::string>> preds;
      for (const IrBlock& b : fn.blocks) {
        const IrInstruction& t = b.instrs.back();
        for (const std::string* lbl : {&t.target_true, &t.target_false}) {
          if (lbl->empty()) continue;
          if (!fn.block(*lbl))
            err(t.line, "branch to unknown label '" + *lbl + "' in '@" + fn.name + "'");
          preds[*lbl].push_back(b.label);
        }
      }
      for (const IrBlock& b : fn.blocks) {
        const std::vector<std::string>& p = preds[b.label];
        for (const IrInstruction& ins : b.instrs) {
          if (ins.op != IrOp::Phi) continue;
          if (ins.incomings.size() != p.size())
            err(ins.line, "phi in '" + b.label + "' has " +
                              std::to_string(ins.incomings.size()) +
                              " incomings for " + std::to_string(p.size()) +
                              " predecessors");
          for (const auto& [label, value] : ins.incomings) {
            if (std::find(p.begin(), p.end(), label) == p.end())
              err(ins.line, "phi incoming '" + label + "' is not a predecessor of '" +
                                b.label + "'");
            bool known = std::find(fn.params.begin(), fn.params.end(), value) !=
                         fn.params.end();
            for (const IrBlock& bb : fn.blocks)
              for (const IrInstruction& def : bb.instrs)
                if (def.result == value) known = true;
            if (!known)
              err(ins.line, "phi incoming uses undefined value '%" + value + "'");
          }
        }
      }
    }
    for (const PendingCall& c : calls_) {
      const IrFunction* callee = prog_.find_function(c.callee);
      if (!callee)
        err(c.line, "call to unknown function '@" + c.callee + "'");
      if (callee->params.size() != c.arity)
        err(c.line, "call to '@" + c.callee + "' passes " + std::to_string(c.arity) +
                        " arguments for " + std::to_string(callee->params.size()) +
                        " parameters");
    }
  }

  struct PendingCall {
    std::string caller;
    std::string callee;
    std::size_t arity;
    int line;
  };

  std::string text_;
  std::string source_;
  IrProgram prog_;
  IrFunction cur_;
  bool in_func_ = false;
  std::set<std::string> defined_;
  std::vector<PendingCall> calls_;
  int next_id_ = 1;
};

}  // namespace

IrProgram parse_mir(const std::string& text, const std::string& source_name) {
  return MirParser(text, source_name).parse();
}

std::string print_mir(const IrProgram& prog) {
  std::ostringstream os;
  if (prog.mem_words != 256) os << "mem " << prog.mem_words << "\n";
  bool first = true;
  for (const IrFunction& fn : prog.functions) {
    if (!first) os << "\n";
    first = false;
    os << "func @" << fn.name << "(";
    for (std::size_t i = 0; i < fn.params.size(); ++i)
      os << (i ? ", " : "") << "%" << fn.params[i];
    os << ") {\n";
    for (const IrBlock& b : fn.blocks) {
      os << b.label << ":\n";
      for (const IrInstruction& ins : b.instrs) {
        os << "  ";
        if (!ins.result.empty()) os << "%" << ins.result << " = ";
        os << op_name(ins.op);
        switch (ins.op) {
          case IrOp::Add:
          case IrOp::Sub:
          case IrOp::Mul:
          case IrOp::Div:
            os << " %" << ins.args[0] << ", %" << ins.args[1];
            break;
          case IrOp::Icmp:
            os << " " << cmp_name(ins.cmp) << ", %" << ins.args[0] << ", %" << ins.args[1];
            break;
          case IrOp::Phi:
            for (std::size_t i = 0; i < ins.incomings.size(); ++i)
              os << (i ? ", [" : " [") << ins.incomings[i].first << ": %"
                 << ins.incomings[i].second << "]";
            break;
          case IrOp::Const:
            os << " " << ins.imm;
            break;
          case IrOp::Load:
            if (ins.has_imm)
              os << " " << ins.imm;
            else
              os << " %" << ins.args[0];
            break;
          case IrOp::Store:
            os << " %" << ins.args[0] << ", ";
            if (ins.has_imm)
              os << ins.imm;
            else
              os << "%" << ins.args[1];
            break;
          case IrOp::Call: {
            os << " @" << ins.callee << "(";
            for (std::size_t i = 0; i < ins.args.size(); ++i)
              os << (i ? ", %" : "%") << ins.args[i];
            os << ")";
            break;
          }
          case IrOp::Br:
            os << " %" << ins.args[0] << ", " << ins.target_true << ", "
               << ins.target_false;
            break;
          case IrOp::Jump:
            os << " " << ins.target_true;
            break;
          case IrOp::Ret:
            if (!ins.args.empty()) os << " %" << ins.args[0];
            break;
        }
        os << "\n";
      }
    }
    os << "}\n";
  }
  return os.str();
}

namespace {

bool fold_once(IrFunction& fn) {
  std::map<std::string, std::int64_t> consts;
  for (const IrBlock& b : fn.blocks)
    for (const IrInstruction& ins : b.instrs)
      if (ins.op == IrOp::Const) consts[ins.result] = ins.imm;
  bool changed = false;
  for (IrBlock& b : fn.blocks) {
    for (IrInstruction& ins : b.instrs) {
      bool arith = ins.op == IrOp::Add || ins.op == IrOp::Sub ||
                   ins.op == IrOp::Mul || ins.op == IrOp::Div ||
                   ins.op == IrOp::Icmp;
      if (!arith) continue;
      auto a = consts.find(ins.args[0]);
      auto c = consts.find(ins.args[1]);
      if (a == consts.end() || c == consts.end()) continue;
      std::int64_t x = a->second, y = c->second, v = 0;
      // Arithmetic wraps mod 2^64, exactly like the machine, so folding a
      // computation never changes what a run would have produced.
      auto ux = static_cast<std::uint64_t>(x), uy = static_cast<std::uint64_t>(y);
      switch (ins.op) {
        case IrOp::Add: v = static_cast<std::int64_t>(ux + uy); break;
        case IrOp::Sub: v = static_cast<std::int64_t>(ux - uy); break;
        case IrOp::Mul: v = static_cast<std::int64_t>(ux * uy); break;
        case IrOp::Div:
          if (y == 0) continue;  // must still trap at run time
          // INT64_MIN / -1 wraps rather than trapping, as the machine does.
          if (x == std::numeric_limits<std::int64_t>::min() && y == -1)
            v = x;
          else
            v = x / y;
          break;
        case IrOp::Icmp:
          switch (ins.cmp) {
            case Cmp::Eq: v = x == y; break;
            case Cmp::Ne: v = x != y; break;
            case Cmp::Lt: v = x < y; break;
            case Cmp::Le: v = x <= y; break;
            case Cmp::Gt: v = x > y; break;
            case Cmp::Ge: v = x >= y; break;
          }
          break;
        default: break;
      }
      ins.op = IrOp::Const;
      ins.args.clear();
      ins.imm = v;
      ins.has_imm = true;
      changed = true;
    }
  }
  return changed;
}

bool dce_once(IrFunction& fn) {
  std::map<std::string, int> uses;
  for (const IrBlock& b : fn.blocks) {
    for (const IrInstruction& ins : b.instrs) {
      for (const std::string& a : ins.args) ++uses[a];
      for (const auto& [label, value] : ins.incomings) ++uses[value];
    }
  }
  bool changed = false;
  for (IrBlock& b : fn.blocks) {
    auto dead = [&](const IrInstruction& ins) {
      if (ins.result.empty() || uses[ins.result] > 0) return false;
      switch (ins.op) {
        case IrOp::Add:
        case IrOp::Sub:
        case IrOp::Mul:
        case IrOp::Icmp:
        case IrOp::Phi:
        case IrOp::Const:
        case IrOp::Load:
          return true;
        // Div can trap, Call can do anything; both stay.
        default:
          return false;
      }
    };
    auto it = std::remove_if(b.instrs.begin(), b.instrs.end(), dead);
    if (it != b.instrs.end()) {
      b.instrs.erase(it, b.instrs.end());
      changed = true;
    }
  }
  return changed;
}

}  // namespace

IrProgram optimize_ir(const IrProgram& prog) {
  IrProgram out = prog;
  for (IrFunction& fn : out.functions) {
    bool changed = true;
    while (changed) {
      changed = fold_once(fn);
      changed = dce_once(fn) || changed;
    }
  }
  return out;
}

IrProgram assign_ir_locations(IrProgram prog) {
  for (IrFunction& fn : prog.functions)
    for (IrBlock& b : fn.blocks)
      for (IrInstruction& ins : b.instrs) ins.loc = ins.id;
  return prog;
}

std::vector<int> ir_location_set(const IrProgram& prog) {
  std::vector<int> ids;
  for (const IrFunction& fn : prog.functions)
    for (const IrBlock& b : fn.blocks)
      for (const IrInstruction& ins : b.instrs) ids.push_back(ins.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace wattbound
