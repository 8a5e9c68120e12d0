#include "wattbound/isa.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "wattbound/diagnostics.hpp"

namespace wattbound {

namespace {

struct OpInfo {
  Opcode op;
  const char* name;
};

constexpr OpInfo kOps[] = {
    {Opcode::Add, "add"},   {Opcode::Sub, "sub"},   {Opcode::Mul, "mul"},
    {Opcode::Macc, "macc"}, {Opcode::Div, "div"},   {Opcode::Ldc, "ldc"},
    {Opcode::Ldw, "ldw"},   {Opcode::Stw, "stw"},   {Opcode::Mov, "mov"},
    {Opcode::Icmp, "icmp"}, {Opcode::Bt, "bt"},     {Opcode::Bf, "bf"},
    {Opcode::Bu, "bu"},     {Opcode::Call, "call"}, {Opcode::Ret, "ret"},
    {Opcode::In, "in"},     {Opcode::Out, "out"},   {Opcode::Nop, "nop"},
    {Opcode::Fnop, "fnop"},
};

constexpr const char* kCmpNames[] = {"eq", "ne", "lt", "le", "gt", "ge"};

}  // namespace

const char* opcode_name(Opcode op) { return kOps[static_cast<int>(op)].name; }

std::optional<Opcode> opcode_from_name(std::string_view name) {
  for (const auto& info : kOps)
    if (name == info.name) return info.op;
  return std::nullopt;
}

const char* cmp_name(Cmp c) { return kCmpNames[static_cast<int>(c)]; }

std::optional<Cmp> cmp_from_name(std::string_view name) {
  for (int i = 0; i < 6; ++i)
    if (name == kCmpNames[i]) return static_cast<Cmp>(i);
  return std::nullopt;
}

bool is_memory_op(Opcode op) {
  return op == Opcode::Ldw || op == Opcode::Stw || op == Opcode::In || op == Opcode::Out;
}

bool is_block_terminator(Opcode op) {
  switch (op) {
    case Opcode::Bt:
    case Opcode::Bf:
    case Opcode::Bu:
    case Opcode::Call:
    case Opcode::Ret:
      return true;
    default:
      return false;
  }
}

int issue_latency(int n_active_threads) { return std::max(n_active_threads, 4); }

int pipeline_occupancy(int n_active_threads) { return std::min(n_active_threads, 4); }

std::optional<int> IsaFunction::label_index(std::string_view label) const {
  for (const auto& [name, idx] : labels)
    if (name == label) return idx;
  return std::nullopt;
}

std::optional<std::string> IsaFunction::label_at(int index) const {
  for (const auto& [name, idx] : labels)
    if (idx == index) return name;
  return std::nullopt;
}

const IsaFunction* IsaProgram::find_function(std::string_view name) const {
  int i = function_index(name);
  return i < 0 ? nullptr : &functions[i];
}

int IsaProgram::function_index(std::string_view name) const {
  for (std::size_t i = 0; i < functions.size(); ++i)
    if (functions[i].name == name) return static_cast<int>(i);
  return -1;
}

namespace {

class Parser {
 public:
  Parser(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  IsaProgram run() {
    std::istringstream in(text_);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
      ++lineno;
      std::string line = strip_comment(raw);
      if (line.empty()) continue;
      parse_line(line, lineno);
    }
    finish_function();
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

  static std::vector<std::string> tokenize(const std::string& s) {
    std::vector<std::string> toks;
    std::string cur;
    for (char c : s) {
      if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
        if (!cur.empty()) toks.push_back(cur), cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!cur.empty()) toks.push_back(cur);
    return toks;
  }

  static bool is_ident(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) {
      return std::isalnum(c) || c == '_' || c == '.';
    });
  }

  void parse_line(const std::string& line, int lineno) {
    if (line.rfind("func ", 0) == 0) {
      std::string name = strip_comment(line.substr(5));
      if (name.empty() || name.back() != ':') err(lineno, "expected 'func <name>:'");
      name.pop_back();
      name = strip_comment(name);
      if (!is_ident(name)) err(lineno, "bad function name '" + name + "'");
      finish_function();
      cur_.emplace();
      cur_->name = name;
      return;
    }
    if (line.rfind("mem ", 0) == 0) {
      if (cur_) err(lineno, "'mem' directive must precede function definitions");
      try {
        prog_.mem_words = std::stoll(line.substr(4));
      } catch (...) {
        err(lineno, "bad memory size");
      }
      if (prog_.mem_words <= 0) err(lineno, "memory size must be positive");
      return;
    }
    if (line.rfind("threads", 0) == 0) {
      parse_threads(line, lineno);
      return;
    }
    if (!cur_) err(lineno, "instruction outside 'func'");
    if (line.back() == ':' && line.find(' ') == std::string::npos) {
      std::string label = line.substr(0, line.size() - 1);
      if (!is_ident(label)) err(lineno, "bad label '" + label + "'");
      if (cur_->label_index(label)) err(lineno, "duplicate label '" + label + "'");
      cur_->labels.emplace_back(label, static_cast<int>(cur_->instrs.size()));
      return;
    }
    parse_instruction(line, lineno);
  }

  void parse_threads(const std::string& line, int lineno) {
    if (prog_.thread_spec) err(lineno, "duplicate 'threads' block");
    auto open = line.find('{');
    auto close = line.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
      err(lineno, "expected 'threads { ... }'");
    std::string body = line.substr(open + 1, close - open - 1);
    std::map<std::string, std::string> kv;
    // Whitespace-only split: commas belong to the stages=[...] list here.
    std::vector<std::string> toks;
    std::istringstream body_in(body);
    for (std::string w; body_in >> w;) toks.push_back(w);
    for (const std::string& tok : toks) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) err(lineno, "expected key=value in threads block, got '" + tok + "'");
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    ThreadSpec spec;
    auto pattern = kv.find("pattern");
    if (pattern == kv.end()) err(lineno, "threads block missing 'pattern'");
    if (pattern->second == "farm") {
      spec.pattern = ThreadSpec::Pattern::Farm;
      auto n = kv.find("n");
      auto entry = kv.find("entry");
      if (n == kv.end() || entry == kv.end()) err(lineno, "farm needs n= and entry=");
      try {
        spec.n_threads = std::stoi(n->second);
      } catch (...) {
        err(lineno, "bad thread count");
      }
      if (spec.n_threads < 1 || spec.n_threads > 8) err(lineno, "thread count must be in 1..8");
      spec.entry = entry->second;
    } else if (pattern->second == "pipeline") {
      spec.pattern = ThreadSpec::Pattern::Pipeline;
      auto stages = kv.find("stages");
      auto items = kv.find("items_loop");
      if (stages == kv.end() || items == kv.end())
        err(lineno, "pipeline needs stages=[...] and items_loop=");
      std::string s = stages->second;
      if (s.size() < 2 || s.front() != '[' || s.back() != ']')
        err(lineno, "stages must be a [a,b,...] list");
      s = s.substr(1, s.size() - 2);
      std::string cur;
      for (char c : s + ",") {
        if (c == ',') {
          if (!cur.empty()) spec.stages.push_back(cur);
          cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
          cur.push_back(c);
        }
      }
      if (spec.stages.empty()) err(lineno, "pipeline needs at least one stage");
      if (spec.stages.size() > 8) err(lineno, "at most 8 pipeline stages");
      spec.n_threads = static_cast<int>(spec.stages.size());
      spec.items_loop = items->second;
    } else {
      err(lineno, "pattern must be 'farm' or 'pipeline'");
    }
    prog_.thread_spec = std::move(spec);
  }

  int parse_reg(const std::string& tok, int lineno) {
    if (tok.size() < 2 || tok[0] != 'r') err(lineno, "expected register, got '" + tok + "'");
    int n = -1;
    try {
      n = std::stoi(tok.substr(1));
    } catch (...) {
      err(lineno, "expected register, got '" + tok + "'");
    }
    if (n < 0 || n >= kNumRegisters) err(lineno, "register out of range r0..r11: '" + tok + "'");
    return n;
  }

  std::int64_t parse_imm(const std::string& tok, int lineno) {
    try {
      std::size_t used = 0;
      std::int64_t v = std::stoll(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (...) {
      err(lineno, "expected integer immediate, got '" + tok + "'");
    }
  }

  void parse_instruction(const std::string& line, int lineno) {
    std::vector<std::string> toks = tokenize(line);
    IsaInstruction ins;
    ins.line = lineno;
    // Optional trailing "!loc <int>".
    if (toks.size() >= 2 && toks[toks.size() - 2] == "!loc") {
      ins.debug_loc = static_cast<int>(parse_imm(toks.back(), lineno));
      if (ins.debug_loc < 0) err(lineno, "!loc id must be non-negative");
      toks.pop_back();
      toks.pop_back();
    }
    if (toks.empty()) err(lineno, "empty instruction");
    auto op = opcode_from_name(toks[0]);
    if (!op) err(lineno, "unknown opcode '" + toks[0] + "'");
    if (*op == Opcode::Fnop) err(lineno, "fnop is synthetic and cannot be written");
    ins.op = *op;
    auto want = [&](std::size_t n) {
      if (toks.size() - 1 != n)
        err(lineno, cat("'", toks[0], "' expects ", n, " operand(s), got ", toks.size() - 1));
    };
    switch (ins.op) {
      case Opcode::Add:
      case Opcode::Sub:
      case Opcode::Mul:
      case Opcode::Macc:
      case Opcode::Div:
        want(3);
        ins.rd = parse_reg(toks[1], lineno);
        ins.ra = parse_reg(toks[2], lineno);
        ins.rb = parse_reg(toks[3], lineno);
        break;
      case Opcode::Ldc:
        want(2);
        ins.rd = parse_reg(toks[1], lineno);
        ins.imm = parse_imm(toks[2], lineno);
        break;
      case Opcode::Ldw:  // ldw rd, ra, offset
        want(3);
        ins.rd = parse_reg(toks[1], lineno);
        ins.ra = parse_reg(toks[2], lineno);
        ins.imm = parse_imm(toks[3], lineno);
        break;
      case Opcode::Stw:  // stw rs, ra, offset
        want(3);
        ins.ra = parse_reg(toks[1], lineno);  // value
        ins.rb = parse_reg(toks[2], lineno);  // base
        ins.imm = parse_imm(toks[3], lineno);
        break;
      case Opcode::Mov:
        want(2);
        ins.rd = parse_reg(toks[1], lineno);
        ins.ra = parse_reg(toks[2], lineno);
        break;
      case Opcode::Icmp: {  // icmp pred, rd, ra, rb
        want(4);
        auto cmp = cmp_from_name(toks[1]);
        if (!cmp) err(lineno, "bad compare predicate '" + toks[1] + "'");
        ins.cmp = *cmp;
        ins.rd = parse_reg(toks[2], lineno);
        ins.ra = parse_reg(toks[3], lineno);
        ins.rb = parse_reg(toks[4], lineno);
        break;
      }
      case Opcode::Bt:
      case Opcode::Bf:
        want(2);
        ins.ra = parse_reg(toks[1], lineno);
        ins.target = toks[2];
        break;
      case Opcode::Bu:
        want(1);
        ins.target = toks[1];
        break;
      case Opcode::Call:
        want(1);
        ins.callee = toks[1];
        break;
      case Opcode::Ret:
      case Opcode::Nop:
        want(0);
        break;
      case Opcode::In:  // in rd, channel
        want(2);
        ins.rd = parse_reg(toks[1], lineno);
        ins.imm = parse_imm(toks[2], lineno);
        break;
      case Opcode::Out:  // out channel, rs
        want(2);
        ins.imm = parse_imm(toks[1], lineno);
        ins.ra = parse_reg(toks[2], lineno);
        break;
      case Opcode::Fnop:
        break;  // unreachable
    }
    if ((ins.op == Opcode::In || ins.op == Opcode::Out) && (ins.imm < 0 || ins.imm > 63))
      err(lineno, "channel index must be in 0..63");
    cur_->instrs.push_back(std::move(ins));
  }

  void finish_function() {
    if (!cur_) return;
    if (cur_->instrs.empty() && !cur_->labels.empty())
      fail(ErrKind::Parse, source_, ": function '", cur_->name, "' has labels but no instructions");
    for (const auto& [label, idx] : cur_->labels)
      if (idx >= static_cast<int>(cur_->instrs.size()))
        fail(ErrKind::Parse, source_, ": label '", label, "' in '", cur_->name,
             "' does not precede an instruction");
    prog_.functions.push_back(std::move(*cur_));
    cur_.reset();
  }

  void validate() {
    std::set<std::string> names;
    for (const auto& fn : prog_.functions)
      if (!names.insert(fn.name).second)
        fail(ErrKind::Parse, source_, ": duplicate function '", fn.name, "'");
    for (const auto& fn : prog_.functions) {
      for (const auto& ins : fn.instrs) {
        if (!ins.target.empty() && !fn.label_index(ins.target))
          fail(ErrKind::Parse, source_, ":", ins.line, ": undefined label '", ins.target, "' in '",
               fn.name, "'");
        if (ins.op == Opcode::Call && prog_.function_index(ins.callee) < 0)
          fail(ErrKind::Parse, source_, ":", ins.line, ": call to undefined function '", ins.callee,
               "'");
      }
    }
    // A called function must leave via ret so the return refill is
    // statically attributable; falling off the end is reserved for thread
    // entry functions.
    std::set<std::string> called;
    for (const auto& fn : prog_.functions)
      for (const auto& ins : fn.instrs)
        if (ins.op == Opcode::Call) called.insert(ins.callee);
    for (const auto& fn : prog_.functions) {
      if (!called.count(fn.name)) continue;
      if (fn.instrs.empty() || fn.instrs.back().op == Opcode::Ret) continue;
      Opcode last = fn.instrs.back().op;
      if (last != Opcode::Bu && last != Opcode::Ret)
        fail(ErrKind::Parse, source_, ": called function '", fn.name,
             "' may fall off its end; it must return via ret");
    }
    if (prog_.thread_spec) {
      const ThreadSpec& spec = *prog_.thread_spec;
      if (spec.pattern == ThreadSpec::Pattern::Farm) {
        if (prog_.function_index(spec.entry) < 0)
          fail(ErrKind::Parse, source_, ": farm entry function '", spec.entry, "' not defined");
      } else {
        for (const auto& s : spec.stages)
          if (prog_.function_index(s) < 0)
            fail(ErrKind::Parse, source_, ": pipeline stage '", s, "' not defined");
      }
    }
  }

  const std::string& text_;
  std::string source_;
  IsaProgram prog_;
  std::optional<IsaFunction> cur_;
};

}  // namespace

IsaProgram parse_isa(const std::string& text, const std::string& source_name) {
  return Parser(text, source_name).run();
}

std::string print_isa(const IsaProgram& prog) {
  std::ostringstream os;
  if (prog.mem_words != 256) os << "mem " << prog.mem_words << "\n";
  if (prog.thread_spec) {
    const ThreadSpec& spec = *prog.thread_spec;
    if (spec.pattern == ThreadSpec::Pattern::Farm) {
      os << "threads { pattern=farm n=" << spec.n_threads << " entry=" << spec.entry << " }\n";
    } else {
      os << "threads { pattern=pipeline stages=[";
      for (std::size_t i = 0; i < spec.stages.size(); ++i)
        os << (i ? "," : "") << spec.stages[i];
      os << "] items_loop=" << spec.items_loop << " }\n";
    }
  }
  for (const auto& fn : prog.functions) {
    os << "func " << fn.name << ":\n";
    std::size_t next_label = 0;
    for (int i = 0; i <= static_cast<int>(fn.instrs.size()); ++i) {
      while (next_label < fn.labels.size() && fn.labels[next_label].second == i)
        os << fn.labels[next_label++].first << ":\n";
      if (i == static_cast<int>(fn.instrs.size())) break;
      const IsaInstruction& ins = fn.instrs[i];
      os << "  " << opcode_name(ins.op);
      switch (ins.op) {
        case Opcode::Add:
        case Opcode::Sub:
        case Opcode::Mul:
        case Opcode::Macc:
        case Opcode::Div:
          os << " r" << ins.rd << ", r" << ins.ra << ", r" << ins.rb;
          break;
        case Opcode::Ldc:
          os << " r" << ins.rd << ", " << ins.imm;
          break;
        case Opcode::Ldw:
          os << " r" << ins.rd << ", r" << ins.ra << ", " << ins.imm;
          break;
        case Opcode::Stw:
          os << " r" << ins.ra << ", r" << ins.rb << ", " << ins.imm;
          break;
        case Opcode::Mov:
          os << " r" << ins.rd << ", r" << ins.ra;
          break;
        case Opcode::Icmp:
          os << " " << cmp_name(ins.cmp) << ", r" << ins.rd << ", r" << ins.ra << ", r" << ins.rb;
          break;
        case Opcode::Bt:
        case Opcode::Bf:
          os << " r" << ins.ra << ", " << ins.target;
          break;
        case Opcode::Bu:
          os << " " << ins.target;
          break;
        case Opcode::Call:
          os << " " << ins.callee;
          break;
        case Opcode::In:
          os << " r" << ins.rd << ", " << ins.imm;
          break;
        case Opcode::Out:
          os << " " << ins.imm << ", r" << ins.ra;
          break;
        case Opcode::Ret:
        case Opcode::Nop:
        case Opcode::Fnop:
          break;
      }
      if (ins.debug_loc >= 0) os << " !loc " << ins.debug_loc;
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace wattbound
