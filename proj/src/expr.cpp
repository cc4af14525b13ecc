#include "parmint/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace parmint {

enum class NodeKind { Constant, Pi, Symbol, Neg, Add, Sub, Mul, Div, Pow, Apply };

struct Expr::Node {
  NodeKind kind;
  double value = 0.0;                    // Constant
  std::string name;                      // Symbol
  Fn fn = Fn::Sin;                       // Apply
  std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make_node(Expr::Node n) { return std::make_shared<const Expr::Node>(std::move(n)); }

[[noreturn]] void domain_fault(const std::string& what) {
  throw EvalError(EvalError::Kind::DomainFault, what);
}

}  // namespace

const char* fn_name(Fn f) {
  switch (f) {
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Tan: return "tan";
    case Fn::Atan: return "atan";
    case Fn::Asin: return "asin";
    case Fn::Ln: return "ln";
    case Fn::Exp: return "exp";
    case Fn::Sqrt: return "sqrt";
    case Fn::Sinh: return "sinh";
    case Fn::Cosh: return "cosh";
    case Fn::Abs: return "abs";
    case Fn::Sign: return "sign";
    case Fn::Si: return "si";
    case Fn::Ci: return "ci";
  }
  return "?";
}

Expr Expr::constant(double v) { return Expr(make_node({NodeKind::Constant, v, {}, Fn::Sin, {}, {}})); }
Expr Expr::pi() { return Expr(make_node({NodeKind::Pi, 0, {}, Fn::Sin, {}, {}})); }
Expr Expr::symbol(std::string name) {
  return Expr(make_node({NodeKind::Symbol, 0, std::move(name), Fn::Sin, {}, {}}));
}
Expr Expr::neg(Expr e) { return Expr(make_node({NodeKind::Neg, 0, {}, Fn::Sin, e.node_, {}})); }
Expr Expr::add(Expr a, Expr b) { return Expr(make_node({NodeKind::Add, 0, {}, Fn::Sin, a.node_, b.node_})); }
Expr Expr::sub(Expr a, Expr b) { return Expr(make_node({NodeKind::Sub, 0, {}, Fn::Sin, a.node_, b.node_})); }
Expr Expr::mul(Expr a, Expr b) { return Expr(make_node({NodeKind::Mul, 0, {}, Fn::Sin, a.node_, b.node_})); }
Expr Expr::div(Expr a, Expr b) { return Expr(make_node({NodeKind::Div, 0, {}, Fn::Sin, a.node_, b.node_})); }
Expr Expr::pow(Expr base, Expr e) { return Expr(make_node({NodeKind::Pow, 0, {}, Fn::Sin, base.node_, e.node_})); }
Expr Expr::apply(Fn f, Expr arg) { return Expr(make_node({NodeKind::Apply, 0, {}, f, arg.node_, {}})); }

bool Expr::is_constant() const { return node_->kind == NodeKind::Constant; }
double Expr::constant_value() const { return node_->value; }
bool Expr::is_zero_constant() const {
  return node_->kind == NodeKind::Constant && node_->value == 0.0;
}

// ---------------------------------------------------------------------------
// evaluation

namespace {

double eval_fn(Fn f, double x, const SpecialFns* sp) {
  switch (f) {
    case Fn::Sin: return std::sin(x);
    case Fn::Cos: return std::cos(x);
    case Fn::Tan: return std::tan(x);
    case Fn::Atan: return std::atan(x);
    case Fn::Asin:
      if (x < -1.0 || x > 1.0) domain_fault("asin argument outside [-1,1]");
      return std::asin(x);
    case Fn::Ln:
      if (x <= 0.0) domain_fault("ln of non-positive value");
      return std::log(x);
    case Fn::Exp: return std::exp(x);
    case Fn::Sqrt:
      if (x < 0.0) domain_fault("sqrt of negative value");
      return std::sqrt(x);
    case Fn::Sinh: return std::sinh(x);
    case Fn::Cosh: return std::cosh(x);
    case Fn::Abs: return std::fabs(x);
    case Fn::Sign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    case Fn::Si:
    case Fn::Ci: {
      if (!sp) throw EvalError(EvalError::Kind::MissingSpecialFn,
                               "si/ci evaluation requires a special-function table");
      const auto& fun = (f == Fn::Si) ? sp->si : sp->ci;
      if (!fun) throw EvalError(EvalError::Kind::MissingSpecialFn,
                                "si/ci hook not installed");
      return fun(x);
    }
  }
  domain_fault("unknown function");
}

double eval_node(const Expr::Node& n, const Bindings& b, const SpecialFns* sp) {
  switch (n.kind) {
    case NodeKind::Constant: return n.value;
    case NodeKind::Pi: return M_PI;
    case NodeKind::Symbol: {
      auto it = b.find(n.name);
      if (it == b.end())
        throw EvalError(EvalError::Kind::UnboundSymbol, "unbound symbol '" + n.name + "'");
      return it->second;
    }
    case NodeKind::Neg: return -eval_node(*n.a, b, sp);
    case NodeKind::Add: return eval_node(*n.a, b, sp) + eval_node(*n.b, b, sp);
    case NodeKind::Sub: return eval_node(*n.a, b, sp) - eval_node(*n.b, b, sp);
    case NodeKind::Mul: return eval_node(*n.a, b, sp) * eval_node(*n.b, b, sp);
    case NodeKind::Div: {
      double num = eval_node(*n.a, b, sp);
      double den = eval_node(*n.b, b, sp);
      if (den == 0.0) domain_fault("division by zero");
      return num / den;
    }
    case NodeKind::Pow: {
      double base = eval_node(*n.a, b, sp);
      double e = eval_node(*n.b, b, sp);
      if (base == 0.0 && e < 0.0) domain_fault("zero raised to a negative power");
      double r = std::pow(base, e);
      if (std::isnan(r) && !std::isnan(base) && !std::isnan(e))
        domain_fault("negative base with non-integer exponent");
      return r;
    }
    case NodeKind::Apply: return eval_fn(n.fn, eval_node(*n.a, b, sp), sp);
  }
  domain_fault("corrupt expression node");
}

}  // namespace

double Expr::eval(const Bindings& b) const { return eval_node(*node_, b, nullptr); }
double Expr::eval(const Bindings& b, const SpecialFns& sp) const {
  return eval_node(*node_, b, &sp);
}

// ---------------------------------------------------------------------------
// differentiation

Expr Expr::diff(const std::string& sym) const {
  const Node& n = *node_;
  Expr a = n.a ? Expr(n.a) : Expr::constant(0);
  Expr b = n.b ? Expr(n.b) : Expr::constant(0);
  switch (n.kind) {
    case NodeKind::Constant:
    case NodeKind::Pi:
      return constant(0);
    case NodeKind::Symbol:
      return constant(n.name == sym ? 1 : 0);
    case NodeKind::Neg:
      return neg(a.diff(sym));
    case NodeKind::Add:
      return add(a.diff(sym), b.diff(sym));
    case NodeKind::Sub:
      return sub(a.diff(sym), b.diff(sym));
    case NodeKind::Mul:
      return add(mul(a.diff(sym), b), mul(a, b.diff(sym)));
    case NodeKind::Div:
      return div(sub(mul(a.diff(sym), b), mul(a, b.diff(sym))), mul(b, b));
    case NodeKind::Pow: {
      bool base_dep = a.free_symbols().count(sym) != 0;
      bool exp_dep = b.free_symbols().count(sym) != 0;
      if (!base_dep && !exp_dep) return constant(0);
      if (!exp_dep) {
        // d/ds f^c = c * f^(c-1) * f'
        return mul(mul(b, pow(a, sub(b, constant(1)))), a.diff(sym));
      }
      if (!base_dep) {
        // d/ds c^g = c^g * ln(c) * g'
        return mul(mul(pow(a, b), apply(Fn::Ln, a)), b.diff(sym));
      }
      // full rule: f^g * (g' ln f + g f'/f)
      return mul(pow(a, b),
                 add(mul(b.diff(sym), apply(Fn::Ln, a)), mul(b, div(a.diff(sym), a))));
    }
    case NodeKind::Apply: {
      Expr da = a.diff(sym);
      switch (n.fn) {
        case Fn::Sin: return mul(apply(Fn::Cos, a), da);
        case Fn::Cos: return neg(mul(apply(Fn::Sin, a), da));
        case Fn::Tan: return div(da, pow(apply(Fn::Cos, a), constant(2)));
        case Fn::Atan: return div(da, add(constant(1), mul(a, a)));
        case Fn::Asin: return div(da, apply(Fn::Sqrt, sub(constant(1), mul(a, a))));
        case Fn::Ln: return div(da, a);
        case Fn::Exp: return mul(apply(Fn::Exp, a), da);
        case Fn::Sqrt: return div(da, mul(constant(2), apply(Fn::Sqrt, a)));
        case Fn::Sinh: return mul(apply(Fn::Cosh, a), da);
        case Fn::Cosh: return mul(apply(Fn::Sinh, a), da);
        case Fn::Abs: return mul(apply(Fn::Sign, a), da);
        case Fn::Sign: return constant(0);  // flat a.e.; kinks never probed
        case Fn::Si: return mul(div(apply(Fn::Sin, a), a), da);
        case Fn::Ci: return mul(div(apply(Fn::Cos, a), a), da);
      }
      domain_fault("unknown function in diff");
    }
  }
  domain_fault("corrupt expression node in diff");
}

// ---------------------------------------------------------------------------
// simplification

namespace {

bool is_const_subtree(const Expr::Node& n) {
  switch (n.kind) {
    case NodeKind::Constant:
    case NodeKind::Pi:
      return true;
    case NodeKind::Symbol:
      return false;
    default:
      if (n.kind == NodeKind::Apply && (n.fn == Fn::Si || n.fn == Fn::Ci)) return false;
      return (!n.a || is_const_subtree(*n.a)) && (!n.b || is_const_subtree(*n.b));
  }
}

}  // namespace

Expr Expr::simplified() const {
  const Node& n = *node_;
  // fold constant subtrees when evaluation succeeds and stays finite
  if (n.kind != NodeKind::Constant && is_const_subtree(n)) {
    try {
      double v = eval(Bindings{});
      if (std::isfinite(v)) return constant(v);
    } catch (const EvalError&) {
      // leave unfolded; the fault surfaces at evaluation time
    }
  }
  switch (n.kind) {
    case NodeKind::Constant:
    case NodeKind::Pi:
    case NodeKind::Symbol:
      return *this;
    case NodeKind::Neg: {
      Expr a = Expr(n.a).simplified();
      if (a.is_constant()) return constant(-a.constant_value());
      return neg(a);
    }
    case NodeKind::Add: {
      Expr a = Expr(n.a).simplified(), b = Expr(n.b).simplified();
      if (a.is_zero_constant()) return b;
      if (b.is_zero_constant()) return a;
      return add(a, b);
    }
    case NodeKind::Sub: {
      Expr a = Expr(n.a).simplified(), b = Expr(n.b).simplified();
      if (b.is_zero_constant()) return a;
      return sub(a, b);
    }
    case NodeKind::Mul: {
      Expr a = Expr(n.a).simplified(), b = Expr(n.b).simplified();
      if (a.is_zero_constant() || b.is_zero_constant()) return constant(0);
      if (a.is_constant() && a.constant_value() == 1.0) return b;
      if (b.is_constant() && b.constant_value() == 1.0) return a;
      return mul(a, b);
    }
    case NodeKind::Div: {
      Expr a = Expr(n.a).simplified(), b = Expr(n.b).simplified();
      if (b.is_constant() && b.constant_value() == 1.0) return a;
      return div(a, b);
    }
    case NodeKind::Pow: {
      Expr a = Expr(n.a).simplified(), b = Expr(n.b).simplified();
      if (b.is_constant() && b.constant_value() == 1.0) return a;
      return pow(a, b);
    }
    case NodeKind::Apply: {
      return apply(n.fn, Expr(n.a).simplified());
    }
  }
  return *this;
}

// ---------------------------------------------------------------------------
// free symbols

namespace {
void collect_symbols(const Expr::Node& n, std::set<std::string>& out) {
  if (n.kind == NodeKind::Symbol) out.insert(n.name);
  if (n.a) collect_symbols(*n.a, out);
  if (n.b) collect_symbols(*n.b, out);
}
bool node_contains_si_ci(const Expr::Node& n) {
  if (n.kind == NodeKind::Apply && (n.fn == Fn::Si || n.fn == Fn::Ci)) return true;
  if (n.a && node_contains_si_ci(*n.a)) return true;
  if (n.b && node_contains_si_ci(*n.b)) return true;
  return false;
}
}  // namespace

std::set<std::string> Expr::free_symbols() const {
  std::set<std::string> out;
  collect_symbols(*node_, out);
  return out;
}

bool Expr::contains_si_ci() const { return node_contains_si_ci(*node_); }

// ---------------------------------------------------------------------------
// printing
//
// Precedence levels: 1 add/sub, 2 mul/div, 3 unary minus, 4 pow, 5 atom.
// Right operands of the left-associative ops are wrapped on equal
// precedence so the reparse reproduces the evaluation order exactly.

namespace {

int print_prec(const Expr::Node& n) {
  switch (n.kind) {
    case NodeKind::Add:
    case NodeKind::Sub: return 1;
    case NodeKind::Mul:
    case NodeKind::Div: return 2;
    case NodeKind::Neg: return 3;
    case NodeKind::Pow: return 4;
    case NodeKind::Constant:
      return n.value < 0.0 || std::signbit(n.value) ? 3 : 5;  // prints with leading '-'
    default: return 5;
  }
}

void print_node(const Expr::Node& n, std::string& out, int parent_prec, bool right_side) {
  int prec = print_prec(n);
  bool need_paren = prec < parent_prec || (prec == parent_prec && right_side && prec <= 2);
  if (need_paren) out += '(';
  switch (n.kind) {
    case NodeKind::Constant: {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", n.value);
      out += buf;
      break;
    }
    case NodeKind::Pi: out += "pi"; break;
    case NodeKind::Symbol: out += n.name; break;
    case NodeKind::Neg:
      out += '-';
      print_node(*n.a, out, 4, false);  // operand must bind at least as tight as pow base
      break;
    case NodeKind::Add:
      print_node(*n.a, out, 1, false); out += " + "; print_node(*n.b, out, 1, true);
      break;
    case NodeKind::Sub:
      print_node(*n.a, out, 1, false); out += " - "; print_node(*n.b, out, 1, true);
      break;
    case NodeKind::Mul:
      print_node(*n.a, out, 2, false); out += "*"; print_node(*n.b, out, 2, true);
      break;
    case NodeKind::Div:
      print_node(*n.a, out, 2, false); out += "/"; print_node(*n.b, out, 2, true);
      break;
    case NodeKind::Pow:
      print_node(*n.a, out, 5, false);  // any non-atom base gets parens
      out += '^';
      print_node(*n.b, out, 3, false);  // exponent may be a unary chain
      break;
    case NodeKind::Apply:
      out += fn_name(n.fn);
      out += '(';
      print_node(*n.a, out, 0, false);
      out += ')';
      break;
  }
  if (need_paren) out += ')';
}

}  // namespace

std::string Expr::str() const {
  std::string out;
  print_node(*node_, out, 0, false);
  return out;
}

// ---------------------------------------------------------------------------
// parsing

namespace {

struct Parser {
  std::string text;  // owned copy so strtod sees a terminated buffer
  std::size_t pos = 0;
  ParseOptions opts;

  void skip_ws() {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  }
  bool eof() {
    skip_ws();
    return pos >= text.size();
  }
  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }
  bool accept(char c) {
    if (peek() == c) { ++pos; return true; }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg, std::size_t at) {
    throw ParseError(msg + " at offset " + std::to_string(at), at);
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (accept('+')) e = Expr::add(e, parse_term());
      else if (accept('-')) e = Expr::sub(e, parse_term());
      else return e;
    }
  }

  Expr parse_term() {
    Expr e = parse_unary();
    for (;;) {
      if (accept('*')) e = Expr::mul(e, parse_unary());
      else if (accept('/')) e = Expr::div(e, parse_unary());
      else return e;
    }
  }

  // '^' binds tighter than unary minus: -x^2 is -(x^2)
  Expr parse_unary() {
    if (accept('-')) return Expr::neg(parse_unary());
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    if (accept('^')) return Expr::pow(base, parse_unary());
    return base;
  }

  Expr parse_atom() {
    skip_ws();
    if (pos >= text.size()) fail("unexpected end of input", pos);
    char c = text[pos];
    if (c == '(') {
      std::size_t open = pos;
      ++pos;
      Expr e = parse_expr();
      if (!accept(')')) fail("missing ')' for '(' ", open);
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail(std::string("unexpected character '") + c + "'", pos);
  }

  Expr parse_number() {
    std::size_t start = pos;
    const char* begin = text.data() + pos;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) fail("malformed number", start);
    pos += static_cast<std::size_t>(end - begin);
    return Expr::constant(v);
  }

  Expr parse_ident() {
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    std::string name(text.substr(start, pos - start));
    if (name == "pi") return Expr::pi();
    skip_ws();
    if (pos < text.size() && text[pos] == '(') {
      ++pos;
      Expr arg = parse_expr();
      if (!accept(')')) fail("missing ')' after argument of " + name, start);
      static const std::pair<const char*, Fn> kFns[] = {
          {"sin", Fn::Sin},   {"cos", Fn::Cos},   {"tan", Fn::Tan},
          {"atan", Fn::Atan}, {"asin", Fn::Asin}, {"ln", Fn::Ln},
          {"exp", Fn::Exp},   {"sqrt", Fn::Sqrt}, {"sinh", Fn::Sinh},
          {"cosh", Fn::Cosh}, {"abs", Fn::Abs},   {"sign", Fn::Sign},
      };
      for (const auto& [fname, f] : kFns)
        if (name == fname) return Expr::apply(f, arg);
      if (opts.allow_si_ci) {
        if (name == "si") return Expr::apply(Fn::Si, arg);
        if (name == "ci") return Expr::apply(Fn::Ci, arg);
      }
      fail("unknown function '" + name + "'", start);
    }
    return Expr::symbol(std::move(name));
  }
};

}  // namespace

Expr parse(std::string_view text, const ParseOptions& opts) {
  Parser p{std::string(text), 0, opts};
  if (p.eof()) p.fail("empty expression", 0);
  Expr e = p.parse_expr();
  if (!p.eof()) p.fail("trailing input", p.pos);
  return e;
}

}  // namespace parmint
