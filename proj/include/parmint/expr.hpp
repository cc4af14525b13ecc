#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace parmint {

/// Symbol name -> value map used when evaluating expressions.
using Bindings = std::map<std::string, double>;

/// Unary functions the AST knows about. Si/Ci may appear only in
/// closed-form expressions (see parse_closed_form) and are evaluated
/// through an externally supplied SpecialFns table.
enum class Fn {
  Sin, Cos, Tan, Atan, Asin, Ln, Exp, Sqrt, Sinh, Cosh, Abs, Sign,
  Si, Ci
};

const char* fn_name(Fn f);

struct ParseError : std::runtime_error {
  std::size_t offset;  // byte offset into the parsed text
  ParseError(const std::string& msg, std::size_t off)
      : std::runtime_error(msg), offset(off) {}
};

struct EvalError : std::runtime_error {
  enum class Kind { UnboundSymbol, DomainFault, MissingSpecialFn };
  Kind kind;
  EvalError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

/// Evaluation hooks for the Si/Ci closed-form nodes.
struct SpecialFns {
  std::function<double(double)> si;
  std::function<double(double)> ci;
};

/// Immutable expression tree over one bound variable and named parameters.
/// Values are cheap to copy (shared nodes) and safe to evaluate from
/// multiple threads concurrently.
class Expr {
public:
  Expr() : Expr(constant(0)) {}

  static Expr constant(double v);
  static Expr pi();
  static Expr symbol(std::string name);
  static Expr neg(Expr e);
  static Expr add(Expr a, Expr b);
  static Expr sub(Expr a, Expr b);
  static Expr mul(Expr a, Expr b);
  static Expr div(Expr a, Expr b);
  static Expr pow(Expr base, Expr exponent);
  static Expr apply(Fn f, Expr arg);

  double eval(const Bindings& b) const;
  double eval(const Bindings& b, const SpecialFns& sp) const;

  /// Symbolic derivative with respect to `sym`. Total on the node set.
  Expr diff(const std::string& sym) const;

  /// Safe local rewrites only: 0+e, 1*e, 0*e, e^1, constant folding.
  /// Value-preserving and idempotent.
  Expr simplified() const;

  std::set<std::string> free_symbols() const;

  /// Printable form that reparses to an evaluation-equivalent tree.
  std::string str() const;

  bool is_constant() const;          // Constant node (not Pi)
  double constant_value() const;     // requires is_constant()
  bool is_zero_constant() const;
  bool contains_si_ci() const;

  struct Node;
  const Node& node() const { return *node_; }

private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

struct ParseOptions {
  bool allow_si_ci = false;
};

/// Recursive-descent parser. Precedence: ^ (right assoc) binds tighter
/// than unary minus, which binds tighter than * /, then + -.
/// Atoms: NUMBER | pi | IDENT | IDENT(expr) | (expr).
Expr parse(std::string_view text, const ParseOptions& opts = {});

}  // namespace parmint
