#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace bbmlab {

/// Variable bindings and optional named unary callbacks available while
/// evaluating an Expr.  Callbacks let the caller expose space-dependent
/// quantities (e.g. ball masses around a pinned atom) to config-supplied
/// formulas without the parser knowing about spaces.
struct EvalContext {
  std::unordered_map<std::string, double> vars;
  std::unordered_map<std::string, std::function<double(double)>> funcs;
};

/// Compiled arithmetic expression over named variables.
///
/// Grammar (usual precedence, ^ is right-associative power):
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := unary ('^' factor)?
///   unary  := '-' unary | primary
///   primary:= number | ident | ident '(' expr (',' expr)? ')' | '(' expr ')'
///
/// Built-in functions: abs, exp, log, sqrt, step (1 for arg >= 0, else 0)
/// with one argument; min, max, pow with two.  Any other ident(...) call is
/// looked up in EvalContext::funcs at evaluation time.
class Expr {
 public:
  Expr() = default;

  /// Compiles `source`.  Throws ValidationError on a syntax error.
  static Expr parse(const std::string& source);

  /// Evaluates against the context.  Unknown variables or callbacks throw
  /// ValidationError.
  double eval(const EvalContext& ctx) const;

  const std::string& source() const { return src_; }
  bool empty() const { return nodes_.empty(); }

 private:
  struct Node {
    enum Kind { kNum, kVar, kNeg, kAdd, kSub, kMul, kDiv, kPow, kCall1, kCall2 };
    Kind kind = kNum;
    double value = 0.0;
    std::string name;
    int a = -1;
    int b = -1;
  };

  double eval_node(int idx, const EvalContext& ctx) const;

  std::vector<Node> nodes_;
  int root_ = -1;
  std::string src_;
};

}  // namespace bbmlab
