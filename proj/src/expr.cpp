#include "bbmlab/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "bbmlab/common.hpp"

namespace bbmlab {

namespace {

struct Parser {
  const std::string& s;
  std::size_t pos = 0;

  explicit Parser(const std::string& src) : s(src) {}

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  bool peek(char c) {
    skip_ws();
    return pos < s.size() && s[pos] == c;
  }
  bool accept(char c) {
    if (peek(c)) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c))
      throw ValidationError("expression parse error: expected '" + std::string(1, c) +
                            "' at offset " + std::to_string(pos) + " in \"" + s + "\"");
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw ValidationError("expression parse error: " + msg + " at offset " +
                          std::to_string(pos) + " in \"" + s + "\"");
  }
};

}  // namespace

Expr Expr::parse(const std::string& source) {
  Expr e;
  e.src_ = source;
  Parser p(source);

  auto make = [&e](Node n) {
    e.nodes_.push_back(std::move(n));
    return static_cast<int>(e.nodes_.size()) - 1;
  };

  // Mutually recursive productions via explicit std::function.
  std::function<int()> expr, term, factor, unary, primary;

  primary = [&]() -> int {
    p.skip_ws();
    if (p.pos >= p.s.size()) p.fail("unexpected end of input");
    char c = p.s[p.pos];
    if (c == '(') {
      ++p.pos;
      int inner = expr();
      p.expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = p.s.c_str() + p.pos;
      char* end = nullptr;
      double v = std::strtod(begin, &end);
      if (end == begin) p.fail("malformed number");
      p.pos += static_cast<std::size_t>(end - begin);
      Node n;
      n.kind = Node::kNum;
      n.value = v;
      return make(n);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = p.pos;
      while (p.pos < p.s.size() &&
             (std::isalnum(static_cast<unsigned char>(p.s[p.pos])) || p.s[p.pos] == '_'))
        ++p.pos;
      std::string name = p.s.substr(start, p.pos - start);
      if (p.accept('(')) {
        int a = expr();
        int b = -1;
        if (p.accept(',')) b = expr();
        p.expect(')');
        Node n;
        n.name = name;
        if (b >= 0) {
          n.kind = Node::kCall2;
          n.a = a;
          n.b = b;
        } else {
          n.kind = Node::kCall1;
          n.a = a;
        }
        return make(n);
      }
      Node n;
      n.kind = Node::kVar;
      n.name = name;
      return make(n);
    }
    p.fail(std::string("unexpected character '") + c + "'");
  };

  unary = [&]() -> int {
    if (p.accept('-')) {
      Node n;
      n.kind = Node::kNeg;
      n.a = unary();
      return make(n);
    }
    return primary();
  };

  factor = [&]() -> int {
    int lhs = unary();
    if (p.accept('^')) {
      Node n;
      n.kind = Node::kPow;
      n.a = lhs;
      n.b = factor();  // right-associative
      return make(n);
    }
    return lhs;
  };

  term = [&]() -> int {
    int lhs = factor();
    for (;;) {
      if (p.accept('*')) {
        Node n;
        n.kind = Node::kMul;
        n.a = lhs;
        n.b = factor();
        lhs = make(n);
      } else if (p.accept('/')) {
        Node n;
        n.kind = Node::kDiv;
        n.a = lhs;
        n.b = factor();
        lhs = make(n);
      } else {
        return lhs;
      }
    }
  };

  expr = [&]() -> int {
    int lhs = term();
    for (;;) {
      if (p.accept('+')) {
        Node n;
        n.kind = Node::kAdd;
        n.a = lhs;
        n.b = term();
        lhs = make(n);
      } else if (p.accept('-')) {
        Node n;
        n.kind = Node::kSub;
        n.a = lhs;
        n.b = term();
        lhs = make(n);
      } else {
        return lhs;
      }
    }
  };

  e.root_ = expr();
  p.skip_ws();
  if (p.pos != p.s.size()) p.fail("trailing characters");
  return e;
}

double Expr::eval_node(int idx, const EvalContext& ctx) const {
  const Node& n = nodes_[static_cast<std::size_t>(idx)];
  switch (n.kind) {
    case Node::kNum:
      return n.value;
    case Node::kVar: {
      auto it = ctx.vars.find(n.name);
      if (it == ctx.vars.end())
        throw ValidationError("expression references unknown variable '" + n.name + "'");
      return it->second;
    }
    case Node::kNeg:
      return -eval_node(n.a, ctx);
    case Node::kAdd:
      return eval_node(n.a, ctx) + eval_node(n.b, ctx);
    case Node::kSub:
      return eval_node(n.a, ctx) - eval_node(n.b, ctx);
    case Node::kMul:
      return eval_node(n.a, ctx) * eval_node(n.b, ctx);
    case Node::kDiv:
      return eval_node(n.a, ctx) / eval_node(n.b, ctx);
    case Node::kPow:
      return std::pow(eval_node(n.a, ctx), eval_node(n.b, ctx));
    case Node::kCall1: {
      double a = eval_node(n.a, ctx);
      if (n.name == "abs") return std::fabs(a);
      if (n.name == "exp") return std::exp(a);
      if (n.name == "log") return std::log(a);
      if (n.name == "sqrt") return std::sqrt(a);
      if (n.name == "step") return a >= 0.0 ? 1.0 : 0.0;
      auto it = ctx.funcs.find(n.name);
      if (it == ctx.funcs.end())
        throw ValidationError("expression calls unknown function '" + n.name + "'");
      return it->second(a);
    }
    case Node::kCall2: {
      double a = eval_node(n.a, ctx);
      double b = eval_node(n.b, ctx);
      if (n.name == "min") return std::fmin(a, b);
      if (n.name == "max") return std::fmax(a, b);
      if (n.name == "pow") return std::pow(a, b);
      throw ValidationError("expression calls unknown 2-argument function '" + n.name + "'");
    }
  }
  return 0.0;  // unreachable
}

double Expr::eval(const EvalContext& ctx) const {
  if (root_ < 0) throw ValidationError("evaluating an empty expression");
  return eval_node(root_, ctx);
}

}  // namespace bbmlab
