#pragma once

// Arithmetic expressions in x1, x2 for user-supplied problem data.
//
//   expr    := product (('+' | '-') product)*
//   product := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          (right associative)
//   primary := number | 'x1' | 'x2' | 'pi' | '(' expr ')'
//            | f '(' expr ')'                f in sin cos exp abs sq
//            | g '(' expr ',' expr ')'       g in min max
//            | 'cond' '(' expr rel expr ',' expr ',' expr ')'
//   rel     := '<' | '<=' | '>' | '>='

#include "obsctl/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace obsctl::expr {

enum class Op {
    Number, X1, X2,
    Neg, Add, Sub, Mul, Div, Pow,
    Sin, Cos, Exp, Abs, Sq, Min, Max,
    Cond,
    Less, LessEq, Greater, GreaterEq,
};

struct Node {
    Op op = Op::Number;
    double value = 0.0;
    std::vector<Node> args;

    bool operator==(const Node&) const = default;
};

/// Parsed expression; immutable and cheap to evaluate from several threads.
class Expr {
public:
    Expr(Node root, std::string source) : root_(std::move(root)), source_(std::move(source)) {}

    const Node& root() const noexcept { return root_; }
    const std::string& source() const noexcept { return source_; }

    bool operator==(const Expr& other) const { return root_ == other.root_; }

private:
    Node root_;
    std::string source_;
};

namespace detail {

struct FunctionInfo {
    std::string_view name;
    Op op;
    int arity;
};

inline constexpr FunctionInfo kFunctions[] = {
    {"sin", Op::Sin, 1}, {"cos", Op::Cos, 1}, {"exp", Op::Exp, 1}, {"abs", Op::Abs, 1},
    {"sq", Op::Sq, 1},   {"min", Op::Min, 2}, {"max", Op::Max, 2}, {"cond", Op::Cond, 3},
};

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    Node parse() {
        Node n = sum();
        skip_space();
        if (pos_ != src_.size()) {
            throw SyntaxError("unexpected '" + std::string(1, src_[pos_]) + "'", pos_);
        }
        return n;
    }

private:
    void skip_space() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) {
            ++pos_;
        }
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) {
            throw SyntaxError(std::string("expected '") + c + "'", pos_);
        }
    }

    static Node binary(Op op, Node a, Node b) {
        Node n{op, 0.0, {}};
        n.args.push_back(std::move(a));
        n.args.push_back(std::move(b));
        return n;
    }

    Node sum() {
        Node lhs = product();
        for (;;) {
            if (accept('+')) {
                lhs = binary(Op::Add, std::move(lhs), product());
            } else if (accept('-')) {
                lhs = binary(Op::Sub, std::move(lhs), product());
            } else {
                return lhs;
            }
        }
    }

    Node product() {
        Node lhs = unary();
        for (;;) {
            if (accept('*')) {
                lhs = binary(Op::Mul, std::move(lhs), unary());
            } else if (accept('/')) {
                lhs = binary(Op::Div, std::move(lhs), unary());
            } else {
                return lhs;
            }
        }
    }

    Node unary() {
        if (accept('-')) {
            Node n{Op::Neg, 0.0, {}};
            n.args.push_back(unary());
            return n;
        }
        return power();
    }

    Node power() {
        Node base = primary();
        if (accept('^')) {
            return binary(Op::Pow, std::move(base), unary());
        }
        return base;
    }

    Node predicate() {
        Node lhs = sum();
        skip_space();
        Op op;
        if (accept('<')) {
            op = accept('=') ? Op::LessEq : Op::Less;
        } else if (accept('>')) {
            op = accept('=') ? Op::GreaterEq : Op::Greater;
        } else {
            throw SyntaxError("expected comparison operator", pos_);
        }
        return binary(op, std::move(lhs), sum());
    }

    Node primary() {
        skip_space();
        if (pos_ >= src_.size()) {
            throw SyntaxError("unexpected end of input", pos_);
        }
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Node n = sum();
            expect(')');
            return n;
        }
        if ((c >= '0' && c <= '9') || c == '.') {
            return number();
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            return identifier();
        }
        throw SyntaxError("unexpected '" + std::string(1, c) + "'", pos_);
    }

    Node number() {
        const std::size_t start = pos_;
        auto digits = [this] {
            while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') {
                ++pos_;
            }
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t save = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
                ++pos_;
            }
            const std::size_t exp_start = pos_;
            digits();
            if (pos_ == exp_start) {
                pos_ = save;
            }
        }
        double v = 0.0;
        const auto* first = src_.data() + start;
        const auto* last = src_.data() + pos_;
        const auto res = std::from_chars(first, last, v);
        if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
            throw SyntaxError("malformed number '" + std::string(first, last) + "'", start);
        }
        return Node{Op::Number, v, {}};
    }

    Node identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view name = src_.substr(start, pos_ - start);
        if (name == "x1") {
            return Node{Op::X1, 0.0, {}};
        }
        if (name == "x2") {
            return Node{Op::X2, 0.0, {}};
        }
        if (name == "pi") {
            return Node{Op::Number, std::numbers::pi, {}};
        }
        for (const auto& f : kFunctions) {
            if (f.name != name) {
                continue;
            }
            expect('(');
            Node n{f.op, 0.0, {}};
            if (f.op == Op::Cond) {
                n.args.push_back(predicate());
                expect(',');
                n.args.push_back(sum());
                expect(',');
                n.args.push_back(sum());
            } else {
                n.args.push_back(sum());
                for (int k = 1; k < f.arity; ++k) {
                    expect(',');
                    n.args.push_back(sum());
                }
            }
            expect(')');
            return n;
        }
        throw UnknownIdentifier(std::string(name), start);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

inline double eval(const Node& n, double x1, double x2) {
    auto arg = [&](std::size_t i) { return eval(n.args[i], x1, x2); };
    switch (n.op) {
    case Op::Number: return n.value;
    case Op::X1: return x1;
    case Op::X2: return x2;
    case Op::Neg: return -arg(0);
    case Op::Add: return arg(0) + arg(1);
    case Op::Sub: return arg(0) - arg(1);
    case Op::Mul: return arg(0) * arg(1);
    case Op::Div: {
        const double d = arg(1);
        if (d == 0.0) {
            throw EvaluationError("division by zero");
        }
        return arg(0) / d;
    }
    case Op::Pow: return std::pow(arg(0), arg(1));
    case Op::Sin: return std::sin(arg(0));
    case Op::Cos: return std::cos(arg(0));
    case Op::Exp: return std::exp(arg(0));
    case Op::Abs: return std::abs(arg(0));
    case Op::Sq: {
        const double a = arg(0);
        return a * a;
    }
    case Op::Min: return std::min(arg(0), arg(1));
    case Op::Max: return std::max(arg(0), arg(1));
    case Op::Cond: return arg(0) != 0.0 ? arg(1) : arg(2);
    case Op::Less: return arg(0) < arg(1) ? 1.0 : 0.0;
    case Op::LessEq: return arg(0) <= arg(1) ? 1.0 : 0.0;
    case Op::Greater: return arg(0) > arg(1) ? 1.0 : 0.0;
    case Op::GreaterEq: return arg(0) >= arg(1) ? 1.0 : 0.0;
    }
    throw EvaluationError("corrupt expression node");
}

inline void print(const Node& n, std::string& out) {
    auto bin = [&](const char* sym) {
        out += '(';
        print(n.args[0], out);
        out += sym;
        print(n.args[1], out);
        out += ')';
    };
    auto call = [&](const char* name) {
        out += name;
        out += '(';
        for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i > 0) {
                out += ", ";
            }
            print(n.args[i], out);
        }
        out += ')';
    };
    switch (n.op) {
    case Op::Number: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
        out += buf;
        return;
    }
    case Op::X1: out += "x1"; return;
    case Op::X2: out += "x2"; return;
    case Op::Neg:
        out += "(-";
        print(n.args[0], out);
        out += ')';
        return;
    case Op::Add: bin(" + "); return;
    case Op::Sub: bin(" - "); return;
    case Op::Mul: bin(" * "); return;
    case Op::Div: bin(" / "); return;
    case Op::Pow: bin(" ^ "); return;
    case Op::Sin: call("sin"); return;
    case Op::Cos: call("cos"); return;
    case Op::Exp: call("exp"); return;
    case Op::Abs: call("abs"); return;
    case Op::Sq: call("sq"); return;
    case Op::Min: call("min"); return;
    case Op::Max: call("max"); return;
    case Op::Cond: call("cond"); return;
    // predicates print bare; they only ever appear as cond's first argument
    case Op::Less:
    case Op::LessEq:
    case Op::Greater:
    case Op::GreaterEq: {
        static constexpr const char* sym[] = {" < ", " <= ", " > ", " >= "};
        print(n.args[0], out);
        out += sym[static_cast<int>(n.op) - static_cast<int>(Op::Less)];
        print(n.args[1], out);
        return;
    }
    }
}

} // namespace detail

inline Expr parse(std::string_view src) {
    return Expr(detail::Parser(src).parse(), std::string(src));
}

/// Throws EvaluationError on division by zero or a non-finite result.
inline double evaluate(const Expr& e, double x1, double x2) {
    const double v = detail::eval(e.root(), x1, x2);
    if (!std::isfinite(v)) {
        throw EvaluationError("expression '" + e.source() + "' is not finite at (" + std::to_string(x1) +
                              ", " + std::to_string(x2) + ")");
    }
    return v;
}

/// Fully parenthesized form; parse(to_string(e)) == e.
inline std::string to_string(const Expr& e) {
    std::string out;
    detail::print(e.root(), out);
    return out;
}

} // namespace obsctl::expr
