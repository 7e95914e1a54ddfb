#include "elastic/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "elastic/errors.hpp"

namespace elastic {

namespace {

class Parser {
public:
    Parser(const std::string& s, std::vector<Expression::Instr>& out) : s_(s), out_(out) {}

    void parse() {
        expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected character");
    }

private:
    using Op = Expression::Op;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("expression '" + s_ + "': " + what + " at position " + std::to_string(pos_));
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void emit(Op op, double v = 0.0) { out_.push_back({op, v}); }

    void expr() {
        term();
        for (;;) {
            if (eat('+')) {
                term();
                emit(Op::Add);
            } else if (eat('-')) {
                term();
                emit(Op::Sub);
            } else {
                return;
            }
        }
    }

    void term() {
        unary();
        for (;;) {
            if (eat('*')) {
                unary();
                emit(Op::Mul);
            } else if (eat('/')) {
                unary();
                emit(Op::Div);
            } else {
                return;
            }
        }
    }

    void unary() {
        if (eat('-')) {
            unary();
            emit(Op::Neg);
        } else if (eat('+')) {
            unary();
        } else {
            power();
        }
    }

    void power() {
        primary();
        if (eat('^')) {
            unary();
            emit(Op::Pow);
        }
    }

    void primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            expr();
            if (!eat(')')) fail("expected ')'");
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double v = 0.0;
            const auto [end, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
            if (ec != std::errc()) fail("bad number");
            pos_ = static_cast<std::size_t>(end - s_.data());
            emit(Op::Const, v);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t end = pos_;
            while (end < s_.size() && std::isalpha(static_cast<unsigned char>(s_[end]))) ++end;
            const std::string name = s_.substr(pos_, end - pos_);
            pos_ = end;
            if (name == "t") {
                emit(Op::T);
            } else if (name == "x") {
                emit(Op::X);
            } else if (name == "exp" || name == "tanh") {
                if (!eat('(')) fail("expected '(' after " + name);
                expr();
                if (!eat(')')) fail("expected ')'");
                emit(name == "exp" ? Op::Exp : Op::Tanh);
            } else {
                fail("unknown identifier '" + name + "'");
            }
            return;
        }
        fail("unexpected character");
    }

    const std::string& s_;
    std::vector<Expression::Instr>& out_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(const std::string& source) : source_(source) {
    Parser(source_, code_).parse();
    std::size_t depth = 0;
    for (const auto& in : code_) {
        switch (in.op) {
            case Op::Const:
            case Op::T:
            case Op::X:
                ++depth;
                break;
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div:
            case Op::Pow:
                --depth;
                break;
            default:
                break;
        }
        max_depth_ = std::max(max_depth_, depth);
        uses_x_ = uses_x_ || in.op == Op::X;
        uses_t_ = uses_t_ || in.op == Op::T;
    }
    if (max_depth_ > 64) throw ConfigError("expression '" + source_ + "' is nested too deeply");
}

double Expression::operator()(double t, double x) const {
    double stack[64];
    std::size_t sp = 0;
    for (const auto& in : code_) {
        switch (in.op) {
            case Op::Const: stack[sp++] = in.value; break;
            case Op::T: stack[sp++] = t; break;
            case Op::X: stack[sp++] = x; break;
            case Op::Add: --sp; stack[sp - 1] += stack[sp]; break;
            case Op::Sub: --sp; stack[sp - 1] -= stack[sp]; break;
            case Op::Mul: --sp; stack[sp - 1] *= stack[sp]; break;
            case Op::Div: --sp; stack[sp - 1] /= stack[sp]; break;
            case Op::Pow: --sp; stack[sp - 1] = std::pow(stack[sp - 1], stack[sp]); break;
            case Op::Neg: stack[sp - 1] = -stack[sp - 1]; break;
            case Op::Exp: stack[sp - 1] = std::exp(stack[sp - 1]); break;
            case Op::Tanh: stack[sp - 1] = std::tanh(stack[sp - 1]); break;
        }
    }
    return stack[0];
}

}  // namespace elastic
