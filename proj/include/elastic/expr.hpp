#pragma once

#include <string>
#include <vector>

namespace elastic {

// Compiled arithmetic expression in the variables t and x.
// Grammar: numbers, t, x, + - * / ^, unary minus, exp(), tanh(), parentheses.
// '^' is right-associative and binds tighter than unary minus.
class Expression {
public:
    explicit Expression(const std::string& source);

    double operator()(double t, double x) const;

    const std::string& source() const { return source_; }
    bool uses_x() const { return uses_x_; }
    bool uses_t() const { return uses_t_; }

    enum class Op : unsigned char { Const, T, X, Add, Sub, Mul, Div, Pow, Neg, Exp, Tanh };
    struct Instr {
        Op op;
        double value;
    };

private:
    std::string source_;
    std::vector<Instr> code_;
    std::size_t max_depth_ = 0;
    bool uses_x_ = false;
    bool uses_t_ = false;
};

}  // namespace elastic
