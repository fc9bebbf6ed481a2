#pragma once
// Arithmetic expressions over the variables x, f, df: +, -, *, /, ^ (right
// associative), sin/cos/exp, parentheses, numeric literals. Parsed once into
// a flat node list, evaluated without allocation.

#include <string>
#include <vector>

namespace kernelde::expr {

class Expr {
public:
    // Throws std::invalid_argument with position information on bad syntax.
    static Expr parse(const std::string& src);

    double eval(double x, double f, double df) const;
    const std::string& source() const { return src_; }

private:
    enum class Op { literal, var_x, var_f, var_df, add, sub, mul, div, pow, neg, sin, cos, exp };
    struct Node {
        Op op;
        double value = 0.0;  // literal
        int a = -1, b = -1;  // child indices
    };

    std::string src_;
    std::vector<Node> nodes_;  // root is the last node
    friend class Parser;
};

}  // namespace kernelde::expr
