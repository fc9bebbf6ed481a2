#include "kernelde/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace kernelde::expr {

namespace {
[[noreturn]] void fail(const std::string& src, size_t pos, const std::string& what)
{
    throw std::invalid_argument("expression error at position " + std::to_string(pos) + ": " +
                                what + " in \"" + src + "\"");
}
}  // namespace

class Parser {
public:
    Parser(const std::string& src, Expr& out) : src_(src), out_(out) {}

    void run()
    {
        const int root = expression();
        skip_space();
        if (pos_ != src_.size()) fail(src_, pos_, "trailing input");
        if (root < 0) fail(src_, pos_, "empty expression");
    }

private:
    // expression := term (('+'|'-') term)*
    int expression()
    {
        int lhs = term();
        while (true) {
            skip_space();
            if (eat('+'))
                lhs = emit({Expr::Op::add, 0.0, lhs, term()});
            else if (eat('-'))
                lhs = emit({Expr::Op::sub, 0.0, lhs, term()});
            else
                return lhs;
        }
    }

    // term := unary (('*'|'/') unary)*
    int term()
    {
        int lhs = unary();
        while (true) {
            skip_space();
            if (eat('*'))
                lhs = emit({Expr::Op::mul, 0.0, lhs, unary()});
            else if (eat('/'))
                lhs = emit({Expr::Op::div, 0.0, lhs, unary()});
            else
                return lhs;
        }
    }

    // unary := '-' unary | power. Negation binds looser than '^', so -2^2
    // reads -(2^2).
    int unary()
    {
        skip_space();
        if (eat('-')) return emit({Expr::Op::neg, 0.0, unary(), -1});
        return power();
    }

    // power := primary ('^' unary)?  (right associative via the recursion)
    int power()
    {
        const int base = primary();
        skip_space();
        if (eat('^')) return emit({Expr::Op::pow, 0.0, base, unary()});
        return base;
    }

    int primary()
    {
        skip_space();
        if (pos_ == src_.size()) fail(src_, pos_, "unexpected end");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            const int inner = expression();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail(src_, pos_, std::string("unexpected character '") + c + "'");
    }

    int number()
    {
        const char* begin = src_.c_str() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail(src_, pos_, "bad numeric literal");
        pos_ += static_cast<size_t>(end - begin);
        return emit({Expr::Op::literal, v, -1, -1});
    }

    int identifier()
    {
        const size_t start = pos_;
        while (pos_ < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        const std::string name = src_.substr(start, pos_ - start);
        if (name == "x") return emit({Expr::Op::var_x, 0.0, -1, -1});
        if (name == "f") return emit({Expr::Op::var_f, 0.0, -1, -1});
        if (name == "df") return emit({Expr::Op::var_df, 0.0, -1, -1});
        Expr::Op op;
        if (name == "sin")
            op = Expr::Op::sin;
        else if (name == "cos")
            op = Expr::Op::cos;
        else if (name == "exp")
            op = Expr::Op::exp;
        else
            fail(src_, start, "unknown identifier '" + name + "'");
        expect('(');
        const int arg = expression();
        expect(')');
        return emit({op, 0.0, arg, -1});
    }

    void skip_space()
    {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c)
    {
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        skip_space();
        if (!eat(c)) fail(src_, pos_, std::string("expected '") + c + "'");
    }

    int emit(Expr::Node n)
    {
        out_.nodes_.push_back(n);
        return static_cast<int>(out_.nodes_.size()) - 1;
    }

    const std::string& src_;
    Expr& out_;
    size_t pos_ = 0;
};

Expr Expr::parse(const std::string& src)
{
    Expr e;
    e.src_ = src;
    Parser(src, e).run();
    return e;
}

double Expr::eval(double x, double f, double df) const
{
    // children always precede parents, so one forward pass suffices
    thread_local std::vector<double> stack;
    stack.resize(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        double v = 0.0;
        switch (n.op) {
            case Op::literal: v = n.value; break;
            case Op::var_x: v = x; break;
            case Op::var_f: v = f; break;
            case Op::var_df: v = df; break;
            case Op::add: v = stack[n.a] + stack[n.b]; break;
            case Op::sub: v = stack[n.a] - stack[n.b]; break;
            case Op::mul: v = stack[n.a] * stack[n.b]; break;
            case Op::div: v = stack[n.a] / stack[n.b]; break;
            case Op::pow: v = std::pow(stack[n.a], stack[n.b]); break;
            case Op::neg: v = -stack[n.a]; break;
            case Op::sin: v = std::sin(stack[n.a]); break;
            case Op::cos: v = std::cos(stack[n.a]); break;
            case Op::exp: v = std::exp(stack[n.a]); break;
        }
        stack[i] = v;
    }
    return stack.empty() ? 0.0 : stack.back();
}

}  // namespace kernelde::expr
