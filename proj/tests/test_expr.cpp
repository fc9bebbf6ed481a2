#include "doctest.h"

#include <cmath>
#include <stdexcept>

#include "kernelde/expr.hpp"

using kernelde::expr::Expr;

namespace {
double ev(const std::string& s, double x = 0, double f = 0, double df = 0)
{
    return Expr::parse(s).eval(x, f, df);
}
}  // namespace

TEST_CASE("literals, precedence, associativity")
{
    CHECK(ev("42") == 42.0);
    CHECK(ev("2+3*4") == 14.0);
    CHECK(ev("(2+3)*4") == 20.0);
    CHECK(ev("2*3^2") == 18.0);
    CHECK(ev("2^3^2") == 512.0);  // right associative
    CHECK(ev("-2^2") == -4.0);    // negation binds looser than ^
    CHECK(ev("2^-1") == 0.5);
    CHECK(ev("1/5") == doctest::Approx(0.2));
    CHECK(ev("10-3-2") == 5.0);  // left associative
    CHECK(ev("12/3/2") == 2.0);
    CHECK(ev("0.5e1") == 5.0);
    CHECK(ev(" 1 + 2 * ( 3 - 1 ) ") == 5.0);
}

TEST_CASE("variables and functions")
{
    CHECK(ev("x", 3.5) == 3.5);
    CHECK(ev("0.2*df + f - x", 1.0, 2.0, 3.0) == doctest::Approx(1.6));
    CHECK(ev("sin(0)") == 0.0);
    CHECK(ev("cos(0)") == 1.0);
    CHECK(ev("exp(1)") == doctest::Approx(std::exp(1.0)));
    CHECK(ev("sin(cos(x))", 0.3) == doctest::Approx(std::sin(std::cos(0.3))));
    CHECK(ev("cos(x)^2 + sin(x)^2", 1.234) == doctest::Approx(1.0));
    CHECK(ev("-f^2 + df", 0, 3, 1) == doctest::Approx(-8.0));
}

TEST_CASE("a 17-digit literal survives the round trip")
{
    const double parsed = ev("3.1415926535897931");
    CHECK(parsed == 3.14159265358979323846);
    CHECK(std::cos(ev("3.1415926535897931*(x-0.25)", 0.25)) == 1.0);
}

TEST_CASE("syntax errors carry position information")
{
    CHECK_THROWS_AS(Expr::parse("2+"), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse("sin("), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse("foo(3)"), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse(")"), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse("x y"), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse(""), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse("sin x"), std::invalid_argument);
    CHECK_THROWS_AS(Expr::parse("1 + fg"), std::invalid_argument);
    try {
        Expr::parse("2+*3");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("position") != std::string::npos);
    }
}

TEST_CASE("source text is preserved")
{
    const std::string src = "0.2*df+f-(cos(x)^2)";
    CHECK(Expr::parse(src).source() == src);
}
