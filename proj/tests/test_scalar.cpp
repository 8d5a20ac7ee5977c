#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "akb/scalar.hpp"

using namespace akb;

TEST_CASE("truncated ring arithmetic") {
    // (1+h)(1-h) at N=1 -> 1
    Scalar a = Scalar::one(1) + Scalar::hbar(1);
    Scalar b = Scalar::one(1) - Scalar::hbar(1);
    CHECK((a * b) == Scalar::one(1));
    // (1+h)^2 at N=2 -> 1+2h+h^2
    Scalar c = Scalar::one(2) + Scalar::hbar(2);
    Scalar sq = c * c;
    CHECK(sq.coeff(0) == 1);
    CHECK(sq.coeff(1) == 2);
    CHECK(sq.coeff(2) == 1);
    // neg(h/2) = -h/2
    Scalar h2 = Scalar::hbar(3);
    h2 *= Rational(1, 2);
    CHECK((-h2).coeff(1) == Rational(-1, 2));
}

TEST_CASE("order mismatch is structural") {
    CHECK_THROWS_AS(Scalar::one(1) + Scalar::one(2), structural_error);
}

TEST_CASE("exp_truncated") {
    // c=1/2, N=2 -> 1 + h/2 + h^2/8
    Scalar e = Scalar::exp_truncated(Rational(1, 2), 2);
    CHECK(e.coeff(0) == 1);
    CHECK(e.coeff(1) == Rational(1, 2));
    CHECK(e.coeff(2) == Rational(1, 8));
    CHECK(Scalar::exp_truncated(0, 3) == Scalar::one(3));
    Scalar e1 = Scalar::exp_truncated(1, 1);
    CHECK(e1.coeff(0) == 1);
    CHECK(e1.coeff(1) == 1);
}

TEST_CASE("exp is a homomorphism and ring laws hold on samples") {
    const int N = 3;
    std::vector<Rational> samples{Rational(1, 2), Rational(-2, 3), Rational(5), Rational(0)};
    for (const auto& x : samples)
        for (const auto& y : samples) {
            CHECK(Scalar::exp_truncated(x, N) * Scalar::exp_truncated(y, N) ==
                  Scalar::exp_truncated(x + y, N));
        }
    // associativity / commutativity / distributivity on sampled triples
    auto rat = [](int p, int q) {
        Rational r(p, q);
        r.canonicalize();
        return r;
    };
    auto mk = [&](int i) {
        Scalar s(N);
        s.coeff(0) = rat(i, 7);
        s.coeff(1) = rat(i * i - 3, 5);
        s.coeff(2) = rat(-i, 2);
        s.coeff(3) = rat(2 * i + 1, 3);
        return s;
    };
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            for (int k = 0; k < 4; ++k) {
                Scalar x = mk(i), y = mk(j), z = mk(k);
                CHECK((x * y) * z == x * (y * z));
                CHECK(x * y == y * x);
                CHECK(x * (y + z) == x * y + x * z);
            }
    // reduction mod h is a ring map
    Scalar x = mk(2), y = mk(3);
    CHECK((x * y).at_zero() == x.at_zero() * y.at_zero());
    CHECK((x + y).at_zero() == x.at_zero() + y.at_zero());
}
