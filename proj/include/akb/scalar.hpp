#pragma once

#include <gmpxx.h>

#include <string>
#include <vector>

#include "akb/common.hpp"

namespace akb {

// Exact rational scalar.  mpq_class keeps values in lowest terms with a
// positive denominator, which is exactly the invariant the engine needs.
using Rational = mpq_class;

Rational rational_from_string(const std::string& s);  // "p/q" or "p"
std::string rational_to_string(const Rational& r);

// Element of R_N = Q[h]/(h^{N+1}).  coeff(i) is the coefficient of h^i.
// The classical case is N = 0.  Orders are fixed per computation session
// and never mixed; mixed-order arithmetic is a structural error.
class Scalar {
public:
    Scalar() : c_(1) {}  // zero of order 0
    explicit Scalar(int order) : c_(static_cast<size_t>(order) + 1) {}

    static Scalar constant(const Rational& r, int order);
    static Scalar zero(int order) { return Scalar(order); }
    static Scalar one(int order) { return constant(1, order); }
    static Scalar hbar(int order);  // h itself; truncates to 0 when order = 0
    // sum_{k=0..N} c^k h^k / k!
    static Scalar exp_truncated(const Rational& c, int order);

    int order() const { return static_cast<int>(c_.size()) - 1; }
    const Rational& coeff(int i) const { return c_[static_cast<size_t>(i)]; }
    Rational& coeff(int i) { return c_[static_cast<size_t>(i)]; }
    const Rational& at_zero() const { return c_[0]; }  // reduction mod h

    bool is_zero() const;

    Scalar operator+(const Scalar& o) const;
    Scalar operator-(const Scalar& o) const;
    Scalar operator-() const;
    Scalar operator*(const Scalar& o) const;
    Scalar& operator+=(const Scalar& o);
    Scalar& operator*=(const Rational& r);
    // this += a * b, truncating above h^N
    void add_mul(const Scalar& a, const Scalar& b);
    void negate();

    bool operator==(const Scalar& o) const;
    bool operator!=(const Scalar& o) const { return !(*this == o); }

    std::string to_string() const;  // e.g. "1 - 1/2*h + 3*h^2"

private:
    void check_order(const Scalar& o) const;
    std::vector<Rational> c_;
};

Scalar operator*(const Rational& r, const Scalar& s);

}  // namespace akb
