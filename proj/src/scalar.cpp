#include "akb/scalar.hpp"

#include <sstream>

namespace akb {

Rational rational_from_string(const std::string& s) {
    Rational r;
    if (r.set_str(s, 10) != 0) throw structural_error("bad rational literal: " + s);
    r.canonicalize();
    return r;
}

std::string rational_to_string(const Rational& r) {
    return r.get_str();
}

Scalar Scalar::constant(const Rational& r, int order) {
    Scalar s(order);
    s.c_[0] = r;
    return s;
}

Scalar Scalar::hbar(int order) {
    Scalar s(order);
    if (order >= 1) s.c_[1] = 1;
    return s;
}

Scalar Scalar::exp_truncated(const Rational& c, int order) {
    Scalar s(order);
    Rational term = 1;
    s.c_[0] = 1;
    for (int k = 1; k <= order; ++k) {
        term *= c;
        term /= k;
        s.c_[static_cast<size_t>(k)] = term;
    }
    return s;
}

void Scalar::check_order(const Scalar& o) const {
    if (c_.size() != o.c_.size())
        throw structural_error("scalar order mismatch: " + std::to_string(order()) +
                               " vs " + std::to_string(o.order()));
}

bool Scalar::is_zero() const {
    for (const auto& x : c_)
        if (sgn(x) != 0) return false;
    return true;
}

Scalar Scalar::operator+(const Scalar& o) const {
    check_order(o);
    Scalar r(order());
    for (size_t i = 0; i < c_.size(); ++i) r.c_[i] = c_[i] + o.c_[i];
    return r;
}

Scalar Scalar::operator-(const Scalar& o) const {
    check_order(o);
    Scalar r(order());
    for (size_t i = 0; i < c_.size(); ++i) r.c_[i] = c_[i] - o.c_[i];
    return r;
}

Scalar Scalar::operator-() const {
    Scalar r(order());
    for (size_t i = 0; i < c_.size(); ++i) r.c_[i] = -c_[i];
    return r;
}

Scalar Scalar::operator*(const Scalar& o) const {
    check_order(o);
    Scalar r(order());
    for (size_t i = 0; i < c_.size(); ++i) {
        if (sgn(c_[i]) == 0) continue;
        for (size_t j = 0; i + j < c_.size(); ++j) {
            if (sgn(o.c_[j]) == 0) continue;
            r.c_[i + j] += c_[i] * o.c_[j];
        }
    }
    return r;
}

Scalar& Scalar::operator+=(const Scalar& o) {
    check_order(o);
    for (size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
}

Scalar& Scalar::operator*=(const Rational& r) {
    for (auto& x : c_) x *= r;
    return *this;
}

void Scalar::add_mul(const Scalar& a, const Scalar& b) {
    check_order(a);
    check_order(b);
    for (size_t i = 0; i < c_.size(); ++i) {
        if (sgn(a.c_[i]) == 0) continue;
        for (size_t j = 0; i + j < c_.size(); ++j) {
            if (sgn(b.c_[j]) == 0) continue;
            c_[i + j] += a.c_[i] * b.c_[j];
        }
    }
}

void Scalar::negate() {
    for (auto& x : c_) x = -x;
}

bool Scalar::operator==(const Scalar& o) const {
    check_order(o);
    for (size_t i = 0; i < c_.size(); ++i)
        if (c_[i] != o.c_[i]) return false;
    return true;
}

std::string Scalar::to_string() const {
    std::ostringstream os;
    bool first = true;
    for (size_t i = 0; i < c_.size(); ++i) {
        if (sgn(c_[i]) == 0) continue;
        Rational a = c_[i];
        if (first) {
            if (sgn(a) < 0) { os << "-"; a = -a; }
        } else {
            os << (sgn(a) < 0 ? " - " : " + ");
            if (sgn(a) < 0) a = -a;
        }
        first = false;
        if (i == 0) {
            os << a.get_str();
        } else {
            if (a != 1) os << a.get_str() << "*";
            os << "h";
            if (i > 1) os << "^" << i;
        }
    }
    if (first) os << "0";
    return os.str();
}

Scalar operator*(const Rational& r, const Scalar& s) {
    Scalar out = s;
    out *= r;
    return out;
}

}  // namespace akb
