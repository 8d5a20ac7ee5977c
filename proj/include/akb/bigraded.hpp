#pragma once

#include <compare>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "akb/scalar.hpp"

namespace akb {

// (cohomological, internal) bidegree.  Signs only ever see coh.
struct Bidegree {
    int coh = 0;
    int intd = 0;
    friend auto operator<=>(const Bidegree&, const Bidegree&) = default;
    Bidegree operator+(const Bidegree& o) const { return {coh + o.coh, intd + o.intd}; }
    Bidegree operator-(const Bidegree& o) const { return {coh - o.coh, intd - o.intd}; }
    std::string to_string() const;
};

// Inclusive bidegree bounding box.
struct Window {
    int coh_min = 0, coh_max = 0, intd_min = 0, intd_max = 0;
    bool contains(Bidegree d) const {
        return d.coh >= coh_min && d.coh <= coh_max && d.intd >= intd_min && d.intd <= intd_max;
    }
    static Window hull(const Window& a, const Window& b);
    std::string to_string() const;
};

// Finite ordered basis per bidegree.  `truncated_beyond` marks spaces that
// are window truncations of an infinite object: producing a vector outside
// the stored support is then a truncation event, not a genuine zero.
class BigradedSpace {
public:
    int add_basis(Bidegree d, std::string label);

    int dim(Bidegree d) const;
    const std::vector<std::string>& labels(Bidegree d) const;
    const std::string& label(Bidegree d, int idx) const;
    std::optional<int> index_of(Bidegree d, const std::string& label) const;
    bool has(Bidegree d, int idx) const;

    const std::map<Bidegree, std::vector<std::string>>& basis() const { return basis_; }
    std::vector<Bidegree> support() const;
    int total_dim() const;

    bool truncated_beyond = false;

private:
    std::map<Bidegree, std::vector<std::string>> basis_;
    std::map<Bidegree, std::map<std::string, int>> index_;
};

using SpacePtr = std::shared_ptr<const BigradedSpace>;

struct BasisKey {
    Bidegree deg;
    int idx = 0;
    friend auto operator<=>(const BasisKey&, const BasisKey&) = default;
};

// Records truncation events during an evaluation; a set flag means the
// result is only valid up to window effects and the caller must report the
// computation as edge/inconclusive rather than failed.
struct EvalCtx {
    bool truncated = false;
};

// Sparse vector in a BigradedSpace.
class Element {
public:
    Element() = default;
    Element(const BigradedSpace* sp, int order) : sp_(sp), order_(order) {}

    static Element basis(const BigradedSpace* sp, BasisKey k, int order);

    const BigradedSpace* space() const { return sp_; }
    int order() const { return order_; }
    bool is_zero() const;

    void add_term(BasisKey k, const Scalar& c, EvalCtx& ctx);
    void add(const Element& o, EvalCtx& ctx);
    void add_scaled(const Element& o, const Scalar& c, EvalCtx& ctx);
    void add_scaled_sign(const Element& o, int sign, EvalCtx& ctx);
    void scale(const Scalar& c);
    void negate();

    const std::map<BasisKey, Scalar>& terms() const { return c_; }
    Scalar coeff(BasisKey k) const;

    std::string to_string() const;

    friend bool operator==(const Element& a, const Element& b);

private:
    const BigradedSpace* sp_ = nullptr;
    int order_ = 0;
    std::map<BasisKey, Scalar> c_;
};

// Bidegree-homogeneous linear map given by sparse columns.
class LinearMap {
public:
    LinearMap() = default;
    LinearMap(SpacePtr src, SpacePtr tgt, Bidegree deg, int order)
        : src_(std::move(src)), tgt_(std::move(tgt)), deg_(deg), order_(order) {}

    const SpacePtr& source() const { return src_; }
    const SpacePtr& target() const { return tgt_; }
    Bidegree bidegree() const { return deg_; }
    int order() const { return order_; }

    void set_column(BasisKey k, Element v);
    Element apply_basis(BasisKey k) const;  // zero when no column stored
    Element apply(const Element& x, EvalCtx& ctx) const;

    const std::map<BasisKey, Element>& columns() const { return cols_; }

    // Every stored entry must respect the declared bidegree.
    bool entries_respect_bidegree() const;

    friend LinearMap compose(const LinearMap& f, const LinearMap& g);  // f after g
    friend LinearMap add(const LinearMap& f, const LinearMap& g);

private:
    SpacePtr src_, tgt_;
    Bidegree deg_{};
    int order_ = 0;
    std::map<BasisKey, Element> cols_;
};

// (-1)^{i(i-1)/2}, the (s^{-1})^{(x)i} vs s^{(x)i} discrepancy.
int suspension_sign(int arity);

// Koszul swap sign; the internal grading never carries signs.
int koszul_swap_sign(Bidegree a, Bidegree b);

// Relabel basis through (coh, intd) |-> (coh - n, intd - j), i.e. M[n]<j>.
SpacePtr shift_space(const BigradedSpace& m, int n, int j);

// Evaluates 1^{(x)slot} (x) f (x) 1^{(x)rest} on the given inputs with the
// Koszul sign (-1)^{|f| * sum of coh degrees of the skipped factors}.
// Returns the list of factors with slot `slot` replaced by f applied to it.
std::vector<Element> tensor_insert_apply(const LinearMap& f, size_t slot,
                                         std::span<const Element> inputs, EvalCtx& ctx);

// ---- exact linear algebra ----------------------------------------------

// Fraction-free Bareiss elimination; returns the rank.  Destroys `m`.
int rank_bareiss(std::vector<std::vector<Rational>>& m);

// Per-bidegree rank table of a LinearMap over the Q-expansion of R_N
// (basis x h-power); each map block contributes rows/cols per h-order.
std::map<Bidegree, int> rank_table(const LinearMap& f, const Window& win);

// Sparse exact solver for A x = b over Q.  Columns are identified by
// integer ids; the solution uses pivot order = ascending column id and sets
// free columns to zero (minimal-support under that order).
class LinearSystem {
public:
    void add_equation(std::vector<std::pair<int, Rational>> lhs, const Rational& rhs);
    // Number of columns is max id + 1 (or given explicitly).
    std::optional<std::vector<Rational>> solve(int num_cols);
    int num_free_columns() const { return free_cols_; }

private:
    std::vector<std::pair<std::vector<std::pair<int, Rational>>, Rational>> rows_;
    int free_cols_ = 0;
};

}  // namespace akb
