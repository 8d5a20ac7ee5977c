#include "akb/bigraded.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace akb {

std::string Bidegree::to_string() const {
    return "(" + std::to_string(coh) + "," + std::to_string(intd) + ")";
}

Window Window::hull(const Window& a, const Window& b) {
    return {std::min(a.coh_min, b.coh_min), std::max(a.coh_max, b.coh_max),
            std::min(a.intd_min, b.intd_min), std::max(a.intd_max, b.intd_max)};
}

std::string Window::to_string() const {
    std::ostringstream os;
    os << "coh[" << coh_min << "," << coh_max << "] int[" << intd_min << "," << intd_max << "]";
    return os.str();
}

int BigradedSpace::add_basis(Bidegree d, std::string label) {
    auto& v = basis_[d];
    auto& ix = index_[d];
    if (ix.count(label)) throw structural_error("duplicate basis label " + label + " at " + d.to_string());
    int idx = static_cast<int>(v.size());
    ix.emplace(label, idx);
    v.push_back(std::move(label));
    return idx;
}

int BigradedSpace::dim(Bidegree d) const {
    auto it = basis_.find(d);
    return it == basis_.end() ? 0 : static_cast<int>(it->second.size());
}

const std::vector<std::string>& BigradedSpace::labels(Bidegree d) const {
    static const std::vector<std::string> kEmpty;
    auto it = basis_.find(d);
    return it == basis_.end() ? kEmpty : it->second;
}

const std::string& BigradedSpace::label(Bidegree d, int idx) const {
    return labels(d).at(static_cast<size_t>(idx));
}

std::optional<int> BigradedSpace::index_of(Bidegree d, const std::string& label) const {
    auto it = index_.find(d);
    if (it == index_.end()) return std::nullopt;
    auto jt = it->second.find(label);
    if (jt == it->second.end()) return std::nullopt;
    return jt->second;
}

bool BigradedSpace::has(Bidegree d, int idx) const {
    return idx >= 0 && idx < dim(d);
}

std::vector<Bidegree> BigradedSpace::support() const {
    std::vector<Bidegree> out;
    for (const auto& [d, v] : basis_)
        if (!v.empty()) out.push_back(d);
    return out;
}

int BigradedSpace::total_dim() const {
    int n = 0;
    for (const auto& [d, v] : basis_) n += static_cast<int>(v.size());
    return n;
}

Element Element::basis(const BigradedSpace* sp, BasisKey k, int order) {
    Element e(sp, order);
    EvalCtx ctx;
    e.add_term(k, Scalar::one(order), ctx);
    if (ctx.truncated) throw structural_error("basis key outside space support");
    return e;
}

bool Element::is_zero() const {
    for (const auto& [k, c] : c_)
        if (!c.is_zero()) return false;
    return true;
}

void Element::add_term(BasisKey k, const Scalar& c, EvalCtx& ctx) {
    if (c.is_zero()) return;
    if (!sp_->has(k.deg, k.idx)) {
        if (sp_->truncated_beyond) {
            ctx.truncated = true;
            return;
        }
        throw structural_error("element term outside complete space at " + k.deg.to_string());
    }
    auto [it, fresh] = c_.try_emplace(k, c);
    if (!fresh) it->second += c;
}

void Element::add(const Element& o, EvalCtx& ctx) {
    for (const auto& [k, c] : o.c_) add_term(k, c, ctx);
}

void Element::add_scaled(const Element& o, const Scalar& c, EvalCtx& ctx) {
    if (c.is_zero()) return;
    for (const auto& [k, x] : o.c_) add_term(k, c * x, ctx);
}

void Element::add_scaled_sign(const Element& o, int sign, EvalCtx& ctx) {
    for (const auto& [k, x] : o.c_) {
        if (sign > 0) add_term(k, x, ctx);
        else add_term(k, -x, ctx);
    }
}

void Element::scale(const Scalar& c) {
    for (auto& [k, x] : c_) x = x * c;
}

void Element::negate() {
    for (auto& [k, x] : c_) x.negate();
}

Scalar Element::coeff(BasisKey k) const {
    auto it = c_.find(k);
    return it == c_.end() ? Scalar::zero(order_) : it->second;
}

std::string Element::to_string() const {
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, c] : c_) {
        if (c.is_zero()) continue;
        if (!first) os << " + ";
        first = false;
        os << "(" << c.to_string() << ")*" << sp_->label(k.deg, k.idx) << k.deg.to_string();
    }
    if (first) os << "0";
    return os.str();
}

bool operator==(const Element& a, const Element& b) {
    // compare as formal sums, ignoring explicit zeros
    auto ita = a.c_.begin();
    auto itb = b.c_.begin();
    while (true) {
        while (ita != a.c_.end() && ita->second.is_zero()) ++ita;
        while (itb != b.c_.end() && itb->second.is_zero()) ++itb;
        if (ita == a.c_.end() && itb == b.c_.end()) return true;
        if (ita == a.c_.end() || itb == b.c_.end()) return false;
        if (ita->first != itb->first || !(ita->second == itb->second)) return false;
        ++ita;
        ++itb;
    }
}

void LinearMap::set_column(BasisKey k, Element v) {
    if (!src_->has(k.deg, k.idx)) throw structural_error("column key outside source");
    cols_[k] = std::move(v);
}

Element LinearMap::apply_basis(BasisKey k) const {
    auto it = cols_.find(k);
    if (it == cols_.end()) return Element(tgt_.get(), order_);
    return it->second;
}

Element LinearMap::apply(const Element& x, EvalCtx& ctx) const {
    Element out(tgt_.get(), order_);
    for (const auto& [k, c] : x.terms()) out.add_scaled(apply_basis(k), c, ctx);
    return out;
}

bool LinearMap::entries_respect_bidegree() const {
    for (const auto& [k, v] : cols_) {
        Bidegree want = k.deg + deg_;
        for (const auto& [tk, c] : v.terms()) {
            if (!c.is_zero() && tk.deg != want) return false;
        }
    }
    return true;
}

LinearMap compose(const LinearMap& f, const LinearMap& g) {
    if (f.src_.get() != g.tgt_.get()) throw structural_error("compose: space mismatch");
    LinearMap out(g.src_, f.tgt_, f.deg_ + g.deg_, f.order_);
    EvalCtx ctx;
    for (const auto& [k, v] : g.cols_) {
        Element img = f.apply(v, ctx);
        if (!img.is_zero()) out.set_column(k, std::move(img));
    }
    return out;
}

LinearMap add(const LinearMap& f, const LinearMap& g) {
    if (f.src_.get() != g.src_.get() || f.tgt_.get() != g.tgt_.get() || f.deg_ != g.deg_)
        throw structural_error("add: map shape mismatch");
    LinearMap out(f.src_, f.tgt_, f.deg_, f.order_);
    out.cols_ = f.cols_;
    EvalCtx ctx;
    for (const auto& [k, v] : g.cols_) {
        auto [it, fresh] = out.cols_.try_emplace(k, v);
        if (!fresh) it->second.add(v, ctx);
    }
    return out;
}

int suspension_sign(int arity) {
    if (arity < 0) throw structural_error("suspension_sign: negative arity");
    return (arity * (arity - 1) / 2) % 2 == 0 ? 1 : -1;
}

int koszul_swap_sign(Bidegree a, Bidegree b) {
    return (a.coh % 2 != 0 && b.coh % 2 != 0) ? -1 : 1;
}

SpacePtr shift_space(const BigradedSpace& m, int n, int j) {
    auto out = std::make_shared<BigradedSpace>();
    out->truncated_beyond = m.truncated_beyond;
    for (const auto& [d, labels] : m.basis()) {
        Bidegree nd{d.coh - n, d.intd - j};
        for (const auto& l : labels) out->add_basis(nd, l);
    }
    return out;
}

std::vector<Element> tensor_insert_apply(const LinearMap& f, size_t slot,
                                         std::span<const Element> inputs, EvalCtx& ctx) {
    if (slot >= inputs.size()) throw structural_error("tensor_insert_apply: slot out of range");
    int fdeg = f.bidegree().coh;
    int skipped = 0;
    for (size_t i = 0; i < slot; ++i) {
        // inputs are expected bidegree-homogeneous; take the degree of any term
        for (const auto& [k, c] : inputs[i].terms()) {
            skipped += k.deg.coh;
            break;
        }
    }
    int sign = (fdeg % 2 != 0 && skipped % 2 != 0) ? -1 : 1;
    std::vector<Element> out(inputs.begin(), inputs.end());
    Element img = f.apply(inputs[slot], ctx);
    if (sign < 0) img.negate();
    out[slot] = std::move(img);
    return out;
}

int rank_bareiss(std::vector<std::vector<Rational>>& m) {
    if (m.empty()) return 0;
    size_t rows = m.size(), cols = m[0].size();
    // Clear denominators rowwise, then integer Bareiss.
    std::vector<std::vector<mpz_class>> a(rows, std::vector<mpz_class>(cols));
    for (size_t i = 0; i < rows; ++i) {
        mpz_class l = 1;
        for (size_t j = 0; j < cols; ++j)
            mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), m[i][j].get_den().get_mpz_t());
        for (size_t j = 0; j < cols; ++j) {
            mpz_class num = m[i][j].get_num() * (l / m[i][j].get_den());
            a[i][j] = num;
        }
    }
    mpz_class prev = 1;
    size_t r = 0;
    for (size_t c = 0; c < cols && r < rows; ++c) {
        size_t p = r;
        while (p < rows && sgn(a[p][c]) == 0) ++p;
        if (p == rows) continue;
        std::swap(a[p], a[r]);
        for (size_t i = r + 1; i < rows; ++i) {
            for (size_t j = c + 1; j < cols; ++j) {
                mpz_class t = a[r][c] * a[i][j] - a[i][c] * a[r][j];
                mpz_divexact(t.get_mpz_t(), t.get_mpz_t(), prev.get_mpz_t());
                a[i][j] = t;
            }
            a[i][c] = 0;
        }
        prev = a[r][c];
        ++r;
    }
    return static_cast<int>(r);
}

std::map<Bidegree, int> rank_table(const LinearMap& f, const Window& win) {
    std::map<Bidegree, int> out;
    int N = f.order();
    for (const auto& [d, labels] : f.source()->basis()) {
        if (!win.contains(d)) continue;
        Bidegree td = d + f.bidegree();
        int sdim = static_cast<int>(labels.size());
        int tdim = f.target()->dim(td);
        if (sdim == 0) continue;
        if (tdim == 0) {
            out[d] = 0;
            continue;
        }
        // Q-expansion: rows (target idx, h-order), cols (source idx, h-order).
        std::vector<std::vector<Rational>> m(
            static_cast<size_t>(tdim) * (N + 1),
            std::vector<Rational>(static_cast<size_t>(sdim) * (N + 1)));
        for (int s = 0; s < sdim; ++s) {
            Element col = f.apply_basis({d, s});
            for (const auto& [tk, c] : col.terms()) {
                if (tk.deg != td) continue;
                for (int i = 0; i <= N; ++i) {
                    for (int j = 0; i + j <= N; ++j) {
                        // h^j * entry lands source order j -> target order i+j
                        m[static_cast<size_t>(tk.idx) * (N + 1) + (i + j)]
                         [static_cast<size_t>(s) * (N + 1) + j] = c.coeff(i);
                    }
                }
            }
        }
        out[d] = rank_bareiss(m);
    }
    return out;
}

void LinearSystem::add_equation(std::vector<std::pair<int, Rational>> lhs, const Rational& rhs) {
    // merge duplicate columns, drop zeros
    std::sort(lhs.begin(), lhs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<int, Rational>> merged;
    for (auto& [c, v] : lhs) {
        if (!merged.empty() && merged.back().first == c) merged.back().second += v;
        else merged.emplace_back(c, v);
    }
    std::erase_if(merged, [](const auto& p) { return sgn(p.second) == 0; });
    if (merged.empty() && sgn(rhs) == 0) return;
    rows_.emplace_back(std::move(merged), rhs);
}

std::optional<std::vector<Rational>> LinearSystem::solve(int num_cols) {
    // Sparse Gaussian elimination, pivot on the lowest column id available.
    std::map<int, size_t> pivot_row;  // col -> row index in reduced_
    std::vector<std::pair<std::vector<std::pair<int, Rational>>, Rational>> reduced;

    auto reduce = [&](std::vector<std::pair<int, Rational>>& row, Rational& rhs) {
        size_t i = 0;
        while (i < row.size()) {
            auto it = pivot_row.find(row[i].first);
            if (it == pivot_row.end()) {
                ++i;
                continue;
            }
            const auto& [prow, prhs] = reduced[it->second];
            Rational factor = row[i].second;  // pivot rows are normalized to 1
            // row -= factor * prow
            std::vector<std::pair<int, Rational>> merged;
            merged.reserve(row.size() + prow.size());
            size_t a = 0, b = 0;
            while (a < row.size() || b < prow.size()) {
                if (b == prow.size() || (a < row.size() && row[a].first < prow[b].first)) {
                    merged.push_back(row[a++]);
                } else if (a == row.size() || prow[b].first < row[a].first) {
                    merged.emplace_back(prow[b].first, -factor * prow[b].second);
                    ++b;
                } else {
                    Rational v = row[a].second - factor * prow[b].second;
                    if (sgn(v) != 0) merged.emplace_back(row[a].first, v);
                    ++a;
                    ++b;
                }
            }
            std::erase_if(merged, [](const auto& p) { return sgn(p.second) == 0; });
            row = std::move(merged);
            rhs -= factor * prhs;
            i = 0;  // restart scan; earlier columns may have appeared
        }
    };

    for (auto& [row, rhs] : rows_) {
        auto r = row;
        auto b = rhs;
        reduce(r, b);
        if (r.empty()) {
            if (sgn(b) != 0) return std::nullopt;  // inconsistent
            continue;
        }
        // normalize so leading coefficient is 1
        Rational lead = r[0].second;
        for (auto& [c, v] : r) v /= lead;
        b /= lead;
        pivot_row[r[0].first] = reduced.size();
        reduced.emplace_back(std::move(r), b);
    }

    // back-substitute: process pivots in descending column order
    std::vector<Rational> x(static_cast<size_t>(num_cols));
    for (auto it = pivot_row.rbegin(); it != pivot_row.rend(); ++it) {
        const auto& [row, rhs] = reduced[it->second];
        Rational v = rhs;
        for (size_t i = 1; i < row.size(); ++i) v -= row[i].second * x[static_cast<size_t>(row[i].first)];
        x[static_cast<size_t>(it->first)] = v;
    }
    free_cols_ = num_cols - static_cast<int>(pivot_row.size());
    return x;
}

}  // namespace akb
