#include "akb/koszul.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <sstream>

namespace akb {
namespace {

// ---- symmetric algebra --------------------------------------------------

struct SymTable {
    int dim;
    int maxdeg;
    std::vector<std::vector<int>> exps;          // aligned with enumeration order
    std::map<std::vector<int>, BasisKey> index;  // exponent vector -> key
};

std::string monomial_label(const std::vector<int>& e) {
    std::ostringstream os;
    bool any = false;
    for (size_t i = 0; i < e.size(); ++i) {
        if (e[i] == 0) continue;
        if (any) os << "*";
        os << "x" << (i + 1);
        if (e[i] > 1) os << "^" << e[i];
        any = true;
    }
    if (!any) os << "1";
    return os.str();
}

void enumerate_exponents(int dim, int deg, std::vector<int>& cur,
                         const std::function<void(const std::vector<int>&)>& f) {
    if (static_cast<int>(cur.size()) == dim - 1) {
        cur.push_back(deg);
        f(cur);
        cur.pop_back();
        return;
    }
    for (int e = deg; e >= 0; --e) {
        cur.push_back(e);
        enumerate_exponents(dim, deg - e, cur, f);
        cur.pop_back();
    }
}

}  // namespace

AlgPtr make_symmetric(int dim, int max_internal_degree, int order) {
    auto sp = std::make_shared<BigradedSpace>();
    sp->truncated_beyond = true;
    auto tab = std::make_shared<SymTable>();
    tab->dim = dim;
    tab->maxdeg = max_internal_degree;
    for (int d = 0; d <= max_internal_degree; ++d) {
        std::vector<int> cur;
        enumerate_exponents(dim, d, cur, [&](const std::vector<int>& e) {
            int idx = sp->add_basis({0, d}, monomial_label(e));
            tab->exps.push_back(e);
            tab->index[e] = BasisKey{{0, d}, idx};
        });
    }
    auto A = std::make_shared<Algebra>();
    A->space = sp;
    A->unit = BasisKey{{0, 0}, 0};
    A->order = order;
    A->max_arity = 2;
    A->augmentation = [order](BasisKey k) {
        return (k.deg == Bidegree{0, 0}) ? Scalar::one(order) : Scalar::zero(order);
    };
    SpacePtr spp = sp;
    auto exps_of = [tab, spp](BasisKey k) -> const std::vector<int>& {
        int off = 0;
        for (int d = 0; d < k.deg.intd; ++d) off += spp->dim({0, d});
        return tab->exps[static_cast<size_t>(off + k.idx)];
    };
    A->taylor = [tab, spp, order, exps_of](KeySpan a, EvalCtx& ctx) -> Element {
        Element out(spp.get(), order);
        if (a.size() != 2) return out;
        const auto& e1 = exps_of(a[0]);
        const auto& e2 = exps_of(a[1]);
        std::vector<int> e(e1.size());
        int total = 0;
        for (size_t i = 0; i < e.size(); ++i) {
            e[i] = e1[i] + e2[i];
            total += e[i];
        }
        // d2(sx|sy) = (-1)^{|x|} s(x*y); |x| = 0 throughout A
        if (total > tab->maxdeg) {
            ctx.truncated = true;
            return out;
        }
        out.add_term(tab->index.at(e), Scalar::one(order), ctx);
        return out;
    };
    return A;
}

namespace {

struct WedgeTable {
    int dim;
    std::map<unsigned, BasisKey> index;  // subset mask -> key
    std::vector<unsigned> masks;         // by (deg, idx)
};

std::string wedge_label(unsigned mask, int dim) {
    std::ostringstream os;
    bool any = false;
    for (int i = 0; i < dim; ++i)
        if (mask & (1u << i)) {
            os << "e" << (i + 1);
            any = true;
        }
    if (!any) os << "1";
    return os.str();
}

int merge_sign(unsigned s, unsigned t) {
    int inv = 0;
    for (int i = 0; i < 32; ++i) {
        if (!(t & (1u << i))) continue;
        unsigned high = s >> (i + 1);
        inv += __builtin_popcount(high);
    }
    return inv % 2 == 0 ? 1 : -1;
}

}  // namespace

AlgPtr make_exterior(int dim, int order) {
    auto sp = std::make_shared<BigradedSpace>();
    auto tab = std::make_shared<WedgeTable>();
    tab->dim = dim;
    for (int k = 0; k <= dim; ++k) {
        for (unsigned mask = 0; mask < (1u << dim); ++mask) {
            if (__builtin_popcount(mask) != k) continue;
            int idx = sp->add_basis({k, -k}, wedge_label(mask, dim));
            tab->index[mask] = BasisKey{{k, -k}, idx};
            tab->masks.push_back(mask);
        }
    }
    auto B = std::make_shared<Algebra>();
    B->space = sp;
    B->unit = BasisKey{{0, 0}, 0};
    B->order = order;
    B->max_arity = 2;
    B->augmentation = [order](BasisKey k) {
        return (k.deg == Bidegree{0, 0}) ? Scalar::one(order) : Scalar::zero(order);
    };
    SpacePtr spp = sp;
    auto mask_of = [tab, spp](BasisKey k) -> unsigned {
        int off = 0;
        for (int d = 0; d < k.deg.coh; ++d) off += spp->dim({d, -d});
        return tab->masks[static_cast<size_t>(off + k.idx)];
    };
    B->taylor = [tab, spp, order, mask_of](KeySpan a, EvalCtx& ctx) -> Element {
        Element out(spp.get(), order);
        if (a.size() != 2) return out;
        unsigned s = mask_of(a[0]), t = mask_of(a[1]);
        if (s & t) return out;  // wedge square is zero
        int sign = merge_sign(s, t);
        // d2(sb|sb') = (-1)^{|b|} s(b ^ b')
        if (a[0].deg.coh % 2 != 0) sign = -sign;
        out.add_term(tab->index.at(s | t), Scalar::constant(sign, order), ctx);
        return out;
    };
    return B;
}

std::vector<int> symmetric_exponents(const Algebra& A, BasisKey k) {
    int dim = A.space->dim({0, 1});
    std::vector<int> e(static_cast<size_t>(dim), 0);
    const std::string& lbl = A.space->label(k.deg, k.idx);
    if (lbl == "1") return e;
    std::istringstream is(lbl);
    std::string tok;
    while (std::getline(is, tok, '*')) {
        size_t caret = tok.find('^');
        int var = std::stoi(tok.substr(1, caret == std::string::npos ? std::string::npos : caret - 1));
        int pw = caret == std::string::npos ? 1 : std::stoi(tok.substr(caret + 1));
        e[static_cast<size_t>(var - 1)] += pw;
    }
    return e;
}

unsigned exterior_mask(const Algebra& B, BasisKey k) {
    const std::string& lbl = B.space->label(k.deg, k.idx);
    unsigned mask = 0;
    if (lbl == "1") return 0;
    for (size_t i = 0; i + 1 < lbl.size(); ++i)
        if (lbl[i] == 'e') mask |= 1u << (lbl[i + 1] - '1');
    return mask;
}

// ---- the Koszul bimodule solver ------------------------------------------

namespace {

struct KoszulData {
    AlgPtr A, B;
    int order;
    std::map<std::pair<std::pair<int, int>, std::vector<BasisKey>>, Rational> coeff;
};

Rational lookup(const KoszulData& D, KeySpan a, KeySpan b) {
    std::vector<BasisKey> key;
    key.insert(key.end(), a.begin(), a.end());
    key.insert(key.end(), b.begin(), b.end());
    auto it = D.coeff.find({{static_cast<int>(a.size()), static_cast<int>(b.size())}, key});
    return it == D.coeff.end() ? Rational(0) : it->second;
}

std::string tuple_label(const KoszulData& D, KeySpan a, KeySpan b) {
    std::ostringstream os;
    os << "d^{" << a.size() << "," << b.size() << "}(";
    for (const auto& k : a) os << D.A->space->label(k.deg, k.idx) << "|";
    os << "1";
    for (const auto& k : b) os << "|" << D.B->space->label(k.deg, k.idx);
    os << ")";
    return os.str();
}

}  // namespace

BimodPtr solve_koszul_bimodule(AlgPtr A, AlgPtr B, int dim, int W, KoszulSolveInfo* info) {
    int order = A->order;
    auto Ksp = std::make_shared<BigradedSpace>();
    Ksp->add_basis({0, 0}, "k");

    auto D = std::make_shared<KoszulData>();
    D->A = A;
    D->B = B;
    D->order = order;

    std::vector<BasisKey> apool, bpool;
    for (const auto& [deg, labels] : A->space->basis())
        if (deg.intd >= 1)
            for (int i = 0; i < static_cast<int>(labels.size()); ++i) apool.push_back({deg, i});
    for (const auto& [deg, labels] : B->space->basis())
        if (deg.coh >= 1)
            for (int i = 0; i < static_cast<int>(labels.size()); ++i) bpool.push_back({deg, i});

    // weight-2 seed: canonical pairing on degree-1 elements
    for (BasisKey a : apool) {
        if (a.deg.intd != 1) continue;
        for (BasisKey b : bpool) {
            if (b.deg.coh != 1) continue;
            auto e = symmetric_exponents(*A, a);
            unsigned mask = exterior_mask(*B, b);
            for (int i = 0; i < dim; ++i)
                if (e[static_cast<size_t>(i)] == 1 && (mask & (1u << i)))
                    D->coeff[{{1, 1}, {a, b}}] = 1;
        }
    }

    // tuples with k,l >= 1, k+l = w, augmented slots, sum deg a = sum |b| = s
    auto enumerate_tuples = [&](int w, int s) {
        std::vector<std::pair<std::pair<int, int>, std::vector<BasisKey>>> out;
        for (int k = 1; k < w; ++k) {
            int l = w - k;
            std::vector<BasisKey> cur;
            std::function<void(int, int)> recb = [&](int j, int bsum) {
                if (bsum > s) return;
                if (j == l) {
                    if (bsum == s) out.push_back({{k, l}, cur});
                    return;
                }
                for (BasisKey b : bpool) {
                    cur.push_back(b);
                    recb(j + 1, bsum + b.deg.coh);
                    cur.pop_back();
                }
            };
            std::function<void(int, int)> reca = [&](int i, int degsum) {
                if (degsum > s) return;
                if (i == k) {
                    if (degsum == s) recb(0, 0);
                    return;
                }
                for (BasisKey a : apool) {
                    cur.push_back(a);
                    reca(i + 1, degsum + a.deg.intd);
                    cur.pop_back();
                }
            };
            reca(0, 0);
        }
        return out;
    };

    if (info) info->success = true;
    EvalCtx ctx;

    for (int w = 3; w <= W; ++w) {
        auto unknowns = enumerate_tuples(w, w - 1);
        std::map<std::pair<std::pair<int, int>, std::vector<BasisKey>>, int> col;
        for (size_t i = 0; i < unknowns.size(); ++i) col[unknowns[i]] = static_cast<int>(i);
        if (info) info->unknown_count[w] = static_cast<int>(unknowns.size());

        LinearSystem sys;
        // relation strings: weight w+1, sum deg a = sum |b| = w-1
        for (auto& [kl, slots] : enumerate_tuples(w + 1, w - 1)) {
            int k = kl.first, l = kl.second;
            KeySpan a(slots.data(), static_cast<size_t>(k));
            KeySpan b(slots.data() + k, static_cast<size_t>(l));
            std::vector<std::pair<int, Rational>> lin;
            Rational rhs = 0;
            // A-inserts (inner d2_A), outer unknown of weight w
            for (int j = 0; j + 2 <= k; ++j) {
                Element inner = A->d(a.subspan(static_cast<size_t>(j), 2), ctx);
                int par = j % 2;  // each a-slot has suspended parity 1
                for (const auto& [key, c] : inner.terms()) {
                    if (c.is_zero()) continue;
                    std::vector<BasisKey> t;
                    t.insert(t.end(), a.begin(), a.begin() + j);
                    t.push_back(key);
                    t.insert(t.end(), a.begin() + j + 2, a.end());
                    t.insert(t.end(), b.begin(), b.end());
                    auto it = col.find({{k - 1, l}, t});
                    if (it == col.end()) continue;
                    Rational v = c.at_zero();
                    if (par) v = -v;
                    lin.emplace_back(it->second, v);
                }
            }
            // B-inserts
            int head_par = (k + 1) % 2;
            for (int j = 0; j + 2 <= l; ++j) {
                Element inner = B->d(b.subspan(static_cast<size_t>(j), 2), ctx);
                int par = head_par;
                for (int i = 0; i < j; ++i)
                    par = (((par + b[static_cast<size_t>(i)].deg.coh - 1) % 2) + 2) % 2;
                for (const auto& [key, c] : inner.terms()) {
                    if (c.is_zero()) continue;
                    std::vector<BasisKey> t(a.begin(), a.end());
                    t.insert(t.end(), b.begin(), b.begin() + j);
                    t.push_back(key);
                    t.insert(t.end(), b.begin() + j + 2, b.end());
                    auto it = col.find({{k, l - 1}, t});
                    if (it == col.end()) continue;
                    Rational v = c.at_zero();
                    if (par) v = -v;
                    lin.emplace_back(it->second, v);
                }
            }
            // collapse terms: inner and outer both previously solved
            for (int s3 = 1; s3 <= k; ++s3) {
                for (int s4 = 1; s4 <= l; ++s4) {
                    int iw = s3 + s4;
                    if (iw < 2 || iw > w - 1) continue;
                    int ow = (k - s3) + (l - s4);
                    if (ow < 2 || ow > w - 1) continue;
                    Rational inner = lookup(*D, a.last(static_cast<size_t>(s3)),
                                            b.first(static_cast<size_t>(s4)));
                    if (sgn(inner) == 0) continue;
                    Rational outer = lookup(*D, a.first(static_cast<size_t>(k - s3)),
                                            b.last(static_cast<size_t>(l - s4)));
                    if (sgn(outer) == 0) continue;
                    int par = (k - s3) % 2;  // prefix of a-slots, each parity 1
                    Rational v = inner * outer;
                    if (par) v = -v;
                    rhs -= v;
                }
            }
            if (!lin.empty() || sgn(rhs) != 0) sys.add_equation(std::move(lin), rhs);
        }
        auto sol = sys.solve(static_cast<int>(unknowns.size()));
        if (!sol) {
            if (info) {
                info->success = false;
                info->obstruction = "inconsistent linear system at weight " + std::to_string(w);
            }
            return nullptr;
        }
        if (info) info->gauge_dim[w] = sys.num_free_columns();
        for (size_t i = 0; i < unknowns.size(); ++i)
            if (sgn((*sol)[i]) != 0) D->coeff[unknowns[i]] = (*sol)[i];
    }

    if (info) {
        for (const auto& [key, v] : D->coeff) {
            KeySpan all(key.second);
            info->coefficients.emplace_back(
                tuple_label(*D, all.first(static_cast<size_t>(key.first.first)),
                            all.last(static_cast<size_t>(key.first.second))),
                v);
        }
    }

    auto K = std::make_shared<Bimodule>();
    K->left = A;
    K->right = B;
    K->space = Ksp;
    K->max_k = 1 << 20;
    K->max_l = 1 << 20;
    K->order = order;
    AlgPtr Ac = A, Bc = B;
    SpacePtr Kspc = Ksp;
    int Wsolved = W;
    K->taylor = [D, Kspc, order, Ac, Bc, Wsolved](KeySpan a, BasisKey m, KeySpan b,
                                                  EvalCtx& ctx) -> Element {
        Element out(Kspc.get(), order);
        size_t k = a.size(), l = b.size();
        if (k == 0 && l == 0) return out;  // no differential
        if (k == 1 && l == 0) {
            out.add_term(m, Ac->augmentation(a[0]), ctx);  // d^{1,0}(sa|sk) = eps(a) sk
            return out;
        }
        if (k == 0 && l == 1) {
            out.add_term(m, Bc->augmentation(b[0]), ctx);  // (-1)^{|k|} with |k| = 0
            return out;
        }
        for (const auto& x : a)
            if (x.deg == Bidegree{0, 0}) return out;  // strict unitality
        for (const auto& x : b)
            if (x.deg == Bidegree{0, 0}) return out;
        if (static_cast<int>(k + l) > Wsolved) {
            // a (d2)-admissible tuple beyond the solved weight is a
            // truncation, not a zero
            int sa = 0, sb = 0;
            for (const auto& x : a) sa += x.deg.intd;
            for (const auto& x : b) sb += x.deg.coh;
            if (sa == sb && sa == static_cast<int>(k + l) - 1) ctx.truncated = true;
            return out;
        }
        Rational c = lookup(*D, a, b);
        if (sgn(c) != 0) out.add_term(m, Scalar::constant(c, order), ctx);
        return out;
    };
    return K;
}

KoszulTriple make_koszul_triple(int dim, int W, Window window, int order) {
    KoszulTriple T;
    T.dim = dim;
    T.W = W;
    T.window = window;
    T.order = order;
    T.A = make_symmetric(dim, window.intd_max, order);
    T.B = make_exterior(dim, order);
    T.K = solve_koszul_bimodule(T.A, T.B, dim, W, &T.solve_info);
    if (!T.K) throw structural_error("koszul solver failed: " + T.solve_info.obstruction);
    return T;
}

}  // namespace akb
