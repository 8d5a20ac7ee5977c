#include "akb/ainfty.hpp"

#include <algorithm>
#include <cassert>
#include <sstream>

namespace akb {
namespace {

// parity (0/1) of the sum of suspended coh degrees, i.e. sum (coh-1)
int susp_parity(KeySpan keys) {
    int s = 0;
    for (const auto& k : keys) s += k.deg.coh - 1;
    return ((s % 2) + 2) % 2;
}

int susp_parity_one(BasisKey k) {
    return (((k.deg.coh - 1) % 2) + 2) % 2;
}

void add_term_signed(Element& acc, const Element& v, const Scalar& c, int parity, EvalCtx& ctx) {
    if (parity) {
        Scalar nc = -c;
        acc.add_scaled(v, nc, ctx);
    } else {
        acc.add_scaled(v, c, ctx);
    }
}

std::vector<BasisKey> splice(KeySpan a, size_t j, size_t s, BasisKey key) {
    std::vector<BasisKey> out;
    out.reserve(a.size() - s + 1);
    out.insert(out.end(), a.begin(), a.begin() + j);
    out.push_back(key);
    out.insert(out.end(), a.begin() + j + s, a.end());
    return out;
}

struct Pool {
    std::vector<BasisKey> keys;
    // per-slot increment bounds in (coh, intd) of raw label bidegrees
    int cmin = 0, cmax = 0, imin = 0, imax = 0;
    bool empty() const { return keys.empty(); }
};

Pool make_pool(const BigradedSpace& sp, const Window& win) {
    Pool p;
    bool first = true;
    for (const auto& [d, labels] : sp.basis()) {
        if (!win.contains(d) || labels.empty()) continue;
        for (int i = 0; i < static_cast<int>(labels.size()); ++i) p.keys.push_back({d, i});
        if (first) {
            p.cmin = p.cmax = d.coh;
            p.imin = p.imax = d.intd;
            first = false;
        } else {
            p.cmin = std::min(p.cmin, d.coh);
            p.cmax = std::max(p.cmax, d.coh);
            p.imin = std::min(p.imin, d.intd);
            p.imax = std::max(p.imax, d.intd);
        }
    }
    return p;
}

struct Hull {
    int cmin = 0, cmax = 0, imin = 0, imax = 0;
    bool empty = true;
};

Hull support_hull(const BigradedSpace& sp) {
    Hull h;
    for (const auto& d : sp.support()) {
        if (h.empty) {
            h = {d.coh, d.coh, d.intd, d.intd, false};
        } else {
            h.cmin = std::min(h.cmin, d.coh);
            h.cmax = std::max(h.cmax, d.coh);
            h.imin = std::min(h.imin, d.intd);
            h.imax = std::max(h.imax, d.intd);
        }
    }
    return h;
}

std::string render_string(const BigradedSpace* asp, KeySpan a, const BigradedSpace* msp,
                          const BasisKey* m, const BigradedSpace* bsp, KeySpan b) {
    std::ostringstream os;
    os << "(";
    bool first = true;
    for (const auto& k : a) {
        if (!first) os << "|";
        os << asp->label(k.deg, k.idx);
        first = false;
    }
    if (m) {
        if (!first) os << "|";
        os << "[" << msp->label(m->deg, m->idx) << "]";
        first = false;
    }
    for (const auto& k : b) {
        if (!first) os << "|";
        os << bsp->label(k.deg, k.idx);
        first = false;
    }
    os << ")";
    return os.str();
}

// Enumerates strings (a_1..a_k | m | b_1..b_l), k+l <= W, slots in win,
// keeping only strings whose relation value bidegree meets the target
// support (sound: elsewhere every term is zero or pure truncation).
// D = total coh degree of the operator whose value is inspected.
void drive_bimod_strings(
    const BigradedSpace& Asp, const BigradedSpace& Msp, const BigradedSpace& Bsp,
    const BigradedSpace& tgt, int D, int W, const Window& win, CheckReport& rep,
    const std::function<Element(KeySpan, BasisKey, KeySpan, EvalCtx&)>& residual,
    const std::function<int(BasisKey)>& slot_weight = {}) {
    Pool ap = make_pool(Asp, win);
    Pool bp = make_pool(Bsp, win);
    Pool mp = make_pool(Msp, win);
    Hull th = support_hull(tgt);
    if (th.empty || mp.empty()) return;

    std::vector<BasisKey> a, b;
    // value label bidegree for string with n slots and raw sums (C, I):
    //   coh = C - n + 1 + D,  intd = I
    auto finish = [&](BasisKey m) {
        int n = static_cast<int>(a.size() + b.size()) + 1;
        int C = m.deg.coh, I = m.deg.intd;
        for (const auto& k : a) { C += k.deg.coh; I += k.deg.intd; }
        for (const auto& k : b) { C += k.deg.coh; I += k.deg.intd; }
        Bidegree vd{C - n + 1 + D, I};
        if (tgt.dim(vd) == 0) return;  // zero or invisible at this window
        EvalCtx ctx;
        Element r = residual(a, m, b, ctx);
        if (ctx.truncated) {
            rep.strings_edge++;
            return;
        }
        rep.strings_checked++;
        if (!r.is_zero()) {
            Witness w;
            w.basis_string = render_string(&Asp, a, &Msp, &m, &Bsp, b);
            w.deg = vd;
            w.hbar_order = first_nonzero_order(r);
            w.lhs = r.to_string();
            w.rhs = "0";
            rep.record_failure(std::move(w));
        }
    };

    // feasibility pruning: can value-coh / intd still reach target hull?
    auto feasible = [&](int C, int I, int n_so_far, int a_left, int b_left, BasisKey m) {
        int n = n_so_far + a_left + b_left + 1;
        int cmin = C + m.deg.coh + a_left * ap.cmin + b_left * bp.cmin - n + 1 + D;
        int cmax = C + m.deg.coh + a_left * ap.cmax + b_left * bp.cmax - n + 1 + D;
        int imin = I + m.deg.intd + a_left * ap.imin + b_left * bp.imin;
        int imax = I + m.deg.intd + a_left * ap.imax + b_left * bp.imax;
        return cmax >= th.cmin && cmin <= th.cmax && imax >= th.imin && imin <= th.imax;
    };

    for (BasisKey m : mp.keys) {
        int Wm = W - (slot_weight ? slot_weight(m) : 0);
        if (Wm < 0) continue;
        for (int k = 0; k <= Wm; ++k) {
            for (int l = 0; k + l <= Wm; ++l) {
                if (k > 0 && ap.empty()) continue;
                if (l > 0 && bp.empty()) continue;
                // recursive fill
                a.clear();
                b.clear();
                std::function<void(int, int, int, int)> rec = [&](int ai, int bi, int C, int I) {
                    if (!feasible(C, I, ai + bi, k - ai, l - bi, m)) return;
                    if (ai < k) {
                        for (BasisKey key : ap.keys) {
                            a.push_back(key);
                            rec(ai + 1, bi, C + key.deg.coh, I + key.deg.intd);
                            a.pop_back();
                        }
                    } else if (bi < l) {
                        for (BasisKey key : bp.keys) {
                            b.push_back(key);
                            rec(ai, bi + 1, C + key.deg.coh, I + key.deg.intd);
                            b.pop_back();
                        }
                    } else {
                        finish(m);
                    }
                };
                rec(0, 0, 0, 0);
            }
        }
    }
}

// same driver for pure algebra strings (a_1..a_k), k <= W
void drive_alg_strings(const BigradedSpace& Asp, const BigradedSpace& tgt, int D, int W,
                       const Window& win, CheckReport& rep,
                       const std::function<Element(KeySpan, EvalCtx&)>& residual) {
    Pool ap = make_pool(Asp, win);
    Hull th = support_hull(tgt);
    if (th.empty) return;
    std::vector<BasisKey> a;
    auto finish = [&]() {
        int n = static_cast<int>(a.size());
        int C = 0, I = 0;
        for (const auto& k : a) { C += k.deg.coh; I += k.deg.intd; }
        Bidegree vd{C - n + 1 + D, I};
        if (tgt.dim(vd) == 0) return;
        EvalCtx ctx;
        Element r = residual(a, ctx);
        if (ctx.truncated) {
            rep.strings_edge++;
            return;
        }
        rep.strings_checked++;
        if (!r.is_zero()) {
            Witness w;
            w.basis_string = render_string(&Asp, a, nullptr, nullptr, &Asp, {});
            w.deg = vd;
            w.hbar_order = first_nonzero_order(r);
            w.lhs = r.to_string();
            w.rhs = "0";
            rep.record_failure(std::move(w));
        }
    };
    auto feasible = [&](int C, int I, int filled, int left) {
        int n = filled + left;
        int cmin = C + left * ap.cmin - n + 1 + D;
        int cmax = C + left * ap.cmax - n + 1 + D;
        int imin = I + left * ap.imin;
        int imax = I + left * ap.imax;
        return cmax >= th.cmin && cmin <= th.cmax && imax >= th.imin && imin <= th.imax;
    };
    for (int k = 0; k <= W; ++k) {
        std::function<void(int, int, int)> rec = [&](int ai, int C, int I) {
            if (!feasible(C, I, ai, k - ai)) return;
            if (ai < k) {
                for (BasisKey key : ap.keys) {
                    a.push_back(key);
                    rec(ai + 1, C + key.deg.coh, I + key.deg.intd);
                    a.pop_back();
                }
            } else {
                finish();
            }
        };
        rec(0, 0, 0);
    }
}

// sum over single coderivation moves of d_M on the string, feeding the
// moved string to `outer`; this is proj . OUTER . d_M on the string.
Element sum_over_moves(const Algebra& A, const Bimodule& M, const Algebra& B,
                       KeySpan a, BasisKey m, KeySpan b,
                       const std::function<Element(KeySpan, BasisKey, KeySpan, EvalCtx&)>& outer,
                       const BigradedSpace* out_space, int order, EvalCtx& ctx) {
    Element acc(out_space, order);
    size_t k = a.size(), l = b.size();
    // A-inserts
    for (size_t s1 = 0; s1 <= k; ++s1) {
        if (static_cast<int>(s1) > A.max_arity) break;
        if (s1 == 0 && !A.has_curvature) continue;
        for (size_t j = 0; j + s1 <= k; ++j) {
            Element inner = A.d(a.subspan(j, s1), ctx);
            if (inner.is_zero()) continue;
            int par = susp_parity(a.first(j));
            for (const auto& [key, c] : inner.terms()) {
                auto buf = splice(a, j, s1, key);
                Element v = outer(buf, m, b, ctx);
                add_term_signed(acc, v, c, par, ctx);
            }
        }
    }
    // B-inserts
    int head_par = (susp_parity(a) + susp_parity_one(m)) % 2;
    for (size_t s2 = 0; s2 <= l; ++s2) {
        if (static_cast<int>(s2) > B.max_arity) break;
        if (s2 == 0 && !B.has_curvature) continue;
        for (size_t j = 0; j + s2 <= l; ++j) {
            Element inner = B.d(b.subspan(j, s2), ctx);
            if (inner.is_zero()) continue;
            int par = (head_par + susp_parity(b.first(j))) % 2;
            for (const auto& [key, c] : inner.terms()) {
                auto buf = splice(b, j, s2, key);
                Element v = outer(a, m, buf, ctx);
                add_term_signed(acc, v, c, par, ctx);
            }
        }
    }
    // M-collapses
    for (size_t s3 = 0; s3 <= k; ++s3) {
        for (size_t s4 = 0; s4 <= l; ++s4) {
            Element inner = M.d(a.last(s3), m, b.first(s4), ctx);
            if (inner.is_zero()) continue;
            int par = susp_parity(a.first(k - s3));
            for (const auto& [mk, c] : inner.terms()) {
                Element v = outer(a.first(k - s3), mk, b.last(l - s4), ctx);
                add_term_signed(acc, v, c, par, ctx);
            }
        }
    }
    return acc;
}

// one-sided version; a is the algebra block in natural order
Element sum_over_moves_mod(const Module& M, KeySpan a, BasisKey m,
                           const std::function<Element(KeySpan, BasisKey, EvalCtx&)>& outer,
                           const BigradedSpace* out_space, int order, EvalCtx& ctx) {
    const Algebra& A = *M.alg;
    Element acc(out_space, order);
    size_t k = a.size();
    // algebra inserts
    for (size_t s1 = 0; s1 <= k; ++s1) {
        if (static_cast<int>(s1) > A.max_arity) break;
        if (s1 == 0 && !A.has_curvature) continue;
        for (size_t j = 0; j + s1 <= k; ++j) {
            Element inner = A.d(a.subspan(j, s1), ctx);
            if (inner.is_zero()) continue;
            int par = susp_parity(a.first(j));
            if (M.side == Side::right) par = (par + susp_parity_one(m)) % 2;
            for (const auto& [key, c] : inner.terms()) {
                auto buf = splice(a, j, s1, key);
                Element v = outer(buf, m, ctx);
                add_term_signed(acc, v, c, par, ctx);
            }
        }
    }
    // module collapses
    for (size_t s = 0; s <= k; ++s) {
        KeySpan block = (M.side == Side::left) ? a.last(s) : a.first(s);
        Element inner = M.d(block, m, ctx);
        if (inner.is_zero()) continue;
        int par = (M.side == Side::left) ? susp_parity(a.first(k - s)) : 0;
        KeySpan rest = (M.side == Side::left) ? a.first(k - s) : a.last(k - s);
        for (const auto& [mk, c] : inner.terms()) {
            Element v = outer(rest, mk, ctx);
            add_term_signed(acc, v, c, par, ctx);
        }
    }
    return acc;
}

}  // namespace

Element Algebra::d(KeySpan a, EvalCtx& ctx) const {
    if (static_cast<int>(a.size()) > max_arity) return zero();
    if (a.empty() && !has_curvature) return zero();
    return taylor(a, ctx);
}

Element Module::d(KeySpan a, BasisKey m, EvalCtx& ctx) const {
    if (static_cast<int>(a.size()) > max_arity) return zero();
    return taylor(a, m, ctx);
}

Element Bimodule::d(KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) const {
    if (static_cast<int>(a.size()) > max_k || static_cast<int>(b.size()) > max_l) return zero();
    if (supports && !supports(static_cast<int>(a.size()), static_cast<int>(b.size()))) return zero();
    return taylor(a, m, b, ctx);
}

Element AMorphism::t(KeySpan a, EvalCtx& ctx) const {
    assert(kind == MorKind::algebra);
    return alg_taylor(a, ctx);
}

Element AMorphism::t(KeySpan a, BasisKey m, EvalCtx& ctx) const {
    assert(kind == MorKind::module);
    if (static_cast<int>(a.size()) > max_k) return Element(mod_tgt->space.get(), order);
    return mod_taylor(a, m, ctx);
}

Element AMorphism::t(KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) const {
    assert(kind == MorKind::bimodule);
    if (static_cast<int>(a.size()) > max_k || static_cast<int>(b.size()) > max_l)
        return Element(bim_tgt->space.get(), order);
    return bim_taylor(a, m, b, ctx);
}

void StoredTaylor::set(int k, int l, std::vector<BasisKey> slots, Element v) {
    entries[{{k, l}, std::move(slots)}] = std::move(v);
}

const Element* StoredTaylor::get(int k, int l, KeySpan slots) const {
    thread_local std::vector<BasisKey> buf;
    buf.assign(slots.begin(), slots.end());
    auto it = entries.find({{k, l}, buf});
    return it == entries.end() ? nullptr : &it->second;
}

CheckReport check_algebra(const Algebra& A, int W, const Window& win) {
    CheckReport rep;
    rep.suite = "check_algebra";
    drive_alg_strings(*A.space, *A.space, 2, W, win, rep, [&](KeySpan a, EvalCtx& ctx) {
        Element acc = A.zero();
        size_t k = a.size();
        for (size_t s1 = 0; s1 <= k; ++s1) {
            if (static_cast<int>(s1) > A.max_arity) break;
            if (s1 == 0 && !A.has_curvature) continue;
            for (size_t j = 0; j + s1 <= k; ++j) {
                Element inner = A.d(a.subspan(j, s1), ctx);
                if (inner.is_zero()) continue;
                int par = susp_parity(a.first(j));
                for (const auto& [key, c] : inner.terms()) {
                    auto buf = splice(a, j, s1, key);
                    Element v = A.d(buf, ctx);
                    add_term_signed(acc, v, c, par, ctx);
                }
            }
        }
        return acc;
    });
    return rep;
}

namespace {
const BigradedSpace kEmptySpace;
}

CheckReport check_module(const Module& M, int W, const Window& win) {
    CheckReport rep;
    rep.suite = "check_module";
    auto outer = [&](KeySpan a, BasisKey m, EvalCtx& ctx) { return M.d(a, m, ctx); };
    const BigradedSpace& As = (M.side == Side::left) ? *M.alg->space : kEmptySpace;
    const BigradedSpace& Bs = (M.side == Side::right) ? *M.alg->space : kEmptySpace;
    drive_bimod_strings(As, *M.space, Bs, *M.space, 2, W, win, rep,
                        [&](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
                            KeySpan blk = (M.side == Side::left) ? a : b;
                            return sum_over_moves_mod(M, blk, m, outer, M.space.get(), M.order, ctx);
                        },
                        M.slot_weight);
    return rep;
}

CheckReport check_bimodule(const Bimodule& M, int W, const Window& win) {
    CheckReport rep;
    rep.suite = "check_bimodule";
    auto outer = [&](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) { return M.d(a, m, b, ctx); };
    drive_bimod_strings(*M.left->space, *M.space, *M.right->space, *M.space, 2, W, win, rep,
                        [&](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
                            return sum_over_moves(*M.left, M, *M.right, a, m, b, outer,
                                                  M.space.get(), M.order, ctx);
                        },
                        M.slot_weight);
    return rep;
}

namespace {

Element morphism_residual_bimod(const AMorphism& F, KeySpan a, BasisKey m, KeySpan b,
                                EvalCtx& ctx) {
    const Bimodule& M = *F.bim_src;
    const Bimodule& N = *F.bim_tgt;
    auto outerF = [&](KeySpan x, BasisKey mm, KeySpan y, EvalCtx& c) { return F.t(x, mm, y, c); };
    Element lhs = sum_over_moves(*M.left, M, *M.right, a, m, b, outerF, N.space.get(), N.order, ctx);
    // rhs: inner F then collapse by d_N
    Element rhs(N.space.get(), N.order);
    size_t k = a.size(), l = b.size();
    for (size_t s3 = 0; s3 <= k; ++s3) {
        for (size_t s4 = 0; s4 <= l; ++s4) {
            Element inner = F.t(a.last(s3), m, b.first(s4), ctx);
            if (inner.is_zero()) continue;
            int par = (F.coh_shift % 2 != 0) ? susp_parity(a.first(k - s3)) : 0;
            for (const auto& [mk, c] : inner.terms()) {
                Element v = N.d(a.first(k - s3), mk, b.last(l - s4), ctx);
                add_term_signed(rhs, v, c, par, ctx);
            }
        }
    }
    rhs.negate();
    EvalCtx dummy;
    lhs.add(rhs, dummy);
    return lhs;
}

Element morphism_residual_mod(const AMorphism& F, KeySpan a, BasisKey m, EvalCtx& ctx) {
    const Module& M = *F.mod_src;
    const Module& N = *F.mod_tgt;
    auto outerF = [&](KeySpan x, BasisKey mm, EvalCtx& c) { return F.t(x, mm, c); };
    Element lhs = sum_over_moves_mod(M, a, m, outerF, N.space.get(), N.order, ctx);
    Element rhs(N.space.get(), N.order);
    size_t k = a.size();
    for (size_t s = 0; s <= k; ++s) {
        KeySpan block = (M.side == Side::left) ? a.last(s) : a.first(s);
        KeySpan rest = (M.side == Side::left) ? a.first(k - s) : a.last(k - s);
        Element inner = F.t(block, m, ctx);
        if (inner.is_zero()) continue;
        int par = 0;
        if (F.coh_shift % 2 != 0 && M.side == Side::left) par = susp_parity(rest);
        for (const auto& [mk, c] : inner.terms()) {
            Element v = N.d(rest, mk, ctx);
            add_term_signed(rhs, v, c, par, ctx);
        }
    }
    rhs.negate();
    EvalCtx dummy;
    lhs.add(rhs, dummy);
    return lhs;
}

// expand d_B^r over blocks of F-values (algebra morphism rhs)
void expand_blocks(const Algebra& B, std::vector<Element>& blocks, size_t i,
                   std::vector<BasisKey>& keys, Scalar coef, Element& acc, EvalCtx& ctx) {
    if (i == blocks.size()) {
        Element v = B.d(keys, ctx);
        acc.add_scaled(v, coef, ctx);
        return;
    }
    for (const auto& [key, c] : blocks[i].terms()) {
        keys.push_back(key);
        expand_blocks(B, blocks, i + 1, keys, coef * c, acc, ctx);
        keys.pop_back();
    }
}

Element morphism_residual_alg(const AMorphism& F, KeySpan a, EvalCtx& ctx) {
    const Algebra& A = *F.alg_src;
    const Algebra& B = *F.alg_tgt;
    if (A.has_curvature || B.has_curvature)
        throw structural_error("algebra morphism check requires flat algebras");
    Element lhs(B.space.get(), B.order);
    size_t k = a.size();
    for (size_t s1 = 1; s1 <= k; ++s1) {
        if (static_cast<int>(s1) > A.max_arity) break;
        for (size_t j = 0; j + s1 <= k; ++j) {
            Element inner = A.d(a.subspan(j, s1), ctx);
            if (inner.is_zero()) continue;
            int par = susp_parity(a.first(j));
            for (const auto& [key, c] : inner.terms()) {
                auto buf = splice(a, j, s1, key);
                Element v = F.t(buf, ctx);
                add_term_signed(lhs, v, c, par, ctx);
            }
        }
    }
    // rhs: sum over splittings into r >= 1 nonempty blocks
    Element rhs(B.space.get(), B.order);
    if (k >= 1) {
        std::vector<size_t> cuts;  // block boundaries
        std::function<void(size_t)> split = [&](size_t from) {
            if (from == k) {
                std::vector<Element> blocks;
                size_t start = 0;
                bool dead = false;
                for (size_t cut : cuts) {
                    Element bl = F.t(a.subspan(start, cut - start), ctx);
                    if (bl.is_zero()) { dead = true; break; }
                    blocks.push_back(std::move(bl));
                    start = cut;
                }
                if (!dead) {
                    std::vector<BasisKey> keys;
                    expand_blocks(B, blocks, 0, keys, Scalar::one(B.order), rhs, ctx);
                }
                return;
            }
            for (size_t next = from + 1; next <= k; ++next) {
                cuts.push_back(next);
                split(next);
                cuts.pop_back();
            }
        };
        split(0);
    }
    rhs.negate();
    EvalCtx dummy;
    lhs.add(rhs, dummy);
    return lhs;
}

}  // namespace

CheckReport check_morphism(const AMorphism& F, int W, const Window& win) {
    CheckReport rep;
    rep.suite = "check_morphism";
    if (F.coh_shift != 0) throw structural_error("check_morphism: not a (0,0) morphism");
    if (F.kind == MorKind::bimodule) {
        const Bimodule& M = *F.bim_src;
        drive_bimod_strings(*M.left->space, *M.space, *M.right->space, *F.bim_tgt->space, 1, W,
                            win, rep, [&](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
                                return morphism_residual_bimod(F, a, m, b, ctx);
                            },
                            M.slot_weight);
    } else if (F.kind == MorKind::module) {
        const Module& M = *F.mod_src;
        const BigradedSpace& As = (M.side == Side::left) ? *M.alg->space : kEmptySpace;
        const BigradedSpace& Bs = (M.side == Side::right) ? *M.alg->space : kEmptySpace;
        drive_bimod_strings(As, *M.space, Bs, *F.mod_tgt->space, 1, W, win, rep,
                            [&](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
                                KeySpan blk = (M.side == Side::left) ? a : b;
                                return morphism_residual_mod(F, blk, m, ctx);
                            },
                            M.slot_weight);
    } else {
        drive_alg_strings(*F.alg_src->space, *F.alg_tgt->space, 1, W, win, rep,
                          [&](KeySpan a, EvalCtx& ctx) { return morphism_residual_alg(F, a, ctx); });
    }
    return rep;
}

CheckReport check_homotopy(const AMorphism& f, const AMorphism& g, const AMorphism& H, int W,
                           const Window& win) {
    CheckReport rep;
    rep.suite = "check_homotopy";
    if (H.coh_shift != -1) throw structural_error("check_homotopy: H must have bidegree (-1,0)");
    if (f.kind != g.kind || f.kind != H.kind) throw structural_error("check_homotopy: kind mismatch");
    if (f.kind == MorKind::bimodule) {
        const Bimodule& M = *f.bim_src;
        const Bimodule& N = *f.bim_tgt;
        drive_bimod_strings(
            *M.left->space, *M.space, *M.right->space, *N.space, 0, W, win, rep,
            [&](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
                Element want = f.t(a, m, b, ctx);
                {
                    Element gw = g.t(a, m, b, ctx);
                    gw.negate();
                    want.add(gw, ctx);
                }
                auto outerH = [&](KeySpan x, BasisKey mm, KeySpan y, EvalCtx& c) {
                    return H.t(x, mm, y, c);
                };
                Element got =
                    sum_over_moves(*M.left, M, *M.right, a, m, b, outerH, N.space.get(), N.order, ctx);
                size_t k = a.size(), l = b.size();
                for (size_t s3 = 0; s3 <= k; ++s3) {
                    for (size_t s4 = 0; s4 <= l; ++s4) {
                        Element inner = H.t(a.last(s3), m, b.first(s4), ctx);
                        if (inner.is_zero()) continue;
                        int par = susp_parity(a.first(k - s3));
                        for (const auto& [mk, c] : inner.terms()) {
                            Element v = N.d(a.first(k - s3), mk, b.last(l - s4), ctx);
                            add_term_signed(got, v, c, par, ctx);
                        }
                    }
                }
                got.negate();
                want.add(got, ctx);
                return want;
            },
            M.slot_weight);
    } else if (f.kind == MorKind::module) {
        const Module& M = *f.mod_src;
        const Module& N = *f.mod_tgt;
        const BigradedSpace& As = (M.side == Side::left) ? *M.alg->space : kEmptySpace;
        const BigradedSpace& Bs = (M.side == Side::right) ? *M.alg->space : kEmptySpace;
        drive_bimod_strings(
            As, *M.space, Bs, *N.space, 0, W, win, rep,
            [&](KeySpan aa, BasisKey m, KeySpan bb, EvalCtx& ctx) -> Element {
                KeySpan a = (M.side == Side::left) ? aa : bb;
                Element want = f.t(a, m, ctx);
                {
                    Element gw = g.t(a, m, ctx);
                    gw.negate();
                    want.add(gw, ctx);
                }
                auto outerH = [&](KeySpan x, BasisKey mm, EvalCtx& c) { return H.t(x, mm, c); };
                Element got = sum_over_moves_mod(M, a, m, outerH, N.space.get(), N.order, ctx);
                size_t k = a.size();
                for (size_t s = 0; s <= k; ++s) {
                    KeySpan block = (M.side == Side::left) ? a.last(s) : a.first(s);
                    KeySpan rest = (M.side == Side::left) ? a.first(k - s) : a.last(k - s);
                    Element inner = H.t(block, m, ctx);
                    if (inner.is_zero()) continue;
                    int par = (M.side == Side::left) ? susp_parity(rest) : 0;
                    for (const auto& [mk, c] : inner.terms()) {
                        Element v = N.d(rest, mk, ctx);
                        add_term_signed(got, v, c, par, ctx);
                    }
                }
                got.negate();
                want.add(got, ctx);
                return want;
            },
            M.slot_weight);
    } else {
        throw structural_error("check_homotopy: algebra homotopies not supported");
    }
    return rep;
}

CheckReport check_strict_unitality(const Algebra& A, int W, const Window& win) {
    CheckReport rep;
    rep.suite = "check_strict_unitality(algebra)";
    if (!A.unit) throw structural_error("check_strict_unitality: no unit");
    BasisKey u = *A.unit;
    EvalCtx ctx;
    // d^1(s1) = 0
    std::vector<BasisKey> one{u};
    rep.strings_checked++;
    if (!A.d(std::span(one).first(1), ctx).is_zero())
        rep.record_failure({"(1)", u.deg, -1, "d1(1)", "0"});
    Pool ap = make_pool(*A.space, win);
    for (BasisKey x : ap.keys) {
        // d2(1|x) = sx ; d2(x|1) = (-1)^{|x|} sx
        std::vector<BasisKey> s1{u, x}, s2{x, u};
        Element left = A.d(s1, ctx);
        Element right = A.d(s2, ctx);
        Element ex = Element::basis(A.space.get(), x, A.order);
        rep.strings_checked += 2;
        if (!(left == ex)) rep.record_failure({"(1|" + A.space->label(x.deg, x.idx) + ")", x.deg, -1, left.to_string(), ex.to_string()});
        if (x.deg.coh % 2 != 0) ex.negate();
        if (!(right == ex)) rep.record_failure({"(" + A.space->label(x.deg, x.idx) + "|1)", x.deg, -1, right.to_string(), ex.to_string()});
    }
    // arity >= 3 with one unit slot: zero
    for (int n = 3; n <= std::min(W, A.max_arity); ++n) {
        std::vector<BasisKey> buf(static_cast<size_t>(n), u);
        std::function<void(int, bool)> rec = [&](int i, bool used_unit) {
            if (i == n) {
                if (!used_unit) return;
                EvalCtx c2;
                rep.strings_checked++;
                if (!A.d(buf, c2).is_zero() && !c2.truncated)
                    rep.record_failure({"unit string arity " + std::to_string(n), {}, -1, "nonzero", "0"});
                return;
            }
            for (BasisKey x : ap.keys) {
                buf[static_cast<size_t>(i)] = x;
                rec(i + 1, used_unit || x == u);
            }
        };
        rec(0, false);
    }
    return rep;
}

CheckReport check_strict_unitality(const Bimodule& M, int W, const Window& win) {
    CheckReport rep;
    rep.suite = "check_strict_unitality(bimodule)";
    if (!M.left->unit || !M.right->unit) throw structural_error("strict unitality: missing unit");
    BasisKey ua = *M.left->unit, ub = *M.right->unit;
    Pool mp = make_pool(*M.space, win);
    Pool apool = make_pool(*M.left->space, win);
    Pool bpool = make_pool(*M.right->space, win);
    EvalCtx ctx;
    for (BasisKey m : mp.keys) {
        std::vector<BasisKey> au{ua}, bu{ub};
        Element lm = M.d(au, m, {}, ctx);
        Element rm = M.d({}, m, bu, ctx);
        Element em = Element::basis(M.space.get(), m, M.order);
        rep.strings_checked += 2;
        if (!(lm == em))
            rep.record_failure({"(1|[m])", m.deg, -1, lm.to_string(), em.to_string()});
        if (m.deg.coh % 2 != 0) em.negate();
        if (!(rm == em))
            rep.record_failure({"([m]|1)", m.deg, -1, rm.to_string(), em.to_string()});
    }
    // components of total arity >= 2 vanish on strings with a unit slot
    auto test_zero = [&](KeySpan a, BasisKey m, KeySpan b) {
        EvalCtx c2;
        Element v = M.d(a, m, b, c2);
        rep.strings_checked++;
        if (!v.is_zero() && !c2.truncated)
            rep.record_failure({render_string(M.left->space.get(), a, M.space.get(), &m,
                                              M.right->space.get(), b),
                                m.deg, -1, v.to_string(), "0"});
    };
    for (BasisKey m : mp.keys) {
        for (int k = 0; k <= W; ++k) {
            for (int l = 0; k + l <= W && k + l <= 3; ++l) {
                if (k + l < 2) continue;
                // place a unit in one slot, other slots arbitrary
                std::vector<BasisKey> a(static_cast<size_t>(k)), b(static_cast<size_t>(l));
                std::function<void(int)> rec = [&](int i) {
                    if (i == k + l) {
                        bool has_unit = false;
                        for (auto& x : a) has_unit |= (x == ua);
                        for (auto& x : b) has_unit |= (x == ub);
                        if (has_unit) test_zero(a, m, b);
                        return;
                    }
                    if (i < k) {
                        for (BasisKey x : apool.keys) { a[static_cast<size_t>(i)] = x; rec(i + 1); }
                    } else {
                        for (BasisKey x : bpool.keys) { b[static_cast<size_t>(i - k)] = x; rec(i + 1); }
                    }
                };
                rec(0);
            }
        }
    }
    return rep;
}

CheckReport check_morphisms_equal(const AMorphism& f, const AMorphism& g, int W,
                                  const Window& win) {
    CheckReport rep;
    rep.suite = "check_morphisms_equal";
    if (f.kind != g.kind || f.coh_shift != g.coh_shift)
        throw structural_error("morphism comparison shape mismatch");
    if (f.kind == MorKind::bimodule) {
        const Bimodule& M = *f.bim_src;
        drive_bimod_strings(*M.left->space, *M.space, *M.right->space, *f.bim_tgt->space,
                            f.coh_shift, W, win, rep,
                            [&](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
                                Element r = f.t(a, m, b, ctx);
                                Element s = g.t(a, m, b, ctx);
                                s.negate();
                                r.add(s, ctx);
                                return r;
                            },
                            M.slot_weight);
    } else if (f.kind == MorKind::module) {
        const Module& M = *f.mod_src;
        const BigradedSpace& As = (M.side == Side::left) ? *M.alg->space : kEmptySpace;
        const BigradedSpace& Bs = (M.side == Side::right) ? *M.alg->space : kEmptySpace;
        drive_bimod_strings(As, *M.space, Bs, *f.mod_tgt->space, f.coh_shift, W, win, rep,
                            [&](KeySpan aa, BasisKey m, KeySpan bb, EvalCtx& ctx) -> Element {
                                KeySpan a = (M.side == Side::left) ? aa : bb;
                                Element r = f.t(a, m, ctx);
                                Element s = g.t(a, m, ctx);
                                s.negate();
                                r.add(s, ctx);
                                return r;
                            },
                            M.slot_weight);
    } else {
        drive_alg_strings(*f.alg_src->space, *f.alg_tgt->space, 0, W, win, rep,
                          [&](KeySpan a, EvalCtx& ctx) {
                              Element r = f.t(a, ctx);
                              Element s = g.t(a, ctx);
                              s.negate();
                              r.add(s, ctx);
                              return r;
                          });
    }
    return rep;
}

CheckReport check_internal_grading(const Bimodule& M, int W, const Window& win) {
    CheckReport rep;
    rep.suite = "check_internal_grading";
    drive_bimod_strings(*M.left->space, *M.space, *M.right->space, *M.space, 2, W, win, rep,
                        [&](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
                            Element out = M.zero();
                            for (size_t s3 = 0; s3 <= a.size(); ++s3)
                                for (size_t s4 = 0; s4 <= b.size(); ++s4) {
                                    int want = m.deg.intd;
                                    for (auto& x : a.last(s3)) want += x.deg.intd;
                                    for (auto& x : b.first(s4)) want += x.deg.intd;
                                    Element v = M.d(a.last(s3), m, b.first(s4), ctx);
                                    for (const auto& [k, c] : v.terms())
                                        if (!c.is_zero() && k.deg.intd != want) out.add_term(k, c, ctx);
                                }
                            return out;
                        });
    rep.suite = "check_internal_grading";
    return rep;
}

MorPtr identity_morphism(BimodPtr M) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = M;
    F->bim_tgt = M;
    F->order = M->order;
    F->max_k = 0;
    F->max_l = 0;
    const Bimodule* mp = M.get();
    F->bim_taylor = [mp](KeySpan a, BasisKey m, KeySpan b, EvalCtx&) {
        if (!a.empty() || !b.empty()) return Element(mp->space.get(), mp->order);
        return Element::basis(mp->space.get(), m, mp->order);
    };
    return F;
}

MorPtr identity_morphism(ModPtr M) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::module;
    F->mod_src = M;
    F->mod_tgt = M;
    F->order = M->order;
    F->max_k = 0;
    const Module* mp = M.get();
    F->mod_taylor = [mp](KeySpan a, BasisKey m, EvalCtx&) {
        if (!a.empty()) return Element(mp->space.get(), mp->order);
        return Element::basis(mp->space.get(), m, mp->order);
    };
    return F;
}

MorPtr identity_morphism_alg(AlgPtr A) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::algebra;
    F->alg_src = A;
    F->alg_tgt = A;
    F->order = A->order;
    const Algebra* ap = A.get();
    F->alg_taylor = [ap](KeySpan a, EvalCtx&) {
        if (a.size() != 1) return Element(ap->space.get(), ap->order);
        return Element::basis(ap->space.get(), a[0], ap->order);
    };
    return F;
}

MorPtr zero_morphism(BimodPtr src, BimodPtr tgt, int coh_shift) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->coh_shift = coh_shift;
    F->bim_src = std::move(src);
    F->bim_tgt = tgt;
    F->order = tgt->order;
    const Bimodule* tp = tgt.get();
    F->bim_taylor = [tp](KeySpan, BasisKey, KeySpan, EvalCtx&) {
        return Element(tp->space.get(), tp->order);
    };
    return F;
}

MorPtr zero_morphism(ModPtr src, ModPtr tgt, int coh_shift) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::module;
    F->coh_shift = coh_shift;
    F->mod_src = std::move(src);
    F->mod_tgt = tgt;
    F->order = tgt->order;
    const Module* tp = tgt.get();
    F->mod_taylor = [tp](KeySpan, BasisKey, EvalCtx&) {
        return Element(tp->space.get(), tp->order);
    };
    return F;
}

AlgPtr opposite_algebra(AlgPtr B) {
    if (B->has_curvature || B->max_arity > 2)
        throw structural_error("opposite_algebra: only flat associative algebras supported");
    auto out = std::make_shared<Algebra>(*B);
    AlgPtr base = B;
    out->taylor = [base](KeySpan a, EvalCtx& ctx) -> Element {
        if (a.size() != 2) return Element(base->space.get(), base->order);
        // d2_op(sa|sb) = (-1)^{|a|+|a||b|+|b|} d2(sb|sa)
        std::vector<BasisKey> sw{a[1], a[0]};
        Element v = base->d(sw, ctx);
        int pa = ((a[0].deg.coh % 2) + 2) % 2, pb = ((a[1].deg.coh % 2) + 2) % 2;
        if ((pa + pb + pa * pb) % 2) v.negate();
        return v;
    };
    return out;
}

ModPtr restrict_bimodule(BimodPtr M, Side side) {
    const Algebra& dropped = (side == Side::left) ? *M->right : *M->left;
    if (dropped.has_curvature)
        throw structural_error("restrict_bimodule: curvature on the discarded side");
    auto out = std::make_shared<Module>();
    out->side = side;
    out->alg = (side == Side::left) ? M->left : M->right;
    out->space = M->space;
    out->max_arity = (side == Side::left) ? M->max_k : M->max_l;
    out->order = M->order;
    out->slot_weight = M->slot_weight;
    BimodPtr base = M;
    if (side == Side::left) {
        out->taylor = [base](KeySpan a, BasisKey m, EvalCtx& ctx) { return base->d(a, m, {}, ctx); };
    } else {
        out->taylor = [base](KeySpan a, BasisKey m, EvalCtx& ctx) { return base->d({}, m, a, ctx); };
    }
    return out;
}

BimodPtr as_bimodule(AlgPtr A) {
    auto out = std::make_shared<Bimodule>();
    out->left = A;
    out->right = A;
    out->space = A->space;
    out->max_k = A->max_arity;
    out->max_l = A->max_arity;
    out->order = A->order;
    AlgPtr base = A;
    out->taylor = [base](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
        std::vector<BasisKey> buf;
        buf.reserve(a.size() + b.size() + 1);
        buf.insert(buf.end(), a.begin(), a.end());
        buf.push_back(m);
        buf.insert(buf.end(), b.begin(), b.end());
        return base->d(buf, ctx);
    };
    return out;
}

AlgPtr ground_algebra(int order) {
    auto sp = std::make_shared<BigradedSpace>();
    sp->add_basis({0, 0}, "1");
    auto A = std::make_shared<Algebra>();
    A->space = sp;
    A->unit = BasisKey{{0, 0}, 0};
    A->order = order;
    A->max_arity = 2;
    A->augmentation = [](BasisKey) { return Scalar::one(0); };
    const BigradedSpace* spp = sp.get();
    A->taylor = [spp, order](KeySpan a, EvalCtx&) -> Element {
        if (a.size() != 2) return Element(spp, order);
        return Element::basis(spp, a[0], order);  // d2(s1|s1) = s1
    };
    // fix augmentation order
    A->augmentation = [order](BasisKey) { return Scalar::one(order); };
    return A;
}

BimodPtr promote_module(ModPtr M) {
    auto ground = ground_algebra(M->order);
    auto out = std::make_shared<Bimodule>();
    out->space = M->space;
    out->order = M->order;
    out->slot_weight = M->slot_weight;
    ModPtr base = M;
    if (M->side == Side::right) {
        out->left = ground;
        out->right = M->alg;
        out->max_k = 1;
        out->max_l = M->max_arity;
        out->taylor = [base](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
            if (a.empty()) return base->d(b, m, ctx);
            if (a.size() == 1 && b.empty()) return Element::basis(base->space.get(), m, base->order);
            return Element(base->space.get(), base->order);
        };
    } else {
        out->left = M->alg;
        out->right = ground;
        out->max_k = M->max_arity;
        out->max_l = 1;
        out->taylor = [base](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
            if (b.empty()) return base->d(a, m, ctx);
            if (b.size() == 1 && a.empty()) {
                Element e = Element::basis(base->space.get(), m, base->order);
                if (m.deg.coh % 2 != 0) e.negate();  // d^{0,1}([m]|1) = (-1)^{|m|} m
                return e;
            }
            return Element(base->space.get(), base->order);
        };
    }
    return out;
}

ModPtr demote_bimodule(BimodPtr M, Side keep) {
    return restrict_bimodule(std::move(M), keep);
}

ModPtr shift_structure(ModPtr M, int n, int j) {
    if (n == 0 && j == 0) return M;
    // single cohomological shift step, applied |n| times; <j> twist is free
    auto step = [](ModPtr base, int dir) -> ModPtr {
        auto out = std::make_shared<Module>();
        out->side = base->side;
        out->alg = base->alg;
        out->space = shift_space(*base->space, dir, 0);
        out->max_arity = base->max_arity;
        out->order = base->order;
        if (base->slot_weight) {
            auto bw = base->slot_weight;
            out->slot_weight = [bw, dir](BasisKey k) {
                return bw(BasisKey{{k.deg.coh + dir, k.deg.intd}, k.idx});
            };
        }
        SpacePtr osp = out->space;
        Side side = base->side;
        out->taylor = [base, osp, dir, side](KeySpan a, BasisKey m, EvalCtx& ctx) {
            BasisKey inner{{m.deg.coh + dir, m.deg.intd}, m.idx};
            Element v = base->d(a, inner, ctx);
            Element outv(osp.get(), base->order);
            int par = 1;  // leading minus
            if (side == Side::left) par = (1 + susp_parity(a)) % 2;
            for (const auto& [k, c] : v.terms()) {
                BasisKey nk{{k.deg.coh - dir, k.deg.intd}, k.idx};
                if (par) outv.add_term(nk, -c, ctx);
                else outv.add_term(nk, c, ctx);
            }
            return outv;
        };
        return out;
    };
    ModPtr cur = std::move(M);
    int dir = n > 0 ? 1 : -1;
    for (int i = 0; i < std::abs(n); ++i) cur = step(cur, dir);
    if (j != 0) {
        auto out = std::make_shared<Module>(*cur);
        out->space = shift_space(*cur->space, 0, j);
        SpacePtr osp = out->space;
        ModPtr base = cur;
        out->taylor = [base, osp, j](KeySpan a, BasisKey m, EvalCtx& ctx) {
            BasisKey inner{{m.deg.coh, m.deg.intd + j}, m.idx};
            Element v = base->d(a, inner, ctx);
            Element outv(osp.get(), base->order);
            for (const auto& [k, c] : v.terms())
                outv.add_term({{k.deg.coh, k.deg.intd - j}, k.idx}, c, ctx);
            return outv;
        };
        cur = out;
    }
    return cur;
}

BimodPtr shift_structure(BimodPtr M, int n, int j) {
    if (n == 0 && j == 0) return M;
    auto step = [](BimodPtr base, int dir) -> BimodPtr {
        auto out = std::make_shared<Bimodule>(*base);
        out->space = shift_space(*base->space, dir, 0);
        SpacePtr osp = out->space;
        out->taylor = [base, osp, dir](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
            BasisKey inner{{m.deg.coh + dir, m.deg.intd}, m.idx};
            Element v = base->d(a, inner, b, ctx);
            Element outv(osp.get(), base->order);
            int par = (1 + susp_parity(a)) % 2;
            for (const auto& [k, c] : v.terms()) {
                BasisKey nk{{k.deg.coh - dir, k.deg.intd}, k.idx};
                if (par) outv.add_term(nk, -c, ctx);
                else outv.add_term(nk, c, ctx);
            }
            return outv;
        };
        return out;
    };
    BimodPtr cur = std::move(M);
    int dir = n > 0 ? 1 : -1;
    for (int i = 0; i < std::abs(n); ++i) cur = step(cur, dir);
    if (j != 0) {
        auto out = std::make_shared<Bimodule>(*cur);
        out->space = shift_space(*cur->space, 0, j);
        SpacePtr osp = out->space;
        BimodPtr base = cur;
        out->taylor = [base, osp, j](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
            BasisKey inner{{m.deg.coh, m.deg.intd + j}, m.idx};
            Element v = base->d(a, inner, b, ctx);
            Element outv(osp.get(), base->order);
            for (const auto& [k, c] : v.terms())
                outv.add_term({{k.deg.coh, k.deg.intd - j}, k.idx}, c, ctx);
            return outv;
        };
        cur = out;
    }
    return cur;
}

MorPtr compose_morphisms(MorPtr G, MorPtr F) {
    if (F->kind != G->kind) throw structural_error("compose_morphisms: kind mismatch");
    auto out = std::make_shared<AMorphism>();
    out->kind = F->kind;
    out->coh_shift = F->coh_shift + G->coh_shift;
    out->order = F->order;
    if (F->kind == MorKind::algebra) {
        out->alg_src = F->alg_src;
        out->alg_tgt = G->alg_tgt;
        MorPtr f = F, g = G;
        out->alg_taylor = [f, g](KeySpan a, EvalCtx& ctx) -> Element {
            const Algebra& tgt = *g->alg_tgt;
            Element acc(tgt.space.get(), tgt.order);
            size_t k = a.size();
            if (k == 0) return acc;
            std::vector<size_t> cuts;
            std::function<void(size_t)> split = [&](size_t from) {
                if (from == k) {
                    std::vector<Element> blocks;
                    size_t start = 0;
                    bool dead = false;
                    for (size_t cut : cuts) {
                        Element bl = f->t(a.subspan(start, cut - start), ctx);
                        if (bl.is_zero()) { dead = true; break; }
                        blocks.push_back(std::move(bl));
                        start = cut;
                    }
                    if (!dead) {
                        // expand g over the blocks
                        std::vector<BasisKey> keys;
                        std::function<void(size_t, Scalar)> expand = [&](size_t i, Scalar coef) {
                            if (i == blocks.size()) {
                                Element v = g->t(keys, ctx);
                                acc.add_scaled(v, coef, ctx);
                                return;
                            }
                            for (const auto& [key, c] : blocks[i].terms()) {
                                keys.push_back(key);
                                expand(i + 1, coef * c);
                                keys.pop_back();
                            }
                        };
                        expand(0, Scalar::one(f->order));
                    }
                    return;
                }
                for (size_t next = from + 1; next <= k; ++next) {
                    cuts.push_back(next);
                    split(next);
                    cuts.pop_back();
                }
            };
            split(0);
            return acc;
        };
    } else if (F->kind == MorKind::module) {
        out->mod_src = F->mod_src;
        out->mod_tgt = G->mod_tgt;
        MorPtr f = F, g = G;
        Side side = F->mod_src->side;
        out->mod_taylor = [f, g, side](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
            const Module& tgt = *g->mod_tgt;
            Element acc(tgt.space.get(), tgt.order);
            size_t k = a.size();
            for (size_t s = 0; s <= k; ++s) {
                KeySpan block = (side == Side::left) ? a.last(s) : a.first(s);
                KeySpan rest = (side == Side::left) ? a.first(k - s) : a.last(k - s);
                Element inner = f->t(block, m, ctx);
                if (inner.is_zero()) continue;
                int par = 0;
                if (f->coh_shift % 2 != 0 && side == Side::left) par = susp_parity(rest);
                for (const auto& [mk, c] : inner.terms()) {
                    Element v = g->t(rest, mk, ctx);
                    add_term_signed(acc, v, c, par, ctx);
                }
            }
            return acc;
        };
    } else {
        out->bim_src = F->bim_src;
        out->bim_tgt = G->bim_tgt;
        MorPtr f = F, g = G;
        out->bim_taylor = [f, g](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
            const Bimodule& tgt = *g->bim_tgt;
            Element acc(tgt.space.get(), tgt.order);
            size_t k = a.size(), l = b.size();
            for (size_t s3 = 0; s3 <= k; ++s3) {
                for (size_t s4 = 0; s4 <= l; ++s4) {
                    Element inner = f->t(a.last(s3), m, b.first(s4), ctx);
                    if (inner.is_zero()) continue;
                    int par = (f->coh_shift % 2 != 0) ? susp_parity(a.first(k - s3)) : 0;
                    for (const auto& [mk, c] : inner.terms()) {
                        Element v = g->t(a.first(k - s3), mk, b.last(l - s4), ctx);
                        add_term_signed(acc, v, c, par, ctx);
                    }
                }
            }
            return acc;
        };
    }
    return out;
}

MorPtr add_morphisms(MorPtr F, MorPtr G, int sign) {
    if (F->kind != G->kind || F->coh_shift != G->coh_shift)
        throw structural_error("add_morphisms: shape mismatch");
    auto out = std::make_shared<AMorphism>(*F);
    MorPtr f = F, g = G;
    if (F->kind == MorKind::algebra) {
        out->alg_taylor = [f, g, sign](KeySpan a, EvalCtx& ctx) {
            Element r = f->t(a, ctx);
            Element s = g->t(a, ctx);
            if (sign < 0) s.negate();
            r.add(s, ctx);
            return r;
        };
    } else if (F->kind == MorKind::module) {
        out->mod_taylor = [f, g, sign](KeySpan a, BasisKey m, EvalCtx& ctx) {
            Element r = f->t(a, m, ctx);
            Element s = g->t(a, m, ctx);
            if (sign < 0) s.negate();
            r.add(s, ctx);
            return r;
        };
        out->max_k = std::max(F->max_k, G->max_k);
    } else {
        out->bim_taylor = [f, g, sign](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
            Element r = f->t(a, m, b, ctx);
            Element s = g->t(a, m, b, ctx);
            if (sign < 0) s.negate();
            r.add(s, ctx);
            return r;
        };
        out->max_k = std::max(F->max_k, G->max_k);
        out->max_l = std::max(F->max_l, G->max_l);
    }
    return out;
}

DirectSum direct_sum(ModPtr M, ModPtr Msecond, MorPtr h) {
    if (M->side != Msecond->side) throw structural_error("direct_sum: side mismatch");
    if (h && (h->kind != MorKind::module || h->coh_shift != 0))
        throw structural_error("direct_sum: h must be a module morphism into M[1]");
    auto sp = std::make_shared<BigradedSpace>();
    sp->truncated_beyond = M->space->truncated_beyond || Msecond->space->truncated_beyond;
    // part 0 = M, part 1 = M''; indices: M block first
    for (const auto& [d, labels] : M->space->basis())
        for (const auto& l : labels) sp->add_basis(d, "0:" + l);
    for (const auto& [d, labels] : Msecond->space->basis())
        for (const auto& l : labels) sp->add_basis(d, "1:" + l);

    auto embed = [spM = M->space, sp](int part, BasisKey k) -> BasisKey {
        if (part == 0) return k;  // M block occupies the first indices
        int off = spM->dim(k.deg);
        return {k.deg, k.idx + off};
    };
    auto split = [spM = M->space](BasisKey k) -> std::pair<int, BasisKey> {
        int off = spM->dim(k.deg);
        if (k.idx < off) return {0, k};
        return {1, {k.deg, k.idx - off}};
    };

    auto out = std::make_shared<Module>();
    out->side = M->side;
    out->alg = M->alg;
    out->space = sp;
    out->max_arity = std::max(M->max_arity, Msecond->max_arity);
    if (h) out->max_arity = std::max(out->max_arity, h->max_k);
    out->order = M->order;
    ModPtr m0 = M, m1 = Msecond;
    MorPtr hh = h;
    SpacePtr osp = sp;
    out->taylor = [m0, m1, hh, osp, embed, split](KeySpan a, BasisKey m, EvalCtx& ctx) {
        Element acc(osp.get(), m0->order);
        auto [part, inner] = split(m);
        if (part == 0) {
            Element v = m0->d(a, inner, ctx);
            for (const auto& [k, c] : v.terms()) acc.add_term(embed(0, k), c, ctx);
        } else {
            Element v = m1->d(a, inner, ctx);
            for (const auto& [k, c] : v.terms()) acc.add_term(embed(1, k), c, ctx);
            if (hh) {
                // cross term -h : M'' -> M[1], relabelled into the M block
                Element w = hh->t(a, inner, ctx);
                for (const auto& [k, c] : w.terms())
                    acc.add_term(embed(0, {{k.deg.coh + 1, k.deg.intd}, k.idx}), -c, ctx);
            }
        }
        return acc;
    };
    DirectSum ds;
    ds.total = out;
    ds.space = sp;
    ds.embed = embed;
    ds.split = split;
    return ds;
}

}  // namespace akb
