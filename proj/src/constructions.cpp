#include "akb/constructions.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <sstream>

namespace akb {
namespace {

int parity_of(int x) { return ((x % 2) + 2) % 2; }

int susp_parity(KeySpan keys) {
    int s = 0;
    for (const auto& k : keys) s += k.deg.coh - 1;
    return parity_of(s);
}

int word_susp_parity(const std::vector<BasisKey>& w) {
    int s = 0;
    for (const auto& k : w) s += k.deg.coh - 1;
    return parity_of(s);
}

std::vector<BasisKey> head(const std::vector<BasisKey>& w, size_t n) {
    return {w.begin(), w.begin() + static_cast<long>(n)};
}
std::vector<BasisKey> tail(const std::vector<BasisKey>& w, size_t n) {
    return {w.begin() + static_cast<long>(n), w.end()};
}
KeySpan span_of(const std::vector<BasisKey>& w) { return {w.data(), w.size()}; }

// desuspended product m2(x,y): m2 = (-1)^{|x|} d2(sx|sy)
Element label_product(const Algebra& B, BasisKey x, BasisKey y, EvalCtx& ctx) {
    std::vector<BasisKey> t{x, y};
    Element v = B.d(t, ctx);
    if (parity_of(x.deg.coh)) v.negate();
    return v;
}

std::string word_str(const BigradedSpace& sp, const std::vector<BasisKey>& w) {
    std::string out;
    for (size_t i = 0; i < w.size(); ++i) {
        if (i) out += "|";
        out += sp.label(w[i].deg, w[i].idx);
    }
    return out;
}

// enumerate words over `pool` whose suspended bidegree sum plus `base` lies
// in `box`
void enumerate_words(const std::vector<BasisKey>& pool, Bidegree base, const Window& box,
                     const std::function<void(const std::vector<BasisKey>&, Bidegree)>& f) {
    bool coh_dec = true, ci_dec = true;
    for (const auto& k : pool) {
        if (k.deg.coh - 1 > -1) coh_dec = false;
        if (k.deg.coh - 1 + k.deg.intd > -1) ci_dec = false;
    }
    if (!pool.empty() && !coh_dec && !ci_dec)
        throw structural_error("enumerate_words: no decreasing functional for this algebra");
    int cmin = 0, cmax = 0, imin = 0, imax = 0;
    bool first = true;
    for (const auto& k : pool) {
        int c = k.deg.coh - 1, i = k.deg.intd;
        if (first) { cmin = cmax = c; imin = imax = i; first = false; }
        cmin = std::min(cmin, c); cmax = std::max(cmax, c);
        imin = std::min(imin, i); imax = std::max(imax, i);
    }
    auto budget = [&](Bidegree t) {
        if (coh_dec) return t.coh - box.coh_min;
        return (t.coh + t.intd) - (box.coh_min + box.intd_min);
    };
    auto feasible = [&](Bidegree t, int rmax) {
        for (int r = 1; r <= rmax; ++r) {
            if (t.coh + r * cmax >= box.coh_min && t.coh + r * cmin <= box.coh_max &&
                t.intd + r * imax >= box.intd_min && t.intd + r * imin <= box.intd_max)
                return true;
        }
        return false;
    };
    std::vector<BasisKey> w;
    std::function<void(Bidegree)> rec = [&](Bidegree t) {
        if (box.contains(t)) f(w, t);
        if (pool.empty()) return;
        int rb = budget(t);
        if (rb <= 0) return;
        if (!feasible(t, rb)) return;
        for (const auto& k : pool) {
            w.push_back(k);
            rec({t.coh + k.deg.coh - 1, t.intd + k.deg.intd});
            w.pop_back();
        }
    };
    rec(base);
}

std::vector<BasisKey> full_pool(const BigradedSpace& sp) {
    std::vector<BasisKey> keys;
    for (const auto& [d, labels] : sp.basis())
        for (int i = 0; i < static_cast<int>(labels.size()); ++i) keys.push_back({d, i});
    return keys;
}

// augmented pool with per-entry "weight" (internal degree for A, coh for B)
std::vector<std::pair<BasisKey, int>> plus_pool(const BigradedSpace& sp, bool internal) {
    std::vector<std::pair<BasisKey, int>> keys;
    for (const auto& [d, labels] : sp.basis()) {
        int wgt = internal ? d.intd : d.coh;
        if (wgt < 1) continue;
        for (int i = 0; i < static_cast<int>(labels.size()); ++i) keys.push_back({{d, i}, wgt});
    }
    return keys;
}

// enumerate words of exact length len with exact weight total from the pool
void fixed_weight_words(const std::vector<std::pair<BasisKey, int>>& pool, int len, int total,
                        std::vector<BasisKey>& buf,
                        const std::function<void(const std::vector<BasisKey>&)>& f) {
    if (len == 0) {
        if (total == 0) f(buf);
        return;
    }
    if (total < len) return;  // every entry weighs at least 1
    for (const auto& [k, wgt] : pool) {
        if (wgt > total - (len - 1)) continue;
        buf.push_back(k);
        fixed_weight_words(pool, len - 1, total - wgt, buf, f);
        buf.pop_back();
    }
}

}  // namespace

Element TensorCarrier::embed(const TensorWord& w, const Scalar& c, int order, EvalCtx& ctx) const {
    Element e(space.get(), order);
    if (c.is_zero()) return e;
    auto it = key_of.find(w);
    if (it == key_of.end()) {
        ctx.truncated = true;
        return e;
    }
    e.add_term(it->second, c, ctx);
    return e;
}

TensorBimodule tensor_bimodules(BimodPtr K1, BimodPtr K2, const Window& win) {
    if (K1->right.get() != K2->left.get())
        throw structural_error("tensor_bimodules: middle algebra mismatch");
    int order = K1->order;

    auto carrier = std::make_shared<TensorCarrier>();
    auto sp = std::make_shared<BigradedSpace>();
    sp->truncated_beyond = true;
    std::vector<BasisKey> bpool = full_pool(*K1->right->space);
    std::vector<std::tuple<Bidegree, std::string, TensorWord>> items;
    for (const auto& [d1, l1] : K1->space->basis()) {
        for (int i1 = 0; i1 < static_cast<int>(l1.size()); ++i1) {
            for (const auto& [d2, l2] : K2->space->basis()) {
                for (int i2 = 0; i2 < static_cast<int>(l2.size()); ++i2) {
                    BasisKey k1{d1, i1}, k2{d2, i2};
                    enumerate_words(bpool, d1 + d2, win,
                                    [&](const std::vector<BasisKey>& w, Bidegree t) {
                                        TensorWord tw{k1, w, k2};
                                        std::string lbl = "(" + l1[static_cast<size_t>(i1)] + ";" +
                                                          word_str(*K1->right->space, w) + ";" +
                                                          l2[static_cast<size_t>(i2)] + ")";
                                        items.emplace_back(t, lbl, tw);
                                    });
                }
            }
        }
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
        const auto& wa = std::get<2>(a);
        const auto& wb = std::get<2>(b);
        if (wa.word.size() != wb.word.size()) return wa.word.size() < wb.word.size();
        return wa < wb;
    });
    for (auto& [deg, lbl, tw] : items) {
        int idx = sp->add_basis(deg, lbl);
        carrier->word_of.emplace(BasisKey{deg, idx}, tw);
        carrier->key_of.emplace(tw, BasisKey{deg, idx});
    }
    carrier->space = sp;

    auto bim = std::make_shared<Bimodule>();
    bim->left = K1->left;
    bim->right = K2->right;
    bim->space = sp;
    bim->max_k = K1->max_k;
    bim->max_l = K2->max_l;
    bim->order = order;
    bim->supports = [](int k, int l) { return k == 0 || l == 0; };
    CarrierPtr car = carrier;
    BimodPtr k1b = K1, k2b = K2;
    AlgPtr bm_hold = K1->right;
    bim->slot_weight = [car](BasisKey m) {
        return static_cast<int>(car->word_of.at(m).word.size());
    };
    bim->taylor = [car, k1b, k2b, bm_hold, order](KeySpan a, BasisKey m, KeySpan c,
                                                  EvalCtx& ctx) -> Element {
        const TensorWord& w = car->word_of.at(m);
        const auto& word = w.word;
        size_t q = word.size();
        Element out(car->space.get(), order);
        const Algebra& B = *bm_hold;
        if (!a.empty() && !c.empty()) return out;
        if (!a.empty()) {
            for (size_t l = 0; l <= q; ++l) {
                Element inner = k1b->d(a, w.k1, KeySpan(word.data(), l), ctx);
                if (inner.is_zero()) continue;
                for (const auto& [kk, cc] : inner.terms())
                    out.add(car->embed({kk, tail(word, l), w.k2}, cc, order, ctx), ctx);
            }
            return out;
        }
        if (!c.empty()) {
            int par = parity_of(w.k1.deg.coh) ^ word_susp_parity(word);
            for (size_t l = 0; l <= q; ++l) {
                Element inner = k2b->d(KeySpan(word.data() + l, q - l), w.k2, c, ctx);
                if (inner.is_zero()) continue;
                for (const auto& [kk, cc] : inner.terms()) {
                    Scalar v = cc;
                    if (par) v = -v;
                    out.add(car->embed({w.k1, head(word, l), kk}, v, order, ctx), ctx);
                }
            }
            return out;
        }
        // (0,0): right action on K1, middle insertions, left action on K2
        for (size_t l = 0; l <= q; ++l) {
            Element inner = k1b->d({}, w.k1, KeySpan(word.data(), l), ctx);
            if (inner.is_zero()) continue;
            for (const auto& [kk, cc] : inner.terms())
                out.add(car->embed({kk, tail(word, l), w.k2}, cc, order, ctx), ctx);
        }
        for (size_t p = 0; p <= q; ++p) {
            if (static_cast<int>(p) > B.max_arity) break;
            if (p == 0 && !B.has_curvature) continue;
            for (size_t l = 0; l + p <= q; ++l) {
                Element inner = B.d(KeySpan(word.data() + l, p), ctx);
                if (inner.is_zero()) continue;
                int par = parity_of(w.k1.deg.coh - 1);
                for (size_t i = 0; i < l; ++i) par ^= parity_of(word[i].deg.coh - 1);
                for (const auto& [kk, cc] : inner.terms()) {
                    std::vector<BasisKey> nw = head(word, l);
                    nw.push_back(kk);
                    nw.insert(nw.end(), word.begin() + static_cast<long>(l + p), word.end());
                    Scalar v = cc;
                    if (par) v = -v;
                    out.add(car->embed({w.k1, nw, w.k2}, v, order, ctx), ctx);
                }
            }
        }
        {
            int par = parity_of(w.k1.deg.coh) ^ word_susp_parity(word);
            for (size_t l = 0; l <= q; ++l) {
                Element inner = k2b->d(KeySpan(word.data() + l, q - l), w.k2, {}, ctx);
                if (inner.is_zero()) continue;
                for (const auto& [kk, cc] : inner.terms()) {
                    Scalar v = cc;
                    if (par) v = -v;
                    out.add(car->embed({w.k1, head(word, l), kk}, v, order, ctx), ctx);
                }
            }
        }
        return out;
    };

    TensorBimodule out;
    out.bim = bim;
    out.carrier = carrier;
    out.K1 = K1;
    out.K2 = K2;
    return out;
}

TensorModule tensor_module_bimodule(ModPtr M, BimodPtr K, const Window& win) {
    if (M->side != Side::right)
        throw structural_error("tensor_module_bimodule: right modules only");
    auto P = promote_module(M);
    auto T = tensor_bimodules(P, K, win);
    TensorModule out;
    auto mod = std::make_shared<Module>(*restrict_bimodule(T.bim, Side::right));
    mod->slot_weight = T.bim->slot_weight;
    out.mod = mod;
    out.carrier = T.carrier;
    return out;
}

TensorBimodule bar_left(BimodPtr M, const Window& win) {
    return tensor_bimodules(as_bimodule(M->left), M, win);
}

TensorBimodule bar_right(BimodPtr M, const Window& win) {
    return tensor_bimodules(M, as_bimodule(M->right), win);
}

MorPtr mu_left(const TensorBimodule& bar) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = bar.bim;
    F->bim_tgt = bar.K2;
    F->order = bar.bim->order;
    CarrierPtr car = bar.carrier;
    BimodPtr M = bar.K2;
    F->bim_taylor = [car, M](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
        const TensorWord& w = car->word_of.at(m);
        std::vector<BasisKey> aa(a.begin(), a.end());
        aa.push_back(w.k1);
        aa.insert(aa.end(), w.word.begin(), w.word.end());
        return M->d(aa, w.k2, b, ctx);
    };
    return F;
}

MorPtr mu_right(const TensorBimodule& bar) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = bar.bim;
    F->bim_tgt = bar.K1;
    F->order = bar.bim->order;
    CarrierPtr car = bar.carrier;
    BimodPtr M = bar.K1;
    F->bim_taylor = [car, M](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
        const TensorWord& w = car->word_of.at(m);
        std::vector<BasisKey> bb(w.word.begin(), w.word.end());
        bb.push_back(w.k2);
        bb.insert(bb.end(), b.begin(), b.end());
        Element v = M->d(a, w.k1, bb, ctx);
        // collapse sign for the right bar, pinned by check_morphism
        if (parity_of(word_susp_parity(w.word) + w.k2.deg.coh)) v.negate();
        return v;
    };
    return F;
}

MorPtr phi_left(const TensorBimodule& bar) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = bar.K2;
    F->bim_tgt = bar.bim;
    F->order = bar.bim->order;
    CarrierPtr car = bar.carrier;
    AlgPtr A = bar.bim->left;
    int order = bar.bim->order;
    F->bim_taylor = [car, A, order](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
        Element out(car->space.get(), order);
        if (!b.empty()) return out;
        for (const auto& x : a)
            if (!A->augmentation(x).is_zero()) return out;  // supported on A+
        Scalar c = Scalar::one(order);
        if (susp_parity(a)) c = -c;
        return car->embed({*A->unit, {a.begin(), a.end()}, m}, c, order, ctx);
    };
    return F;
}

MorPtr phi_right(const TensorBimodule& bar) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = bar.K1;
    F->bim_tgt = bar.bim;
    F->order = bar.bim->order;
    CarrierPtr car = bar.carrier;
    AlgPtr B = bar.bim->right;
    int order = bar.bim->order;
    F->bim_taylor = [car, B, order](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
        Element out(car->space.get(), order);
        if (!a.empty()) return out;
        for (const auto& x : b)
            if (!B->augmentation(x).is_zero()) return out;  // supported on B+
        Scalar c = Scalar::one(order);
        if (susp_parity(b)) c = -c;
        return car->embed({m, {b.begin(), b.end()}, *B->unit}, c, order, ctx);
    };
    return F;
}

MorPtr bar_homotopy_left(const TensorBimodule& bar) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->coh_shift = -1;
    F->bim_src = bar.bim;
    F->bim_tgt = bar.bim;
    F->order = bar.bim->order;
    CarrierPtr car = bar.carrier;
    AlgPtr A = bar.bim->left;
    int order = bar.bim->order;
    F->bim_taylor = [car, A, order](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
        Element out(car->space.get(), order);
        if (!b.empty()) return out;
        for (const auto& x : a)
            if (!A->augmentation(x).is_zero()) return out;
        const TensorWord& w = car->word_of.at(m);
        std::vector<BasisKey> nw(a.begin(), a.end());
        nw.push_back(w.k1);
        nw.insert(nw.end(), w.word.begin(), w.word.end());
        // global sign fixed by the homotopy identity in our d-convention
        return car->embed({*A->unit, nw, w.k2}, -Scalar::one(order), order, ctx);
    };
    return F;
}

MorPtr bar_homotopy_right(const TensorBimodule& bar) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->coh_shift = -1;
    F->bim_src = bar.bim;
    F->bim_tgt = bar.bim;
    F->order = bar.bim->order;
    CarrierPtr car = bar.carrier;
    AlgPtr B = bar.bim->right;
    int order = bar.bim->order;
    F->bim_taylor = [car, B, order](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
        Element out(car->space.get(), order);
        if (!a.empty()) return out;
        for (const auto& x : b)
            if (!B->augmentation(x).is_zero()) return out;
        const TensorWord& w = car->word_of.at(m);
        std::vector<BasisKey> nw(w.word.begin(), w.word.end());
        nw.push_back(w.k2);
        nw.insert(nw.end(), b.begin(), b.end());
        // sign pinned by the homotopy identity, as for mu_right
        Scalar c = Scalar::one(order);
        if (word_susp_parity(w.word)) c = -c;
        return car->embed({w.k1, nw, *B->unit}, c, order, ctx);
    };
    return F;
}

MorPtr assoc_iso(const TensorBimodule& T12, const TensorBimodule& T1,
                 const TensorBimodule& T23, const TensorBimodule& T2) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = T1.bim;
    F->bim_tgt = T2.bim;
    F->order = T1.bim->order;
    F->max_k = 0;
    F->max_l = 0;
    CarrierPtr c12 = T12.carrier, c1 = T1.carrier, c23 = T23.carrier, c2 = T2.carrier;
    int order = T1.bim->order;
    F->bim_taylor = [c12, c1, c23, c2, order](KeySpan a, BasisKey m, KeySpan b,
                                              EvalCtx& ctx) -> Element {
        Element out(c2->space.get(), order);
        if (!a.empty() || !b.empty()) return out;
        const TensorWord& outer = c1->word_of.at(m);
        const TensorWord& innerw = c12->word_of.at(outer.k1);
        TensorWord right_inner{innerw.k2, outer.word, outer.k2};
        auto it = c23->key_of.find(right_inner);
        if (it == c23->key_of.end()) {
            ctx.truncated = true;
            return out;
        }
        return c2->embed({innerw.k1, innerw.word, it->second}, Scalar::one(order), order, ctx);
    };
    return F;
}

MorPtr tensor_morphism_right(MorPtr f, const TensorModule& srcT, const TensorModule& tgtT) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::module;
    F->mod_src = srcT.mod;
    F->mod_tgt = tgtT.mod;
    F->order = srcT.mod->order;
    F->max_k = 0;
    CarrierPtr cs = srcT.carrier, ct = tgtT.carrier;
    MorPtr ff = f;
    int order = srcT.mod->order;
    F->mod_taylor = [cs, ct, ff, order](KeySpan b, BasisKey m, EvalCtx& ctx) -> Element {
        Element out(ct->space.get(), order);
        if (!b.empty()) return out;
        const TensorWord& w = cs->word_of.at(m);
        const auto& word = w.word;
        for (size_t l = 0; l <= word.size(); ++l) {
            Element inner = ff->t(KeySpan(word.data(), l), w.k1, ctx);
            if (inner.is_zero()) continue;
            for (const auto& [kk, cc] : inner.terms())
                out.add(ct->embed({kk, tail(word, l), w.k2}, cc, order, ctx), ctx);
        }
        return out;
    };
    return F;
}

MorPtr tensor_morphism_left(MorPtr g, const TensorBimodule& srcT, const TensorBimodule& tgtT) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = srcT.bim;
    F->bim_tgt = tgtT.bim;
    F->order = srcT.bim->order;
    F->max_l = 0;
    CarrierPtr cs = srcT.carrier, ct = tgtT.carrier;
    MorPtr gg = g;
    int order = srcT.bim->order;
    F->bim_taylor = [cs, ct, gg, order](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
        Element out(ct->space.get(), order);
        if (!b.empty()) return out;
        const TensorWord& w = cs->word_of.at(m);
        const auto& word = w.word;
        for (size_t l = 0; l <= word.size(); ++l) {
            Element inner = gg->t(a, w.k1, KeySpan(word.data(), l), ctx);
            if (inner.is_zero()) continue;
            for (const auto& [kk, cc] : inner.terms())
                out.add(ct->embed({kk, tail(word, l), w.k2}, cc, order, ctx), ctx);
        }
        return out;
    };
    return F;
}

// ---- End objects -----------------------------------------------------------

namespace {

Scalar dK_one_sided(const Bimodule& K, Side side, KeySpan word, BasisKey kgen, EvalCtx& ctx) {
    Element v = (side == Side::right) ? K.d({}, kgen, word, ctx) : K.d(word, kgen, {}, ctx);
    return v.coeff(kgen);
}

}  // namespace

EndPtr end_algebra(BimodPtr K, Side side, const Window& win) {
    auto obj = std::make_shared<EndObject>();
    obj->side = side;
    obj->K = K;
    obj->inner = (side == Side::right) ? K->right : K->left;
    obj->order = K->order;
    const Algebra& B = *obj->inner;
    int order = K->order;
    if (K->space->total_dim() != 1) throw structural_error("end_algebra: K must be one-dimensional");
    BasisKey kgen{{0, 0}, 0};

    auto sp = std::make_shared<BigradedSpace>();
    sp->truncated_beyond = true;
    std::vector<BasisKey> pool = full_pool(*B.space);
    std::vector<std::pair<Bidegree, std::vector<BasisKey>>> words;
    {
        Window negwin{-win.coh_max, -win.coh_min, -win.intd_max, -win.intd_min};
        enumerate_words(pool, {0, 0}, negwin, [&](const std::vector<BasisKey>& w, Bidegree t) {
            words.emplace_back(Bidegree{-t.coh, -t.intd}, w);
        });
    }
    std::sort(words.begin(), words.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        if (a.second.size() != b.second.size()) return a.second.size() < b.second.size();
        return a.second < b.second;
    });
    for (auto& [deg, w] : words) {
        int idx = sp->add_basis(deg, "phi(" + word_str(*B.space, w) + ")");
        obj->word_of.emplace(BasisKey{deg, idx}, w);
        obj->key_of.emplace(w, BasisKey{deg, idx});
    }
    obj->space = sp;

    // del(phi) = (-1)^{|phi|+1} phi o d_K + d_K o phi, by backward
    // evaluation on the candidate target words
    auto del = std::make_shared<std::map<BasisKey, Element>>();
    BimodPtr Kc = K;
    AlgPtr Bc = obj->inner;
    Side sd = side;
    SpacePtr spc = sp;
    auto eval_del_coeff = [Kc, Bc, sd, kgen, order](const std::vector<BasisKey>& w, int phi_coh,
                                                    const std::vector<BasisKey>& wp,
                                                    EvalCtx& ctx) -> Scalar {
        const Algebra& B = *Bc;
        Scalar acc = Scalar::zero(order);
        size_t q = wp.size();
        int sphi = parity_of(phi_coh + 1);
        // phi o d_K: K-collapses adjacent to the module slot
        for (size_t s = 0; s <= q; ++s) {
            KeySpan block = (sd == Side::right) ? KeySpan(wp.data(), s)
                                                : KeySpan(wp.data() + (q - s), s);
            Scalar inner = dK_one_sided(*Kc, sd, block, kgen, ctx);
            if (inner.is_zero()) continue;
            std::vector<BasisKey> rest = (sd == Side::right) ? tail(wp, s) : head(wp, q - s);
            if (rest != w) continue;
            int par = (sd == Side::right) ? 0 : susp_parity(KeySpan(wp.data(), q - s));
            Scalar v = inner;
            if ((par + sphi) % 2) v = -v;
            acc += v;
        }
        // phi o d_K: algebra insertions inside the word
        for (size_t p = 0; p <= q; ++p) {
            if (static_cast<int>(p) > B.max_arity) break;
            if (p == 0 && !B.has_curvature) continue;
            for (size_t l = 0; l + p <= q; ++l) {
                Element inner = B.d(KeySpan(wp.data() + l, p), ctx);
                if (inner.is_zero()) continue;
                int par = (sd == Side::right) ? 1 : 0;  // module slot sits left on side=right
                for (size_t i = 0; i < l; ++i) par ^= parity_of(wp[i].deg.coh - 1);
                for (const auto& [kk, cc] : inner.terms()) {
                    std::vector<BasisKey> nw = head(wp, l);
                    nw.push_back(kk);
                    nw.insert(nw.end(), wp.begin() + static_cast<long>(l + p), wp.end());
                    if (nw != w) continue;
                    Scalar v = cc;
                    if ((par + sphi) % 2) v = -v;
                    acc += v;
                }
            }
        }
        // d_K o phi: phi-lift then the one-sided action
        for (size_t s = 0; s <= q; ++s) {
            std::vector<BasisKey> part, rest;
            int liftpar = 0;
            if (sd == Side::right) {
                part = head(wp, s);        // phi eats (k|head)
                rest = tail(wp, s);        // action on (phi-val|tail)
            } else {
                rest = head(wp, s);        // action block (head|phi-val)
                part = tail(wp, s);        // phi eats (tail|k)
                liftpar = parity_of(phi_coh) & susp_parity(span_of(rest));
            }
            if (part != w) continue;
            Scalar act = dK_one_sided(*Kc, sd, span_of(rest), kgen, ctx);
            if (act.is_zero()) continue;
            Scalar v = act;
            if (liftpar) v = -v;
            acc += v;
        }
        return acc;
    };

    auto del_trunc = std::make_shared<std::set<BasisKey>>();
    for (auto& [key, w] : obj->word_of) {
        Bidegree td{key.deg.coh + 1, key.deg.intd};
        Element e(sp.get(), order);
        EvalCtx ctx;
        if (!win.contains(td)) del_trunc->insert(key);
        for (int i = 0; i < sp->dim(td); ++i) {
            const auto& wp = obj->word_of.at({td, i});
            Scalar c = eval_del_coeff(w, key.deg.coh, wp, ctx);
            if (!c.is_zero()) e.add_term({td, i}, c, ctx);
        }
        (*del)[key] = std::move(e);
    }

    auto alg = std::make_shared<Algebra>();
    alg->space = sp;
    alg->order = order;
    alg->max_arity = 2;
    auto unit_it = obj->key_of.find({});
    if (unit_it != obj->key_of.end()) alg->unit = unit_it->second;
    alg->augmentation = [order](BasisKey k) {
        return (k.deg == Bidegree{0, 0}) ? Scalar::one(order) : Scalar::zero(order);
    };
    auto objc = obj;
    alg->taylor = [objc, del, del_trunc, spc, order, sd](KeySpan a, EvalCtx& ctx) -> Element {
        Element out(spc.get(), order);
        if (a.size() == 1) {
            if (del_trunc->count(a[0])) ctx.truncated = true;
            auto it = del->find(a[0]);
            if (it == del->end()) return out;
            Element v = it->second;
            v.negate();  // d1 = -s del s^{-1}
            return v;
        }
        if (a.size() == 2) {
            const auto& wphi = objc->word_of.at(a[0]);
            const auto& wpsi = objc->word_of.at(a[1]);
            std::vector<BasisKey> cat;
            int par = parity_of(a[0].deg.coh);  // (-1)^{|phi|}
            if (sd == Side::right) {
                cat = wpsi;
                cat.insert(cat.end(), wphi.begin(), wphi.end());
            } else {
                cat = wphi;
                cat.insert(cat.end(), wpsi.begin(), wpsi.end());
                par ^= (parity_of(a[1].deg.coh) & word_susp_parity(wphi));
            }
            auto it = objc->key_of.find(cat);
            if (it == objc->key_of.end()) {
                ctx.truncated = true;
                return out;
            }
            Scalar c = Scalar::one(order);
            if (par) c = -c;
            out.add_term(it->second, c, ctx);
            return out;
        }
        return out;
    };
    obj->alg = alg;
    return obj;
}

MorPtr derived_action_left(AlgPtr A, BimodPtr K, EndPtr endB) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::algebra;
    F->alg_src = A;
    F->alg_tgt = endB->alg;
    F->order = K->order;
    BimodPtr Kc = K;
    EndPtr e = endB;
    int order = K->order;
    BasisKey kgen{{0, 0}, 0};
    F->alg_taylor = [Kc, e, order, kgen](KeySpan a, EvalCtx& ctx) -> Element {
        Element out(e->space.get(), order);
        if (a.empty()) return out;
        int n = 1, m = 0;
        for (const auto& x : a) {
            n += x.deg.coh - 1;
            m += x.deg.intd;
        }
        Bidegree vd{n, m};
        for (int i = 0; i < e->space->dim(vd); ++i) {
            const auto& w = e->word_of.at({vd, i});
            Element v = Kc->d(a, kgen, w, ctx);
            Scalar c = v.coeff(kgen);
            if (!c.is_zero()) out.add_term({vd, i}, c, ctx);
        }
        return out;
    };
    return F;
}

MorPtr derived_action_right(AlgPtr Bop, BimodPtr K, EndPtr endA) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::algebra;
    F->alg_src = Bop;
    F->alg_tgt = endA->alg;
    F->order = K->order;
    BimodPtr Kc = K;
    EndPtr e = endA;
    int order = K->order;
    BasisKey kgen{{0, 0}, 0};
    F->alg_taylor = [Kc, e, order, kgen](KeySpan b, EvalCtx& ctx) -> Element {
        Element out(e->space.get(), order);
        if (b.empty()) return out;
        int n = 1, m = 0;
        for (const auto& x : b) {
            n += x.deg.coh - 1;
            m += x.deg.intd;
        }
        Bidegree vd{n, m};
        // the op-action feeds the block reversed, with the graded
        // reversal sign on suspended degrees
        std::vector<BasisKey> bb(b.begin(), b.end());
        std::reverse(bb.begin(), bb.end());
        int revpar = 0;
        for (size_t i = 0; i < b.size(); ++i)
            for (size_t j = i + 1; j < b.size(); ++j)
                revpar ^= (parity_of(b[i].deg.coh - 1) & parity_of(b[j].deg.coh - 1));
        for (int i = 0; i < e->space->dim(vd); ++i) {
            const auto& w = e->word_of.at({vd, i});
            Element v = Kc->d(span_of(w), kgen, bb, ctx);
            Scalar c = v.coeff(kgen);
            if (c.is_zero()) continue;
            if (revpar) c = -c;
            out.add_term({vd, i}, c, ctx);
        }
        return out;
    };
    return F;
}

EndBimodule end_bimodule(EndPtr end, const Window& win) {
    (void)win;
    if (end->side != Side::right)
        throw structural_error("end_bimodule: only the End_B(K) side is a bimodule here");
    BimodPtr K = end->K;
    AlgPtr outer = K->left;
    auto bim = std::make_shared<Bimodule>();
    bim->left = outer;
    bim->right = outer;
    bim->space = end->space;
    bim->max_k = 1 << 20;
    bim->max_l = 1 << 20;
    bim->order = end->order;
    bim->supports = [](int k, int l) { return k == 0 || l == 0; };
    EndPtr e = end;
    int order = end->order;
    MorPtr act = derived_action_left(outer, K, end);
    bim->slot_weight = [e](BasisKey m) { return static_cast<int>(e->word_of.at(m).size()); };
    bim->taylor = [e, act, order](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
        Element out(e->space.get(), order);
        if (a.empty() && b.empty()) {
            std::vector<BasisKey> one{m};
            return e->alg->d(one, ctx);  // -s del s^{-1}
        }
        if (!a.empty() && !b.empty()) return out;
        const auto& wphi = e->word_of.at(m);
        if (!a.empty()) {
            // D^{n,0} = (-1)^{susp(a)-1} L(a) o phi ; word = wphi ++ wL
            Element lval = act->t(a, ctx);
            if (lval.is_zero()) return out;
            int par = parity_of(susp_parity(a) + 1);
            for (const auto& [lk, lc] : lval.terms()) {
                const auto& wl = e->word_of.at(lk);
                std::vector<BasisKey> cat = wphi;
                cat.insert(cat.end(), wl.begin(), wl.end());
                auto it = e->key_of.find(cat);
                if (it == e->key_of.end()) {
                    ctx.truncated = true;
                    continue;
                }
                Scalar c = lc;
                if (par) c = -c;
                out.add_term(it->second, c, ctx);
            }
        } else {
            // D^{0,m} = (-1)^{|phi|} phi o L(a) ; word = wL ++ wphi
            Element lval = act->t(b, ctx);
            if (lval.is_zero()) return out;
            int par = parity_of(m.deg.coh);
            for (const auto& [lk, lc] : lval.terms()) {
                const auto& wl = e->word_of.at(lk);
                std::vector<BasisKey> cat = wl;
                cat.insert(cat.end(), wphi.begin(), wphi.end());
                auto it = e->key_of.find(cat);
                if (it == e->key_of.end()) {
                    ctx.truncated = true;
                    continue;
                }
                Scalar c = lc;
                if (par) c = -c;
                out.add_term(it->second, c, ctx);
            }
        }
        return out;
    };

    EndBimodule out;
    out.bim = bim;
    out.end = end;
    auto actbim = std::make_shared<AMorphism>();
    actbim->kind = MorKind::bimodule;
    actbim->bim_src = as_bimodule(outer);
    actbim->bim_tgt = bim;
    actbim->order = order;
    MorPtr actc = act;
    actbim->bim_taylor = [actc](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) {
        std::vector<BasisKey> all(a.begin(), a.end());
        all.push_back(m);
        all.insert(all.end(), b.begin(), b.end());
        return actc->t(all, ctx);
    };
    out.action = actbim;
    return out;
}


// ---- dual modules -----------------------------------------------------------

namespace {

// shared machinery: villages of (word, target) bases for Hom_B(bar, B)-type
// objects, built against the internal bar so the differential stays honest
struct DualBuild {
    SpacePtr space;
    std::map<BasisKey, std::pair<std::vector<BasisKey>, BasisKey>> data_of;
    std::map<std::pair<std::vector<BasisKey>, BasisKey>, BasisKey> key_of;
};

DualBuild build_dual_space(const Algebra& Balg, const Window& win, const std::string& tag) {
    DualBuild out;
    auto sp = std::make_shared<BigradedSpace>();
    sp->truncated_beyond = true;
    std::vector<BasisKey> pool = full_pool(*Balg.space);
    std::vector<std::tuple<Bidegree, std::vector<BasisKey>, BasisKey>> items;
    for (const auto& [bd, blabels] : Balg.space->basis()) {
        for (int bi = 0; bi < static_cast<int>(blabels.size()); ++bi) {
            Window box{bd.coh - win.coh_max, bd.coh - win.coh_min,
                       bd.intd - win.intd_max, bd.intd - win.intd_min};
            enumerate_words(pool, {0, 0}, box, [&](const std::vector<BasisKey>& w, Bidegree t) {
                items.emplace_back(Bidegree{bd.coh - t.coh, bd.intd - t.intd}, w,
                                   BasisKey{bd, bi});
            });
        }
    }
    std::sort(items.begin(), items.end());
    for (auto& [deg, w, beta] : items) {
        int idx = sp->add_basis(deg, tag + "(" + word_str(*Balg.space, w) + ")->" +
                                         Balg.space->label(beta.deg, beta.idx));
        out.data_of.emplace(BasisKey{deg, idx}, std::make_pair(w, beta));
        out.key_of.emplace(std::make_pair(w, beta), BasisKey{deg, idx});
    }
    out.space = sp;
    return out;
}

}  // namespace

DualModule dual_right(BimodPtr K, const Window& win) {
    AlgPtr A = K->left, B = K->right;
    int order = K->order;
    Window dwin = win;
    BasisKey kgen{{0, 0}, 0};
    DualModule out;
    DualBuild built = build_dual_space(*B, win, "f");
    out.space = built.space;
    out.data_of = built.data_of;
    out.key_of = built.key_of;

    // internal bar B_B(K) = K (x)_B B for the (0,0)-differential
    Window barwin{win.coh_min - 2, win.coh_max + 2, win.intd_min - 2, win.intd_max + 2};
    auto barT = std::make_shared<TensorBimodule>(bar_right(K, barwin));

    auto bim = std::make_shared<Bimodule>();
    bim->left = B;
    bim->right = A;
    bim->space = built.space;
    bim->max_k = 1;
    bim->max_l = 1 << 20;
    bim->order = order;
    auto data = std::make_shared<decltype(out.data_of)>(out.data_of);
    auto keys = std::make_shared<decltype(out.key_of)>(out.key_of);
    BimodPtr Kc = K;
    AlgPtr Bc = B;
    SpacePtr spc = built.space;
    bim->slot_weight = [data](BasisKey m) {
        return static_cast<int>(data->at(m).first.size());
    };
    bim->supports = [](int k, int l) { return k == 0 || l == 0 || (k <= 1 && l == 0); };
    bim->taylor = [data, keys, Kc, Bc, spc, barT, order, kgen](KeySpan bb, BasisKey m,
                                                               KeySpan aa,
                                                               EvalCtx& ctx) -> Element {
        Element out_e(spc.get(), order);
        const auto& [w, beta] = data->at(m);
        const Algebra& B = *Bc;
        if (!bb.empty() && !aa.empty()) return out_e;
        if (bb.size() > 1) return out_e;
        if (bb.size() == 1) {
            // d^{1,0}(b|phi) = s((-1)^{|b|} b . phi)
            Element prod = label_product(B, bb[0], beta, ctx);
            int par = parity_of(bb[0].deg.coh);
            for (const auto& [pk, pc] : prod.terms()) {
                auto it = keys->find({w, pk});
                if (it == keys->end()) {
                    ctx.truncated = true;
                    continue;
                }
                Scalar c = pc;
                if (par) c = -c;
                out_e.add_term(it->second, c, ctx);
            }
            return out_e;
        }
        if (!aa.empty()) {
            // d^{0,m}(phi|a) = (-1)^{|phi|-1+susp(a)} sum_heads c_head phi_{head++w}
            int par = parity_of(m.deg.coh + 1 + susp_parity(aa));
            int wl = 1 - static_cast<int>(aa.size());
            int dega = 0;
            for (const auto& x : aa) {
                wl += x.deg.intd;
                dega += x.deg.intd;
            }
            if (wl < 0) return out_e;
            auto bplus = plus_pool(*Bc->space, false);
            std::vector<BasisKey> headbuf;
            fixed_weight_words(bplus, wl, dega, headbuf, [&](const std::vector<BasisKey>& hb) {
                Element v = Kc->d(aa, kgen, hb, ctx);
                Scalar c = v.coeff(kgen);
                if (c.is_zero()) return;
                std::vector<BasisKey> nw = hb;
                nw.insert(nw.end(), w.begin(), w.end());
                auto it = keys->find({nw, beta});
                if (it == keys->end()) {
                    ctx.truncated = true;
                } else {
                    Scalar cc = c;
                    if (par) cc = -cc;
                    out_e.add_term(it->second, cc, ctx);
                }
            });
            return out_e;
        }
        // d^{0,0}(s phi) = -s(del phi); del phi = (-1)^{|phi|+1} phi o d0-label
        // of the bar; scan candidate targets at bidegree +(1,0)
        Bidegree td{m.deg.coh + 1, m.deg.intd};
        int sphi = parity_of(m.deg.coh + 1);
        for (int t = 0; t < spc->dim(td); ++t) {
            const auto& [wp, betap] = data->at({td, t});
            // evaluate d0-label of the bar on (k; wp; 1_B), apply phi
            TensorWord in{kgen, wp, *Bc->unit};
            auto kit = barT->carrier->key_of.find(in);
            if (kit == barT->carrier->key_of.end()) {
                ctx.truncated = true;
                continue;
            }
            Element dv = barT->bim->d({}, kit->second, {}, ctx);
            Scalar acc = Scalar::zero(order);
            for (const auto& [ck, cc] : dv.terms()) {
                const TensorWord& tw = barT->carrier->word_of.at(ck);
                if (tw.word != w) continue;
                // phi(k; w; b'') = m2(beta, b'')
                Element pv = label_product(B, beta, tw.k2, ctx);
                Scalar pc = pv.coeff(betap);
                if (pc.is_zero()) continue;
                acc += cc * pc;
            }
            if ((sphi + 1) % 2) acc.negate();  // total: -(-1)^{|phi|+1}
            if (!acc.is_zero()) out_e.add_term({td, t}, acc, ctx);
        }
        return out_e;
    };
    out.bim = bim;
    return out;
}

DualModule dual_left(BimodPtr K, const Window& win) {
    AlgPtr A = K->left, B = K->right;
    int order = K->order;
    Window dwin = win;
    BasisKey kgen{{0, 0}, 0};
    DualModule out;
    DualBuild built = build_dual_space(*A, win, "g");
    out.space = built.space;
    out.data_of = built.data_of;
    out.key_of = built.key_of;

    Window barwin{win.coh_min - 2, win.coh_max + 2, win.intd_min - 2, win.intd_max + 2};
    auto barT = std::make_shared<TensorBimodule>(bar_left(K, barwin));

    auto bim = std::make_shared<Bimodule>();
    bim->left = B;
    bim->right = A;
    bim->space = built.space;
    bim->max_k = 1 << 20;
    bim->max_l = 1;
    bim->order = order;
    auto data = std::make_shared<decltype(out.data_of)>(out.data_of);
    auto keys = std::make_shared<decltype(out.key_of)>(out.key_of);
    BimodPtr Kc = K;
    AlgPtr Ac = A;
    SpacePtr spc = built.space;
    bim->slot_weight = [data](BasisKey m) {
        return static_cast<int>(data->at(m).first.size());
    };
    bim->taylor = [data, keys, Kc, Ac, spc, barT, order, kgen](KeySpan bb, BasisKey m,
                                                               KeySpan aa,
                                                               EvalCtx& ctx) -> Element {
        Element out_e(spc.get(), order);
        const auto& [w, alpha] = data->at(m);
        const Algebra& A = *Ac;
        if (!bb.empty() && !aa.empty()) return out_e;
        if (aa.size() > 1) return out_e;
        if (aa.size() == 1) {
            // d^{0,1}(phi|a') = s((-1)^{|phi|} phi(.) a')
            Element prod = label_product(A, alpha, aa[0], ctx);
            int par = parity_of(m.deg.coh);
            for (const auto& [pk, pc] : prod.terms()) {
                auto it = keys->find({w, pk});
                if (it == keys->end()) {
                    ctx.truncated = true;
                    continue;
                }
                Scalar c = pc;
                if (par) c = -c;
                out_e.add_term(it->second, c, ctx);
            }
            return out_e;
        }
        if (!bb.empty()) {
            // d^{k,0}(b_1..b_k|phi): heads consumed from the word tail side,
            // sign (-1)^{(|phi|+|a|+susp(word')+1)(susp(b)+1)} with word' the
            // evaluation word (here |a| = 0 throughout A)
            int wl = 1 - static_cast<int>(bb.size());
            int degb = 0;
            for (const auto& x : bb) {
                wl += x.deg.coh;
                degb += x.deg.coh;
            }
            if (wl < 0) return out_e;
            auto aplus = plus_pool(*Ac->space, true);
            int pb = parity_of(susp_parity(bb) + 1);
            std::vector<BasisKey> tailbuf;
            fixed_weight_words(aplus, wl, degb, tailbuf, [&](const std::vector<BasisKey>& tb) {
                {
                    Element v = Kc->d(tb, kgen, bb, ctx);
                    Scalar c = v.coeff(kgen);
                    if (!c.is_zero()) {
                        std::vector<BasisKey> nw = w;
                        nw.insert(nw.end(), tailbuf.begin(), tailbuf.end());
                        auto it = keys->find({nw, alpha});
                        if (it == keys->end()) {
                            ctx.truncated = true;
                        } else {
                            // the displayed product sign reduces on the
                            // (d2)-support to (-1)^{susp(b)+1}
                            Scalar cc = c;
                            if (pb) cc = -cc;
                            out_e.add_term(it->second, cc, ctx);
                        }
                    }
                }
            });
            return out_e;
        }
        // d^{0,0}(s phi) = -s(del phi), del = (-1)^{|phi|} phi o bar-d0
        Bidegree td{m.deg.coh + 1, m.deg.intd};
        int sphi = parity_of(m.deg.coh + 1);
        for (int t = 0; t < spc->dim(td); ++t) {
            const auto& [wp, alphap] = data->at({td, t});
            TensorWord in{*Ac->unit, wp, kgen};
            auto kit = barT->carrier->key_of.find(in);
            if (kit == barT->carrier->key_of.end()) {
                ctx.truncated = true;
                continue;
            }
            Element dv = barT->bim->d({}, kit->second, {}, ctx);
            Scalar acc = Scalar::zero(order);
            for (const auto& [ck, cc] : dv.terms()) {
                const TensorWord& tw = barT->carrier->word_of.at(ck);
                if (tw.word != w) continue;
                // phi((a; w; k)) = m2(a, alpha), left-A-linear
                Element pv = label_product(A, tw.k1, alpha, ctx);
                Scalar pc = pv.coeff(alphap);
                if (pc.is_zero()) continue;
                acc += cc * pc;
            }
            if ((sphi + 1) % 2) acc.negate();
            if (!acc.is_zero()) out_e.add_term({td, t}, acc, ctx);
        }
        return out_e;
    };
    out.bim = bim;
    return out;
}

// ---- Endd objects ------------------------------------------------------------

EnddObject endd_bar(BimodPtr K, Side side, const Window& win, int max_weight) {
    EnddObject out;
    out.side = side;
    const Algebra& Walg = (side == Side::right) ? *K->right : *K->left;
    const Algebra& Targ = Walg;
    int order = K->order;
    auto sp = std::make_shared<BigradedSpace>();
    sp->truncated_beyond = true;
    std::vector<BasisKey> pool = full_pool(*Walg.space);
    // basis (w_in, w_out, beta): bidegree = [susp(w_out) + beta] - susp(w_in),
    // stored up to total word weight |w_in| + |w_out| <= max_weight
    std::vector<std::tuple<Bidegree, std::vector<BasisKey>, std::vector<BasisKey>, BasisKey>> items;
    Window valbox{win.coh_min * 2 - 2, win.coh_max * 2 + 2, win.intd_min * 2 - 2,
                  win.intd_max * 2 + 2};
    for (const auto& [bd, blabels] : Targ.space->basis()) {
        for (int bi = 0; bi < static_cast<int>(blabels.size()); ++bi) {
            enumerate_words(pool, bd, valbox, [&](const std::vector<BasisKey>& wout, Bidegree tv) {
                if (static_cast<int>(wout.size()) > max_weight) return;
                std::vector<BasisKey> wout_copy = wout;
                int budget = max_weight - static_cast<int>(wout.size());
                Window box{tv.coh - win.coh_max, tv.coh - win.coh_min,
                           tv.intd - win.intd_max, tv.intd - win.intd_min};
                enumerate_words(pool, {0, 0}, box,
                                [&](const std::vector<BasisKey>& win_w, Bidegree ti) {
                                    if (static_cast<int>(win_w.size()) > budget) return;
                                    items.emplace_back(Bidegree{tv.coh - ti.coh, tv.intd - ti.intd},
                                                       win_w, wout_copy, BasisKey{bd, bi});
                                });
            });
        }
    }
    std::sort(items.begin(), items.end());
    for (auto& [deg, wi, wo, beta] : items) {
        int idx = sp->add_basis(deg, "E(" + word_str(*Walg.space, wi) + ")->(" +
                                         word_str(*Walg.space, wo) + ";" +
                                         Targ.space->label(beta.deg, beta.idx) + ")");
        out.data_of.emplace(BasisKey{deg, idx}, std::make_tuple(wi, wo, beta));
        out.key_of.emplace(std::make_tuple(wi, wo, beta), BasisKey{deg, idx});
    }
    out.space = sp;
    return out;
}

BimodPtr endd_bimodule(const EnddObject& endd, BimodPtr K, const Window& win) {
    const bool right_side = (endd.side == Side::right);
    AlgPtr outer = right_side ? K->left : K->right;
    int order = K->order;
    Window dwin = win;
    BasisKey kgen{{0, 0}, 0};
    Window barwin{win.coh_min - 3, win.coh_max + 3, win.intd_min - 3, win.intd_max + 3};
    auto barT = std::make_shared<TensorBimodule>(right_side ? bar_right(K, barwin)
                                                            : bar_left(K, barwin));
    auto data = std::make_shared<decltype(endd.data_of)>(endd.data_of);
    auto keys = std::make_shared<decltype(endd.key_of)>(endd.key_of);
    SpacePtr spc = endd.space;

    auto bim = std::make_shared<Bimodule>();
    bim->left = outer;
    bim->right = outer;
    bim->space = endd.space;
    bim->max_k = 1 << 20;
    bim->max_l = 1 << 20;
    bim->order = order;
    bim->supports = [](int k, int l) { return k == 0 || l == 0; };
    bim->slot_weight = [data](BasisKey m) {
        const auto& [wi, wo, beta] = data->at(m);
        return static_cast<int>(wi.size() + wo.size());
    };
    BimodPtr Kc = K;
    const bool rs = right_side;
    bim->taylor = [data, keys, spc, barT, Kc, order, kgen, rs, dwin](KeySpan a, BasisKey m, KeySpan b,
                                                               EvalCtx& ctx) -> Element {
        Element out(spc.get(), order);
        const auto& [wi, wo, beta] = data->at(m);
        if (!a.empty() && !b.empty()) return out;
        auto val_key = [&](EvalCtx& c2) {
            TensorWord tw = rs ? TensorWord{kgen, wo, beta} : TensorWord{beta, wo, kgen};
            auto it = barT->carrier->key_of.find(tw);
            if (it == barT->carrier->key_of.end()) {
                c2.truncated = true;
                return std::optional<BasisKey>{};
            }
            return std::optional<BasisKey>{it->second};
        };
        if (a.empty() && b.empty()) {
            // del(phi) = (-1)^{|phi|+1} phi o d0-label + d0-label o phi;
            // taylor returns -del
            // term 2 (forward): d0-label applied to the value
            auto vk = val_key(ctx);
            if (vk) {
                Element dv = barT->bim->d({}, *vk, {}, ctx);
                for (const auto& [ck, cc] : dv.terms()) {
                    const TensorWord& tw = barT->carrier->word_of.at(ck);
                    std::vector<BasisKey> nwo = tw.word;
                    BasisKey nbeta = rs ? tw.k2 : tw.k1;
                    auto it = keys->find(std::make_tuple(wi, nwo, nbeta));
                    if (it == keys->end()) {
                        ctx.truncated = true;
                        continue;
                    }
                    out.add_term(it->second, -cc, ctx);  // overall minus from -s del
                }
            }
            // term 1 (backward): scan targets with modified input word; the
            // phi-application multiplies the value's algebra factor
            Bidegree td{m.deg.coh + 1, m.deg.intd};
            if (!dwin.contains(td)) ctx.truncated = true;  // scan incomplete
            int sphi = parity_of(m.deg.coh + 1);
            for (int t = 0; t < spc->dim(td); ++t) {
                const auto& [wip, wop, betap] = data->at({td, t});
                if (!(wop == wo)) continue;
                TensorWord in = rs ? TensorWord{kgen, wip, (*barT->bim->right->unit)}
                                   : TensorWord{(*barT->bim->left->unit), wip, kgen};
                auto kit = barT->carrier->key_of.find(in);
                if (kit == barT->carrier->key_of.end()) {
                    ctx.truncated = true;
                    continue;
                }
                Element dv = barT->bim->d({}, kit->second, {}, ctx);
                Scalar acc = Scalar::zero(order);
                for (const auto& [ck, cc] : dv.terms()) {
                    const TensorWord& tw = barT->carrier->word_of.at(ck);
                    if (tw.word != wi) continue;
                    BasisKey last = rs ? tw.k2 : tw.k1;
                    EvalCtx c3;
                    Element pv = rs ? label_product(*barT->bim->right, beta, last, c3)
                                    : label_product(*barT->bim->left, last, beta, c3);
                    Scalar pc = pv.coeff(betap);
                    if (pc.is_zero()) continue;
                    acc += cc * pc;
                }
                if ((sphi + 1) % 2) acc.negate();  // -(-1)^{|phi|+1}
                if (!acc.is_zero()) out.add_term({td, t}, acc, ctx);
            }
            return out;
        }
        if (!a.empty()) {
            if (rs) {
                // D^{l,0}(a|phi) = (-1)^{susp(a)-1} bar-d^{l,0}(a | value)
                auto vk = val_key(ctx);
                if (!vk) return out;
                Element dv = barT->bim->d(a, *vk, {}, ctx);
                int par = parity_of(susp_parity(a) + 1);
                for (const auto& [ck, cc] : dv.terms()) {
                    const TensorWord& tw = barT->carrier->word_of.at(ck);
                    auto it = keys->find(std::make_tuple(wi, tw.word, tw.k2));
                    if (it == keys->end()) {
                        ctx.truncated = true;
                        continue;
                    }
                    Scalar c = cc;
                    if (par) c = -c;
                    out.add_term(it->second, c, ctx);
                }
            } else {
                // op side D^{l,0}(b..|phi): input-side heads consumed by d_K
                // together with the b-block at the tail of the input word;
                // sign (-1)^{(|phi|+|a|+susp(word)+1)(susp(b)+1)}
                int wl = 1 - static_cast<int>(a.size());
                for (const auto& x : a) wl += x.deg.coh;
                if (wl < 0) return out;
                std::vector<BasisKey> apool2 = full_pool(*Kc->left->space);
                int pb = parity_of(susp_parity(a) + 1);
                std::vector<BasisKey> tailbuf;
                std::function<void(int)> rec = [&](int rem) {
                    if (rem == 0) {
                        Element v = Kc->d(tailbuf, kgen, a, ctx);
                        Scalar c = v.coeff(kgen);
                        if (!c.is_zero()) {
                            std::vector<BasisKey> nwi = wi;
                            nwi.insert(nwi.end(), tailbuf.begin(), tailbuf.end());
                            auto it = keys->find(std::make_tuple(nwi, wo, beta));
                            if (it == keys->end()) {
                                ctx.truncated = true;
                            } else {
                                int pa = parity_of(m.deg.coh + word_susp_parity(nwi) + 1);
                                Scalar cc = c;
                                if (pa & pb) cc = -cc;
                                out.add_term(it->second, cc, ctx);
                            }
                        }
                        return;
                    }
                    for (const auto& akey : apool2) {
                        tailbuf.push_back(akey);
                        rec(rem - 1);
                        tailbuf.pop_back();
                    }
                };
                rec(wl);
            }
            return out;
        }
        // b-side
        if (rs) {
            // D^{0,m}(phi|a's): input-side heads, sign (-1)^{|phi|}
            int wl = 1 - static_cast<int>(b.size());
            for (const auto& x : b) wl += x.deg.intd;
            if (wl < 0) return out;
            std::vector<BasisKey> bpool2 = full_pool(*Kc->right->space);
            int par = parity_of(m.deg.coh);
            std::vector<BasisKey> headbuf;
            std::function<void(int)> rec = [&](int rem) {
                if (rem == 0) {
                    Element v = Kc->d(b, kgen, headbuf, ctx);
                    Scalar c = v.coeff(kgen);
                    if (!c.is_zero()) {
                        std::vector<BasisKey> nwi = headbuf;
                        nwi.insert(nwi.end(), wi.begin(), wi.end());
                        auto it = keys->find(std::make_tuple(nwi, wo, beta));
                        if (it == keys->end()) {
                            ctx.truncated = true;
                        } else {
                            Scalar cc = c;
                            if (par) cc = -cc;
                            out.add_term(it->second, cc, ctx);
                        }
                    }
                    return;
                }
                for (const auto& bkey : bpool2) {
                    headbuf.push_back(bkey);
                    rec(rem - 1);
                    headbuf.pop_back();
                }
            };
            rec(wl);
        } else {
            // op side D^{0,m}(phi|b's): output-side right action of the bar,
            // sign (-1)^{(susp(input-string)) * susp(b)}  (|a| = 0 in A)
            auto vk = val_key(ctx);
            if (!vk) return out;
            Element dv = barT->bim->d({}, *vk, b, ctx);
            int par = parity_of(word_susp_parity(const_cast<std::vector<BasisKey>&>(wi)) + 1) &
                      susp_parity(b);
            for (const auto& [ck, cc] : dv.terms()) {
                const TensorWord& tw = barT->carrier->word_of.at(ck);
                auto it = keys->find(std::make_tuple(wi, tw.word, tw.k1));
                if (it == keys->end()) {
                    ctx.truncated = true;
                    continue;
                }
                Scalar c = cc;
                if (par) c = -c;
                out.add_term(it->second, c, ctx);
            }
        }
        return out;
    };
    return bim;
}

MorPtr iso_G(const TensorBimodule& KK, const DualModule& dual, const EnddObject& endd,
             BimodPtr endd_bim) {
    // side right: G(k; w; phi_{w',beta}) = (-1)^{|m|+|phi|} Endd(w', w, beta)
    // with |m| = susp(w); mirror on the left side.
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = KK.bim;
    F->bim_tgt = endd_bim;
    F->order = KK.bim->order;
    F->max_k = 0;
    F->max_l = 0;
    CarrierPtr car = KK.carrier;
    auto ddata = std::make_shared<decltype(dual.data_of)>(dual.data_of);
    auto ekeys = std::make_shared<decltype(endd.key_of)>(endd.key_of);
    SpacePtr tsp = endd.space;
    int order = KK.bim->order;
    const bool rs = (endd.side == Side::right);
    F->bim_taylor = [car, ddata, ekeys, tsp, order, rs](KeySpan a, BasisKey m, KeySpan b,
                                                        EvalCtx& ctx) -> Element {
        Element out(tsp.get(), order);
        if (!a.empty() || !b.empty()) return out;
        const TensorWord& tw = car->word_of.at(m);
        BasisKey dualkey = rs ? tw.k2 : tw.k1;
        const auto& [w_in, beta] = ddata->at(dualkey);
        auto it = ekeys->find(std::make_tuple(w_in, tw.word, beta));
        if (it == ekeys->end()) {
            ctx.truncated = true;
            return out;
        }
        int par;
        if (rs) {
            par = parity_of(word_susp_parity(tw.word) + dualkey.deg.coh);
        } else {
            par = parity_of(word_susp_parity(tw.word) + dualkey.deg.coh);
        }
        Scalar c = Scalar::one(order);
        if (par) c = -c;
        out.add_term(it->second, c, ctx);
        return out;
    };
    return F;
}

MorPtr homotopy_H_map(const EnddObject& endd, BimodPtr endd_bim, const EndBimodule& endbim) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = endd_bim;
    F->bim_tgt = endbim.bim;
    F->order = endbim.bim->order;
    F->max_k = 0;
    F->max_l = 0;
    auto ddata = std::make_shared<decltype(endd.data_of)>(endd.data_of);
    EndPtr e = endbim.end;
    int order = endbim.bim->order;
    F->bim_taylor = [ddata, e, order](KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) -> Element {
        Element out(e->space.get(), order);
        if (!a.empty() || !b.empty()) return out;
        const auto& [wi, wo, beta] = ddata->at(m);
        if (!wo.empty()) return out;                      // word-length-0 part
        if (beta.deg != Bidegree{0, 0}) return out;       // scalar part of the last slot
        auto it = e->key_of.find(wi);
        if (it == e->key_of.end()) {
            ctx.truncated = true;
            return out;
        }
        out.add_term(it->second, Scalar::one(order), ctx);
        return out;
    };
    return F;
}

// ---- Morita unit -------------------------------------------------------------

namespace {

// Solve for a strictly unital bimodule morphism nu: src -> tgt with the
// seed nu^{0,0}(unit) = t, by the morphism equations on all strings <= W.
MorPtr solve_seeded_morphism(BimodPtr src, BimodPtr tgt, const Element& seed, int W,
                             const Window& win, std::string* err) {
    int order = src->order;
    const Algebra& A = *src->left;
    const Algebra& B = *src->right;
    SpacePtr Ns = tgt->space;

    auto pool_of = [&](const BigradedSpace& sp, bool augmented_only) {
        std::vector<BasisKey> keys;
        for (const auto& [d, labels] : sp.basis()) {
            if (!win.contains(d)) continue;
            if (augmented_only && d == Bidegree{0, 0}) continue;
            for (int i = 0; i < static_cast<int>(labels.size()); ++i) keys.push_back({d, i});
        }
        return keys;
    };
    std::vector<BasisKey> apool_plus = pool_of(*A.space, true);
    std::vector<BasisKey> bpool_plus = pool_of(*B.space, true);
    std::vector<BasisKey> apool = pool_of(*A.space, false);
    std::vector<BasisKey> bpool = pool_of(*B.space, false);
    std::vector<BasisKey> mpool = pool_of(*src->space, false);

    const int NO = order + 1;
    std::map<std::pair<std::pair<int, int>, std::pair<std::vector<BasisKey>, BasisKey>>, int> ids;
    std::vector<std::tuple<int, int, std::vector<BasisKey>, BasisKey>> unknowns;
    auto value_bideg = [&](KeySpan aa, BasisKey m, KeySpan bb) {
        int C = m.deg.coh, I = m.deg.intd;
        int n = static_cast<int>(aa.size() + bb.size()) + 1;
        for (const auto& k : aa) { C += k.deg.coh; I += k.deg.intd; }
        for (const auto& k : bb) { C += k.deg.coh; I += k.deg.intd; }
        return Bidegree{C - n + 1, I};
    };
    // declare unknowns on strictly unital tuples (augmented outer slots)
    {
        std::vector<BasisKey> aa, bb;
        for (int tot = 0; tot <= W; ++tot)
            for (int k = 0; k <= tot; ++k) {
                int l = tot - k;
                std::function<void(int)> rec = [&](int i) {
                    if (i == k + l) {
                        for (BasisKey m : mpool) {
                            Bidegree vd = value_bideg(aa, m, bb);
                            int tdim = Ns->dim(vd);
                            for (int t = 0; t < tdim; ++t) {
                                std::vector<BasisKey> slots(aa.begin(), aa.end());
                                slots.insert(slots.end(), bb.begin(), bb.end());
                                slots.push_back(m);
                                ids[{{k, l}, {slots, BasisKey{vd, t}}}] =
                                    static_cast<int>(unknowns.size());
                                unknowns.push_back({k, l, slots, BasisKey{vd, t}});
                            }
                        }
                        return;
                    }
                    if (i < k)
                        for (BasisKey x : apool_plus) { aa.push_back(x); rec(i + 1); aa.pop_back(); }
                    else
                        for (BasisKey x : bpool_plus) { bb.push_back(x); rec(i + 1); bb.pop_back(); }
                };
                aa.clear();
                bb.clear();
                rec(0);
            }
    }
    auto lookup = [&](int k, int l, KeySpan aa, BasisKey m, KeySpan bb, BasisKey tkey) -> int {
        // unknowns vanish on unit outer slots
        for (const auto& x : aa)
            if (x.deg == Bidegree{0, 0}) return -2;
        for (const auto& x : bb)
            if (x.deg == Bidegree{0, 0}) return -2;
        std::vector<BasisKey> slots(aa.begin(), aa.end());
        slots.insert(slots.end(), bb.begin(), bb.end());
        slots.push_back(m);
        auto it = ids.find({{k, l}, {slots, tkey}});
        return it == ids.end() ? -1 : it->second;
    };

    LinearSystem sys;
    bool leaked = false;

    struct Row {
        std::vector<std::pair<int, Rational>> lin;
        Scalar rhs;
        explicit Row(int o) : rhs(Scalar::zero(o)) {}
    };

    // strictly unital prescription: value on unit outer slots is the
    // identity-like action, handled as KNOWN terms: nu^{k,l} with a unit
    // slot is zero except the bare unit action which the morphism relation
    // produces via the structures themselves.  We only need nu on strings
    // with augmented outer slots, plus the seed at (0,0) on the unit slot of
    // the source carrier (= the algebra unit inside as_bimodule).
    auto nu_terms = [&](int k, int l, KeySpan aa, BasisKey m, KeySpan bb,
                        const Scalar& coef, int sign, std::map<std::pair<BasisKey, int>, Row>& rows,
                        bool rhs_side) {
        // contribution coef * nu^{k,l}(tuple) to the row set
        int probe = lookup(k, l, aa, m, bb, BasisKey{});
        (void)probe;
        Bidegree vd = value_bideg(aa, m, bb);
        int tdim = Ns->dim(vd);
        if (tdim == 0) {
            if (Ns->truncated_beyond) leaked = true;
            return;
        }
        for (int t = 0; t < tdim; ++t) {
            int id = lookup(k, l, aa, m, bb, BasisKey{vd, t});
            if (id == -2) return;  // structurally zero (unit slot)
            if (id < 0) {
                leaked = true;
                return;
            }
            for (int i = 0; i <= order; ++i) {
                if (sgn(coef.coeff(i)) == 0) continue;
                for (int j = 0; i + j <= order; ++j) {
                    auto& row = rows.try_emplace({BasisKey{vd, t}, i + j}, Row(order))
                                    .first->second;
                    Rational v = coef.coeff(i);
                    if (sign < 0) v = -v;
                    if (rhs_side) v = -v;
                    row.lin.emplace_back(id * NO + j, v);
                }
            }
        }
    };

    auto process_string = [&](KeySpan aa, BasisKey m, KeySpan bb) {
        EvalCtx ctx;
        std::map<std::pair<BasisKey, int>, Row> rows;
        size_t k = aa.size(), l = bb.size();
        // LHS: moves of d_src with outer nu
        {
            // algebra inserts on a-block
            for (size_t s1 = 0; s1 <= k; ++s1) {
                if (static_cast<int>(s1) > A.max_arity) break;
                if (s1 == 0 && !A.has_curvature) continue;
                for (size_t j = 0; j + s1 <= k; ++j) {
                    Element inner = A.d(aa.subspan(j, s1), ctx);
                    if (inner.is_zero()) continue;
                    int par = susp_parity(aa.first(j));
                    for (const auto& [key, c] : inner.terms()) {
                        std::vector<BasisKey> buf(aa.begin(), aa.begin() + static_cast<long>(j));
                        buf.push_back(key);
                        buf.insert(buf.end(), aa.begin() + static_cast<long>(j + s1), aa.end());
                        nu_terms(static_cast<int>(buf.size()), static_cast<int>(l), buf, m, bb, c,
                                 par ? -1 : 1, rows, false);
                    }
                }
            }
            int head_par = (susp_parity(aa) + parity_of(m.deg.coh - 1)) % 2;
            for (size_t s2 = 0; s2 <= l; ++s2) {
                if (static_cast<int>(s2) > B.max_arity) break;
                if (s2 == 0 && !B.has_curvature) continue;
                for (size_t j = 0; j + s2 <= l; ++j) {
                    Element inner = B.d(bb.subspan(j, s2), ctx);
                    if (inner.is_zero()) continue;
                    int par = (head_par + susp_parity(bb.first(j))) % 2;
                    for (const auto& [key, c] : inner.terms()) {
                        std::vector<BasisKey> buf(bb.begin(), bb.begin() + static_cast<long>(j));
                        buf.push_back(key);
                        buf.insert(buf.end(), bb.begin() + static_cast<long>(j + s2), bb.end());
                        nu_terms(static_cast<int>(k), static_cast<int>(buf.size()), aa, m, buf, c,
                                 par ? -1 : 1, rows, false);
                    }
                }
            }
            for (size_t s3 = 0; s3 <= k; ++s3)
                for (size_t s4 = 0; s4 <= l; ++s4) {
                    Element inner = src->d(aa.last(s3), m, bb.first(s4), ctx);
                    if (inner.is_zero()) continue;
                    int par = susp_parity(aa.first(k - s3));
                    for (const auto& [mk, c] : inner.terms())
                        nu_terms(static_cast<int>(k - s3), static_cast<int>(l - s4),
                                 aa.first(k - s3), mk, bb.last(l - s4), c, par ? -1 : 1, rows,
                                 false);
                }
        }
        // RHS: inner nu, outer d_tgt
        for (size_t s3 = 0; s3 <= k; ++s3)
            for (size_t s4 = 0; s4 <= l; ++s4) {
                KeySpan ta = aa.last(s3), tb = bb.first(s4);
                Bidegree vd = value_bideg(ta, m, tb);
                int tdim = Ns->dim(vd);
                if (tdim == 0) {
                    if (Ns->truncated_beyond) leaked = true;
                    continue;
                }
                for (int t = 0; t < tdim; ++t) {
                    int id = lookup(static_cast<int>(s3), static_cast<int>(s4), ta, m, tb,
                                    BasisKey{vd, t});
                    if (id == -2) continue;
                    if (id < 0) {
                        leaked = true;
                        continue;
                    }
                    Element v = tgt->d(aa.first(k - s3), BasisKey{vd, t}, bb.last(l - s4), ctx);
                    for (const auto& [tk, c] : v.terms()) {
                        for (int i = 0; i <= order; ++i) {
                            if (sgn(c.coeff(i)) == 0) continue;
                            for (int j = 0; i + j <= order; ++j) {
                                auto& row =
                                    rows.try_emplace({tk, i + j}, Row(order)).first->second;
                                row.lin.emplace_back(id * NO + j, -c.coeff(i));
                            }
                        }
                    }
                }
            }
        if (ctx.truncated) leaked = true;
        for (auto& [key, row] : rows) sys.add_equation(std::move(row.lin), row.rhs.coeff(key.second));
    };

    // seed equations: nu^{0,0}(unit-of-src) = t
    {
        // the source carrier's unit element: for as_bimodule(A) it is the
        // algebra unit
        BasisKey srcunit = *src->left->unit;
        Bidegree vd = value_bideg({}, srcunit, {});
        (void)vd;
        for (const auto& [tk, c] : seed.terms()) {
            for (int o = 0; o <= order; ++o) {
                int id = lookup(0, 0, {}, srcunit, {}, tk);
                if (id < 0) continue;
                for (int j = 0; j <= o; ++j) {
                    // nu-coeff order j must match seed coefficient exactly:
                    // identify order-by-order
                }
                (void)id;
            }
        }
        // simpler: one equation per (target key, order)
        int tdim = Ns->dim(seed.terms().empty() ? Bidegree{0, 0}
                                                : seed.terms().begin()->first.deg);
        (void)tdim;
        Bidegree sd = value_bideg({}, srcunit, {});
        for (int t = 0; t < Ns->dim(sd); ++t) {
            int id = lookup(0, 0, {}, srcunit, {}, BasisKey{sd, t});
            if (id < 0) continue;
            Scalar want = Scalar::zero(order);
            for (const auto& [tk, c] : seed.terms())
                if (tk == BasisKey{sd, t}) want = c;
            for (int j = 0; j <= order; ++j)
                sys.add_equation({{id * NO + j, Rational(1)}}, want.coeff(j));
        }
    }

    // enumerate equation strings over the full pools (units included)
    {
        std::vector<BasisKey> aa, bb;
        for (BasisKey m : mpool) {
            for (int tot = 0; tot <= W; ++tot)
                for (int k = 0; k <= tot; ++k) {
                    int l = tot - k;
                    std::function<void(int)> rec = [&](int i) {
                        if (i == k + l) {
                            process_string(aa, m, bb);
                            return;
                        }
                        if (i < k)
                            for (BasisKey x : apool) { aa.push_back(x); rec(i + 1); aa.pop_back(); }
                        else
                            for (BasisKey x : bpool) { bb.push_back(x); rec(i + 1); bb.pop_back(); }
                    };
                    aa.clear();
                    bb.clear();
                    rec(0);
                }
        }
    }

    auto sol = sys.solve(static_cast<int>(unknowns.size()) * NO);
    if (!sol) {
        if (err) *err = leaked ? "inconsistent (window leakage)" : "inconsistent";
        return nullptr;
    }

    auto stored = std::make_shared<StoredTaylor>();
    for (size_t u = 0; u < unknowns.size(); ++u) {
        auto& [uk, ul, uslots, utkey] = unknowns[u];
        Scalar c(order);
        bool nz = false;
        for (int j = 0; j <= order; ++j) {
            c.coeff(j) = (*sol)[u * static_cast<size_t>(NO) + static_cast<size_t>(j)];
            nz |= sgn(c.coeff(j)) != 0;
        }
        if (!nz) continue;
        auto key = std::make_pair(std::make_pair(uk, ul), uslots);
        auto it = stored->entries.find(key);
        if (it == stored->entries.end())
            it = stored->entries.emplace(key, Element(Ns.get(), order)).first;
        EvalCtx ctx;
        it->second.add_term(utkey, c, ctx);
    }

    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::bimodule;
    F->bim_src = src;
    F->bim_tgt = tgt;
    F->order = order;
    F->max_k = W;
    F->max_l = W;
    SpacePtr ns = Ns;
    F->bim_taylor = [stored, ns, order](KeySpan aa, BasisKey m, KeySpan bb, EvalCtx&) {
        std::vector<BasisKey> slots(aa.begin(), aa.end());
        slots.insert(slots.end(), bb.begin(), bb.end());
        slots.push_back(m);
        auto it = stored->entries.find(
            {{static_cast<int>(aa.size()), static_cast<int>(bb.size())}, slots});
        if (it == stored->entries.end()) return Element(ns.get(), order);
        return it->second;
    };
    return F;
}

}  // namespace

MoritaData build_morita_unit(AlgPtr A, AlgPtr B, BimodPtr K, const Window& win, int W,
                             Side side) {
    MoritaData out;
    out.side = side;
    int order = K->order;
    BasisKey kgen{{0, 0}, 0};
    if (side == Side::right) {
        out.end = end_algebra(K, Side::right, win);
        out.end_bim = end_bimodule(out.end, win);
        out.dual = dual_right(K, win);
        out.tensor = tensor_bimodules(K, out.dual.bim, win);
        out.endd = endd_bar(K, Side::right, win, W + win.intd_max + 1);
        out.endd_bim = endd_bimodule(out.endd, K, win);
        out.G_map = iso_G(out.tensor, out.dual, out.endd, out.endd_bim);
        out.H_map = homotopy_H_map(out.endd, out.endd_bim, out.end_bim);
        out.Psi = compose_morphisms(out.H_map, out.G_map);
        out.action_alg = derived_action_left(A, K, out.end);
        // seed t = (k; (); phi_{(),1_B}) with Psi(t) = identity of End
        BasisKey phikey = out.dual.key_of.at({std::vector<BasisKey>{}, *B->unit});
        TensorWord tw{kgen, {}, phikey};
        EvalCtx ctx;
        out.unit_image = out.tensor.carrier->embed(tw, Scalar::one(order), order, ctx);
        std::string err;
        out.unit = solve_seeded_morphism(as_bimodule(A), out.tensor.bim, out.unit_image, W, win,
                                         &err);
        if (!out.unit) throw structural_error("morita unit solve failed: " + err);
    } else {
        out.end = end_algebra(K, Side::left, win);
        out.dual = dual_left(K, win);
        // counit target: K^ (x)_A K
        out.tensor = tensor_bimodules(out.dual.bim, K, win);
        out.endd = endd_bar(K, Side::left, win, W + win.intd_max + 1);
        out.endd_bim = endd_bimodule(out.endd, K, win);
        out.G_map = iso_G(out.tensor, out.dual, out.endd, out.endd_bim);
        out.action_alg = derived_action_right(opposite_algebra(B), K, out.end);
        // seed t' = (phi_{(),1_A}; (); k), phi(1(x)1) = 1
        BasisKey phikey = out.dual.key_of.at({std::vector<BasisKey>{}, *A->unit});
        TensorWord tw{phikey, {}, kgen};
        EvalCtx ctx;
        out.unit_image = out.tensor.carrier->embed(tw, Scalar::one(order), order, ctx);
        std::string err;
        out.unit = solve_seeded_morphism(as_bimodule(B), out.tensor.bim, out.unit_image, W, win,
                                         &err);
        if (!out.unit) throw structural_error("morita counit solve failed: " + err);
    }
    return out;
}

CheckReport verify_square(MorPtr f, MorPtr left, MorPtr right, MorPtr bottom, int W,
                          const Window& win) {
    auto top_then_right = compose_morphisms(right, f);
    auto left_then_bottom = compose_morphisms(bottom, left);
    CheckReport rep = check_morphisms_equal(*top_then_right, *left_then_bottom, W, win);
    rep.suite = "verify_square";
    return rep;
}

MorPtr appendix_phi(ModPtr X, const TensorModule& XT, const Element& t, bool sign_flip) {
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::module;
    F->mod_src = X;
    F->mod_tgt = XT.mod;
    F->order = X->order;
    CarrierPtr car = XT.carrier;
    int order = X->order;
    bool flip = sign_flip;
    F->mod_taylor = [car, order, t, flip](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element out(car->space.get(), order);
        for (const auto& [tk, tc] : t.terms()) {
            TensorWord tw{m, {a.begin(), a.end()}, tk};
            Scalar c = tc;
            if (flip && !a.empty()) c = -c;
            out.add(car->embed(tw, c, order, ctx), ctx);
        }
        return out;
    };
    return F;
}

MorPtr boundary_of_homotopy(MorPtr H) {
    if (H->kind != MorKind::module || H->coh_shift != -1)
        throw structural_error("boundary_of_homotopy: need a module homotopy");
    auto F = std::make_shared<AMorphism>();
    F->kind = MorKind::module;
    F->mod_src = H->mod_src;
    F->mod_tgt = H->mod_tgt;
    F->order = H->order;
    MorPtr h = H;
    F->mod_taylor = [h](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        const Module& M = *h->mod_src;
        const Module& N = *h->mod_tgt;
        const Algebra& A = *M.alg;
        Element acc(N.space.get(), N.order);
        size_t k = a.size();
        // H o d_M
        for (size_t s1 = 0; s1 <= k; ++s1) {
            if (static_cast<int>(s1) > A.max_arity) break;
            if (s1 == 0 && !A.has_curvature) continue;
            for (size_t j = 0; j + s1 <= k; ++j) {
                Element inner = A.d(a.subspan(j, s1), ctx);
                if (inner.is_zero()) continue;
                int par = susp_parity(a.first(j));
                if (M.side == Side::right) par = (par + parity_of(m.deg.coh - 1)) % 2;
                for (const auto& [key, c] : inner.terms()) {
                    std::vector<BasisKey> buf(a.begin(), a.begin() + static_cast<long>(j));
                    buf.push_back(key);
                    buf.insert(buf.end(), a.begin() + static_cast<long>(j + s1), a.end());
                    Element v = h->t(buf, m, ctx);
                    if (v.is_zero()) continue;
                    Scalar cc = c;
                    if (par) cc = -cc;
                    for (const auto& [vk, vc] : v.terms()) acc.add_term(vk, cc * vc, ctx);
                }
            }
        }
        for (size_t s = 0; s <= k; ++s) {
            KeySpan block = (M.side == Side::left) ? a.last(s) : a.first(s);
            KeySpan rest = (M.side == Side::left) ? a.first(k - s) : a.last(k - s);
            Element inner = M.d(block, m, ctx);
            if (!inner.is_zero()) {
                int par = (M.side == Side::left) ? susp_parity(rest) : 0;
                for (const auto& [mk, c] : inner.terms()) {
                    Element v = h->t(rest, mk, ctx);
                    Scalar cc = c;
                    if (par) cc = -cc;
                    for (const auto& [vk, vc] : v.terms()) acc.add_term(vk, cc * vc, ctx);
                }
            }
            // d_N o H
            Element hv = h->t(block, m, ctx);
            if (!hv.is_zero()) {
                int par = (M.side == Side::left) ? susp_parity(rest) : 0;
                for (const auto& [mk, c] : hv.terms()) {
                    Element v = N.d(rest, mk, ctx);
                    Scalar cc = c;
                    if (par) cc = -cc;
                    for (const auto& [vk, vc] : v.terms()) acc.add_term(vk, cc * vc, ctx);
                }
            }
        }
        return acc;
    };
    return F;
}

MorPtr sample_square_morphism(ModPtr X, ModPtr Y, int n, const Window& win) {
    int order = X->order;
    if (n == 0) {
        // strict: right multiplication by a fixed monomial whose degree
        // matches the bidegree offset between X and Y
        auto F = std::make_shared<AMorphism>();
        F->kind = MorKind::module;
        F->mod_src = X;
        F->mod_tgt = Y;
        F->order = order;
        F->max_k = 0;
        ModPtr Xc = X, Yc = Y;
        F->mod_taylor = [Xc, Yc, order](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
            Element out(Yc->space.get(), order);
            if (!a.empty()) return out;
            // the identity-shaped map: X and Y share the underlying algebra
            // carrier up to shifts; pair by label
            const std::string& lbl = Xc->space->label(m.deg, m.idx);
            for (const auto& d : Yc->space->support()) {
                auto idx = Yc->space->index_of(d, lbl);
                if (idx && d.intd == m.deg.intd + (d.coh - m.deg.coh == 0 ? 0 : 0)) {
                    // same label at the shifted bidegree
                    out.add_term({d, *idx}, Scalar::one(order), ctx);
                    break;
                }
            }
            return out;
        };
        return F;
    }
    // n >= 1: coboundary of a sparse single-component degree -1 map
    auto H = std::make_shared<AMorphism>();
    H->kind = MorKind::module;
    H->coh_shift = -1;
    H->mod_src = X;
    H->mod_tgt = Y;
    H->order = order;
    ModPtr Xc = X, Yc = Y;
    int comps = n - 1;
    H->mod_taylor = [Xc, Yc, order, comps, win](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element out(Yc->space.get(), order);
        if (static_cast<int>(a.size()) != comps) return out;
        for (const auto& x : a)
            if (x.deg == Bidegree{0, 0}) return out;  // strictly unital
        // a fixed sparse choice: value = basis element of Y at the target
        // bidegree, when present
        int C = m.deg.coh - 1, I = m.deg.intd;
        for (const auto& x : a) {
            C += x.deg.coh - 1;
            I += x.deg.intd;
        }
        Bidegree vd{C + 1, I};
        if (Yc->space->dim(vd) == 0) return out;
        out.add_term({vd, 0}, Scalar::one(order), ctx);
        return out;
    };
    return boundary_of_homotopy(H);
}

}  // namespace akb
