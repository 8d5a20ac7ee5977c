#include "akb/triangles.hpp"

#include <algorithm>
#include <cassert>

namespace akb {
namespace {

int parity_of(int x) { return ((x % 2) + 2) % 2; }

int susp_parity(KeySpan keys) {
    int s = 0;
    for (const auto& k : keys) s += k.deg.coh - 1;
    return parity_of(s);
}

SpacePtr sum_space(const std::vector<std::pair<std::string, SpacePtr>>& parts,
                   const std::vector<int>& shifts, bool truncated) {
    auto sp = std::make_shared<BigradedSpace>();
    sp->truncated_beyond = truncated;
    for (size_t p = 0; p < parts.size(); ++p) {
        for (const auto& [d, labels] : parts[p].second->basis()) {
            Bidegree nd{d.coh - shifts[p], d.intd};
            for (const auto& l : labels) sp->add_basis(nd, parts[p].first + l);
        }
    }
    return sp;
}

}  // namespace

ConeData cone(MorPtr f) {
    if (f->kind != MorKind::module || f->coh_shift != 0)
        throw structural_error("cone: need a (0,0) module morphism");
    ModPtr M = f->mod_src, N = f->mod_tgt;
    if (M->side != N->side) throw structural_error("cone: side mismatch");
    int order = M->order;
    // carrier: M[1] block first, then N
    auto sp = sum_space({{"sM:", M->space}, {"N:", N->space}}, {1, 0},
                        M->space->truncated_beyond || N->space->truncated_beyond);
    auto moff = [Ms = M->space](Bidegree d) { return Ms->dim({d.coh + 1, d.intd}); };
    auto embed = [moff](int part, BasisKey k) -> BasisKey {
        if (part == 0) return {{k.deg.coh - 1, k.deg.intd}, k.idx};  // M key -> shifted slot
        return {k.deg, k.idx + moff(k.deg)};
    };
    auto split = [moff](BasisKey k) -> std::pair<int, BasisKey> {
        int off = moff(k.deg);
        if (k.idx < off) return {0, {{k.deg.coh + 1, k.deg.intd}, k.idx}};  // M key
        return {1, {k.deg, k.idx - off}};
    };

    auto total = std::make_shared<Module>();
    total->side = M->side;
    total->alg = M->alg;
    total->space = sp;
    total->max_arity = std::max({M->max_arity, N->max_arity, f->max_k});
    total->order = order;
    if (M->slot_weight || N->slot_weight) {
        auto mw = M->slot_weight, nw = N->slot_weight;
        total->slot_weight = [split, mw, nw](BasisKey k) {
            auto [part, inner] = split(k);
            if (part == 0) return mw ? mw(inner) : 0;
            return nw ? nw(inner) : 0;
        };
    }
    ModPtr Mc = M, Nc = N;
    MorPtr fc = f;
    SpacePtr spc = sp;
    Side side = M->side;
    total->taylor = [Mc, Nc, fc, spc, embed, split, order, side](KeySpan a, BasisKey m,
                                                                 EvalCtx& ctx) -> Element {
        Element out(spc.get(), order);
        auto [part, inner] = split(m);
        if (part == 0) {
            // -d_M (the shift sign; right modules have no prefix) + f into N
            Element v = Mc->d(a, inner, ctx);
            int par = 1;
            if (side == Side::left) par = (1 + susp_parity(a)) % 2;
            for (const auto& [k, c] : v.terms())
                out.add_term(embed(0, k), par ? -c : c, ctx);
            Element w = fc->t(a, inner, ctx);
            // moving f (degree 0) out of the suspended slot: no extra sign
            for (const auto& [k, c] : w.terms()) out.add_term(embed(1, k), c, ctx);
        } else {
            Element v = Nc->d(a, inner, ctx);
            for (const auto& [k, c] : v.terms()) out.add_term(embed(1, k), c, ctx);
        }
        return out;
    };

    ConeData out;
    out.total = total;
    out.space = sp;
    out.f = f;
    out.embed = embed;
    out.split = split;

    auto incl = std::make_shared<AMorphism>();
    incl->kind = MorKind::module;
    incl->mod_src = N;
    incl->mod_tgt = total;
    incl->order = order;
    incl->max_k = 0;
    incl->mod_taylor = [spc, embed, order](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element out(spc.get(), order);
        if (!a.empty()) return out;
        out.add_term(embed(1, m), Scalar::one(order), ctx);
        return out;
    };
    out.incl_N = incl;

    auto m1 = shift_structure(M, 1);
    auto proj = std::make_shared<AMorphism>();
    proj->kind = MorKind::module;
    proj->mod_src = total;
    proj->mod_tgt = m1;
    proj->order = order;
    proj->max_k = 0;
    SpacePtr m1sp = m1->space;
    proj->mod_taylor = [m1sp, split, order](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element out(m1sp.get(), order);
        if (!a.empty()) return out;
        auto [part, inner] = split(m);
        if (part != 0) return out;
        out.add_term({{inner.deg.coh - 1, inner.deg.intd}, inner.idx}, Scalar::one(order), ctx);
        return out;
    };
    out.proj_M1 = proj;
    return out;
}

CylinderData cylinder(MorPtr f, const ConeData& cf) {
    ModPtr M = f->mod_src, N = f->mod_tgt;
    int order = M->order;
    auto sp = sum_space({{"M:", M->space}, {"sM:", M->space}, {"N:", N->space}}, {0, 1, 0},
                        M->space->truncated_beyond || N->space->truncated_beyond);
    auto d0 = [Ms = M->space](Bidegree d) { return Ms->dim(d); };
    auto d1 = [Ms = M->space](Bidegree d) { return Ms->dim({d.coh + 1, d.intd}); };
    auto embed = [d0, d1](int part, BasisKey k) -> BasisKey {
        if (part == 0) return k;
        if (part == 1) return {{k.deg.coh - 1, k.deg.intd}, k.idx + d0({k.deg.coh - 1, k.deg.intd})};
        return {k.deg, k.idx + d0(k.deg) + d1(k.deg)};
    };
    auto split = [d0, d1](BasisKey k) -> std::pair<int, BasisKey> {
        int o0 = d0(k.deg), o1 = d1(k.deg);
        if (k.idx < o0) return {0, k};
        if (k.idx < o0 + o1) return {1, {{k.deg.coh + 1, k.deg.intd}, k.idx - o0}};
        return {2, {k.deg, k.idx - o0 - o1}};
    };

    auto total = std::make_shared<Module>();
    total->side = M->side;
    total->alg = M->alg;
    total->space = sp;
    total->max_arity = std::max({M->max_arity, N->max_arity, f->max_k});
    total->order = order;
    ModPtr Mc = M, Nc = N;
    MorPtr fc = f;
    SpacePtr spc = sp;
    Side side = M->side;
    total->taylor = [Mc, Nc, fc, spc, embed, split, order, side](KeySpan a, BasisKey m,
                                                                 EvalCtx& ctx) -> Element {
        Element out(spc.get(), order);
        auto [part, inner] = split(m);
        if (part == 0) {
            Element v = Mc->d(a, inner, ctx);
            for (const auto& [k, c] : v.terms()) out.add_term(embed(0, k), c, ctx);
        } else if (part == 1) {
            // -d_M on the shifted copy, the -i entry into M, f into N
            Element v = Mc->d(a, inner, ctx);
            int par = 1;
            if (side == Side::left) par = (1 + susp_parity(a)) % 2;
            for (const auto& [k, c] : v.terms())
                out.add_term(embed(1, k), par ? -c : c, ctx);
            if (a.empty())  // -i o s^{-1}: arity 0 only
                out.add_term(embed(0, inner), -Scalar::one(order), ctx);
            Element w = fc->t(a, inner, ctx);
            for (const auto& [k, c] : w.terms()) out.add_term(embed(2, k), c, ctx);
        } else {
            Element v = Nc->d(a, inner, ctx);
            for (const auto& [k, c] : v.terms()) out.add_term(embed(2, k), c, ctx);
        }
        return out;
    };

    CylinderData out;
    out.total = total;
    out.space = sp;
    out.f = f;
    out.embed = embed;
    out.split = split;

    auto incl = std::make_shared<AMorphism>();
    incl->kind = MorKind::module;
    incl->mod_src = M;
    incl->mod_tgt = total;
    incl->order = order;
    incl->max_k = 0;
    incl->mod_taylor = [spc, embed, order](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element out(spc.get(), order);
        if (!a.empty()) return out;
        out.add_term(embed(0, m), Scalar::one(order), ctx);
        return out;
    };
    out.incl_M = incl;

    auto proj = std::make_shared<AMorphism>();
    proj->kind = MorKind::module;
    proj->mod_src = total;
    proj->mod_tgt = cf.total;
    proj->order = order;
    proj->max_k = 0;
    auto cemb = cf.embed;
    SpacePtr csp = cf.space;
    proj->mod_taylor = [csp, cemb, split, order](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element out(csp.get(), order);
        if (!a.empty()) return out;
        auto [part, inner] = split(m);
        if (part == 1) out.add_term(cemb(0, inner), Scalar::one(order), ctx);
        else if (part == 2) out.add_term(cemb(1, inner), Scalar::one(order), ctx);
        return out;
    };
    out.proj_C = proj;

    auto rho = std::make_shared<AMorphism>();
    rho->kind = MorKind::module;
    rho->mod_src = total;
    rho->mod_tgt = M;
    rho->order = order;
    rho->max_k = 0;
    SpacePtr msp = M->space;
    rho->mod_taylor = [msp, split, order](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element out(msp.get(), order);
        if (!a.empty()) return out;
        auto [part, inner] = split(m);
        if (part == 0) out.add_term(inner, Scalar::one(order), ctx);
        return out;
    };
    out.rho = rho;
    return out;
}

MorPtr contraction_of_identity_cone(const ConeData& c) {
    // H(sx (+) x') = (sx', 0)
    auto H = std::make_shared<AMorphism>();
    H->kind = MorKind::module;
    H->coh_shift = -1;
    H->mod_src = c.total;
    H->mod_tgt = c.total;
    H->order = c.total->order;
    H->max_k = 0;
    auto split = c.split;
    auto embed = c.embed;
    SpacePtr spc = c.space;
    int order = c.total->order;
    H->mod_taylor = [spc, split, embed, order](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element out(spc.get(), order);
        if (!a.empty()) return out;
        auto [part, inner] = split(m);
        if (part == 1) out.add_term(embed(0, inner), Scalar::one(order), ctx);
        return out;
    };
    return H;
}

RotationWitnesses rotation_witnesses(MorPtr u, int W, const Window& win) {
    RotationWitnesses out;
    out.cu = cone(u);
    out.cv = cone(out.cu.incl_N);  // v : Y -> C(u)
    ModPtr X = u->mod_src;
    out.X1 = shift_structure(X, 1);
    int order = X->order;

    // theta: X[1] -> C(v) = Y[1] (+) C(u);  theta(sx) = (-s u0(sx), sx, 0)
    auto theta = std::make_shared<AMorphism>();
    theta->kind = MorKind::module;
    theta->mod_src = out.X1;
    theta->mod_tgt = out.cv.total;
    theta->order = order;
    MorPtr uc = u;
    auto cvemb = out.cv.embed;
    auto cuemb = out.cu.embed;
    SpacePtr cvsp = out.cv.space;
    theta->mod_taylor = [uc, cvemb, cuemb, cvsp, order](KeySpan a, BasisKey m,
                                                        EvalCtx& ctx) -> Element {
        Element outv(cvsp.get(), order);
        BasisKey x{{m.deg.coh + 1, m.deg.intd}, m.idx};  // X key
        Element uv = uc->t(a, x, ctx);
        for (const auto& [k, c] : uv.terms()) outv.add_term(cvemb(0, k), -c, ctx);
        if (a.empty()) outv.add_term(cvemb(1, cuemb(0, x)), Scalar::one(order), ctx);
        return outv;
    };
    out.theta = theta;

    // psi: C(v) -> X[1], psi(sy, sx, y') = sx, strict
    auto psi = std::make_shared<AMorphism>();
    psi->kind = MorKind::module;
    psi->mod_src = out.cv.total;
    psi->mod_tgt = out.X1;
    psi->order = order;
    psi->max_k = 0;
    auto cvsplit = out.cv.split;
    auto cusplit = out.cu.split;
    SpacePtr x1sp = out.X1->space;
    psi->mod_taylor = [cvsplit, cusplit, x1sp, order](KeySpan a, BasisKey m,
                                                      EvalCtx& ctx) -> Element {
        Element outv(x1sp.get(), order);
        if (!a.empty()) return outv;
        auto [p1, inner] = cvsplit(m);
        if (p1 != 1) return outv;
        auto [p2, xkey] = cusplit(inner);
        if (p2 != 0) return outv;
        outv.add_term({{xkey.deg.coh - 1, xkey.deg.intd}, xkey.idx}, Scalar::one(order), ctx);
        return outv;
    };
    out.psi = psi;

    // H': C(v) -> C(v), H'(sy, sx, y') = (y', 0, 0) i.e. N-part to Y[1]-slot
    auto Hp = std::make_shared<AMorphism>();
    Hp->kind = MorKind::module;
    Hp->coh_shift = -1;
    Hp->mod_src = out.cv.total;
    Hp->mod_tgt = out.cv.total;
    Hp->order = order;
    Hp->max_k = 0;
    Hp->mod_taylor = [cvsplit, cusplit, cvemb, cvsp, order](KeySpan a, BasisKey m,
                                                            EvalCtx& ctx) -> Element {
        Element outv(cvsp.get(), order);
        if (!a.empty()) return outv;
        auto [p1, inner] = cvsplit(m);
        if (p1 != 1) return outv;
        auto [p2, ykey] = cusplit(inner);
        if (p2 != 1) return outv;
        outv.add_term(cvemb(0, ykey), Scalar::one(order), ctx);
        return outv;
    };
    out.Hprime = Hp;

    // s: C(u) -> C(v), inclusion (sx, y) -> (0, sx, y), strict
    auto incl = std::make_shared<AMorphism>();
    incl->kind = MorKind::module;
    incl->mod_src = out.cu.total;
    incl->mod_tgt = out.cv.total;
    incl->order = order;
    incl->max_k = 0;
    incl->mod_taylor = [cvemb, cvsp, order](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element outv(cvsp.get(), order);
        if (!a.empty()) return outv;
        outv.add_term(cvemb(1, m), Scalar::one(order), ctx);
        return outv;
    };
    out.incl_s = incl;

    // p: C(u) -> X[1], projection
    out.proj_p = out.cu.proj_M1;

    // H: C(u) -> C(v), H(sx, y) = (y, 0, 0)
    auto H = std::make_shared<AMorphism>();
    H->kind = MorKind::module;
    H->coh_shift = -1;
    H->mod_src = out.cu.total;
    H->mod_tgt = out.cv.total;
    H->order = order;
    H->max_k = 0;
    H->mod_taylor = [cusplit, cvemb, cvsp, order](KeySpan a, BasisKey m, EvalCtx& ctx) -> Element {
        Element outv(cvsp.get(), order);
        if (!a.empty()) return outv;
        auto [p, inner] = cusplit(m);
        if (p == 1) outv.add_term(cvemb(0, inner), Scalar::one(order), ctx);
        return outv;
    };
    out.H = H;

    auto pt = compose_morphisms(out.psi, out.theta);
    out.psi_theta_is_id = check_morphisms_equal(*pt, *identity_morphism(out.X1), W, win);
    auto tp = compose_morphisms(out.theta, out.psi);
    out.theta_psi_homotopic_id =
        check_homotopy(*tp, *identity_morphism(out.cv.total), *out.Hprime, W, win);
    auto theta_p = compose_morphisms(out.theta, out.proj_p);
    out.rotation_square = check_homotopy(*out.incl_s, *theta_p, *out.H, W, win);
    return out;
}

SemiSplitReport semisplit_check(const CylinderData& cyl, int W, const Window& win) {
    SemiSplitReport rep;
    auto rf = compose_morphisms(cyl.rho, cyl.incl_M);
    rep.rho_splits_f = check_morphisms_equal(*rf, *identity_morphism(cyl.f->mod_src), W, win);

    // rho commutes with arity >= 1 components; at arity 0 it does not (the
    // -i entry).  Scan directly.
    CheckReport& hr = rep.rho_commutes_higher;
    hr.suite = "rho_commutes_higher";
    EvalCtx ctx;
    const Module& tot = *cyl.total;
    const Module& M = *cyl.f->mod_src;
    std::vector<BasisKey> apool;
    for (const auto& [d, labels] : tot.alg->space->basis())
        if (win.contains(d))
            for (int i = 0; i < static_cast<int>(labels.size()); ++i) apool.push_back({d, i});
    bool diff_commutes = true;
    for (const auto& [d, labels] : tot.space->basis()) {
        if (!win.contains(d)) continue;
        for (int mi = 0; mi < static_cast<int>(labels.size()); ++mi) {
            BasisKey m{d, mi};
            // arity 0
            {
                Element lhs = cyl.rho->t({}, m, ctx);  // rho(m)
                Element l2(M.space.get(), M.order);
                Element dtot = tot.d({}, m, ctx);
                for (const auto& [k, c] : dtot.terms()) {
                    Element r = cyl.rho->t({}, k, ctx);
                    l2.add_scaled(r, c, ctx);
                }
                Element rd(M.space.get(), M.order);
                for (const auto& [k, c] : lhs.terms()) {
                    Element r = M.d({}, k, ctx);
                    rd.add_scaled(r, c, ctx);
                }
                if (!(l2 == rd)) diff_commutes = false;
            }
            // arity 1
            for (BasisKey a : apool) {
                std::vector<BasisKey> one{a};
                Element dtot = tot.d(one, m, ctx);
                Element lhs(M.space.get(), M.order);
                for (const auto& [k, c] : dtot.terms()) {
                    Element r = cyl.rho->t({}, k, ctx);
                    lhs.add_scaled(r, c, ctx);
                }
                Element rm = cyl.rho->t({}, m, ctx);
                Element rhs(M.space.get(), M.order);
                for (const auto& [k, c] : rm.terms()) {
                    Element r = M.d(one, k, ctx);
                    rhs.add_scaled(r, c, ctx);
                }
                hr.strings_checked++;
                if (!(lhs == rhs))
                    hr.record_failure({"rho arity-1 at " + tot.space->label(d, mi), d, -1,
                                       lhs.to_string(), rhs.to_string()});
            }
        }
    }
    rep.rho_commutes_differential = diff_commutes;
    (void)W;
    return rep;
}

CheckReport connecting_morphism_check(ModPtr M, ModPtr Msecond, MorPtr h, int W,
                                      const Window& win) {
    auto ds = direct_sum(M, Msecond, h);
    CheckReport rep = check_module(*ds.total, W, win);
    rep.suite = "connecting_morphism(d^2 = 0)";
    return rep;
}

}  // namespace akb
