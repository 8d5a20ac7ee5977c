#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>

#include "akb/bigraded.hpp"
#include "akb/report.hpp"

namespace akb {

// All Taylor components act on suspended slots and land in the suspended
// carrier; Koszul signs use coh(label) - 1 per slot.  Components of a
// codifferential have bidegree (1,0), morphisms (0,0), homotopies (-1,0).

using KeySpan = std::span<const BasisKey>;
using AlgTaylorFn = std::function<Element(KeySpan, EvalCtx&)>;
using ModTaylorFn = std::function<Element(KeySpan, BasisKey, EvalCtx&)>;
using BimodTaylorFn = std::function<Element(KeySpan, BasisKey, KeySpan, EvalCtx&)>;

struct Algebra {
    SpacePtr space;
    std::optional<BasisKey> unit;
    std::function<Scalar(BasisKey)> augmentation;  // null when not augmented
    int max_arity = 2;
    bool has_curvature = false;
    int order = 0;
    AlgTaylorFn taylor;

    Element d(KeySpan a, EvalCtx& ctx) const;
    Element zero() const { return Element(space.get(), order); }
};
using AlgPtr = std::shared_ptr<const Algebra>;

enum class Side { left, right };

// One-sided module; `a` in taylor is always the algebra block in its
// natural order, the side says whether it sits before or after the slot.
struct Module {
    Side side = Side::right;
    AlgPtr alg;
    SpacePtr space;
    int max_arity = 1;
    int order = 0;
    ModTaylorFn taylor;
    // bar-word weight carried by a basis element of the carrier; the
    // checkers bound k+l+weight(m) by W
    std::function<int(BasisKey)> slot_weight;

    Element d(KeySpan a, BasisKey m, EvalCtx& ctx) const;
    Element zero() const { return Element(space.get(), order); }
};
using ModPtr = std::shared_ptr<const Module>;

struct Bimodule {
    AlgPtr left, right;
    SpacePtr space;
    int max_k = 1, max_l = 1;
    int order = 0;
    BimodTaylorFn taylor;
    std::function<bool(int, int)> supports;  // optional structural-zero pruning
    std::function<int(BasisKey)> slot_weight;  // see Module::slot_weight

    Element d(KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) const;
    Element zero() const { return Element(space.get(), order); }
};
using BimodPtr = std::shared_ptr<const Bimodule>;

enum class MorKind { algebra, module, bimodule };

// Morphism (coh_shift 0) or homotopy (coh_shift -1) between structures of
// matching kind.  Exactly the members for its kind are populated.
struct AMorphism {
    MorKind kind = MorKind::bimodule;
    int coh_shift = 0;

    AlgPtr alg_src, alg_tgt;
    ModPtr mod_src, mod_tgt;
    BimodPtr bim_src, bim_tgt;

    AlgTaylorFn alg_taylor;
    ModTaylorFn mod_taylor;
    BimodTaylorFn bim_taylor;

    int max_k = 1 << 20, max_l = 1 << 20;
    int order = 0;

    Element t(KeySpan a, EvalCtx& ctx) const;                        // algebra kind
    Element t(KeySpan a, BasisKey m, EvalCtx& ctx) const;            // module kind
    Element t(KeySpan a, BasisKey m, KeySpan b, EvalCtx& ctx) const; // bimodule kind
};
using MorPtr = std::shared_ptr<const AMorphism>;

// ---- stored (sparse) Taylor data, used by solvers -----------------------

struct StoredTaylor {
    // key: concatenated slot keys; for bimodules (k,l) is part of the key
    std::map<std::pair<std::pair<int, int>, std::vector<BasisKey>>, Element> entries;
    void set(int k, int l, std::vector<BasisKey> slots, Element v);
    const Element* get(int k, int l, KeySpan slots) const;
};

// ---- relation checkers --------------------------------------------------

// Verifies the A-infinity relation on every basis string of word length <= W
// with slots inside `win`.  Strings whose evaluation leaves a truncated
// space are counted as edge and excluded from pass/fail.
CheckReport check_algebra(const Algebra& A, int W, const Window& win);
CheckReport check_module(const Module& M, int W, const Window& win);
CheckReport check_bimodule(const Bimodule& M, int W, const Window& win);

CheckReport check_morphism(const AMorphism& F, int W, const Window& win);
CheckReport check_homotopy(const AMorphism& f, const AMorphism& g, const AMorphism& H,
                           int W, const Window& win);
CheckReport check_strict_unitality(const Algebra& A, int W, const Window& win);
CheckReport check_strict_unitality(const Bimodule& M, int W, const Window& win);
// componentwise equality of two morphisms on all strings <= W
CheckReport check_morphisms_equal(const AMorphism& f, const AMorphism& g, int W,
                                  const Window& win);
// every Taylor component preserves the internal grading (scan assertion)
CheckReport check_internal_grading(const Bimodule& M, int W, const Window& win);

// ---- basic operations ---------------------------------------------------

// Strict identity morphism.
MorPtr identity_morphism(BimodPtr M);
MorPtr identity_morphism(ModPtr M);
MorPtr identity_morphism_alg(AlgPtr A);
MorPtr zero_morphism(BimodPtr src, BimodPtr tgt, int coh_shift = 0);
MorPtr zero_morphism(ModPtr src, ModPtr tgt, int coh_shift = 0);

// m2_op(a,b) = (-1)^{|a||b|} m2(b,a); only flat associative inputs.
AlgPtr opposite_algebra(AlgPtr B);

// d^{k,0} (left) or d^{0,l} (right); refuses curvature on the dropped side.
ModPtr restrict_bimodule(BimodPtr M, Side side);

// Canonical A-A-bimodule structure d^{k,l} := d^{k+l+1} on the algebra.
BimodPtr as_bimodule(AlgPtr A);

// View a one-sided module as a bimodule over the trivial ground algebra.
AlgPtr ground_algebra(int order);
BimodPtr promote_module(ModPtr M);
ModPtr demote_bimodule(BimodPtr M, Side keep);  // inverse of promote on that side

// Cohomological shift M[n] (with <j> internal twist); modules/bimodules.
ModPtr shift_structure(ModPtr M, int n, int j = 0);
BimodPtr shift_structure(BimodPtr M, int n, int j = 0);

// G after F; compatible kinds/shifts (shift adds).
MorPtr compose_morphisms(MorPtr G, MorPtr F);
MorPtr add_morphisms(MorPtr F, MorPtr G, int sign = 1);  // F + sign*G

// M (+) M'' with connecting map h : M'' -> M[1]; d squares to zero iff h is
// a morphism.  Returns the summed module and injections/projections.
struct DirectSum {
    ModPtr total;
    SpacePtr space;
    // part 0 = M, part 1 = M''; labels tagged
    std::function<BasisKey(int part, BasisKey)> embed;
    std::function<std::pair<int, BasisKey>(BasisKey)> split;
};
DirectSum direct_sum(ModPtr M, ModPtr Msecond, MorPtr h);

}  // namespace akb
