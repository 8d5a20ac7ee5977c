#pragma once

#include "akb/ainfty.hpp"
#include "akb/homology.hpp"

namespace akb {

// ---- tensor products and bar constructions -------------------------------

// Basis word of K1 (x) T(B[1]) (x) K2.
struct TensorWord {
    BasisKey k1;
    std::vector<BasisKey> word;
    BasisKey k2;
    friend auto operator<=>(const TensorWord&, const TensorWord&) = default;
};

struct TensorCarrier {
    SpacePtr space;  // truncated to the window
    std::map<BasisKey, TensorWord> word_of;
    std::map<TensorWord, BasisKey> key_of;
    Element embed(const TensorWord& w, const Scalar& c, int order, EvalCtx& ctx) const;
};
using CarrierPtr = std::shared_ptr<const TensorCarrier>;

struct TensorBimodule {
    BimodPtr bim;  // A-C-bimodule on K1 (x) T(B[1]) (x) K2
    CarrierPtr carrier;
    BimodPtr K1, K2;
};

// K1 an A-B-bimodule, K2 a B-C-bimodule with the same middle algebra.
TensorBimodule tensor_bimodules(BimodPtr K1, BimodPtr K2, const Window& win);

// Right module M (x)_A K via the k-A-bimodule view of M.
struct TensorModule {
    ModPtr mod;  // right C-module
    CarrierPtr carrier;
};
TensorModule tensor_module_bimodule(ModPtr M, BimodPtr K, const Window& win);

// Strict associativity isomorphism (K1 (x)_B K2) (x)_C K3 -> K1 (x)_B (K2 (x)_C K3).
// T12 = K1 (x) K2, T1 = T12 (x) K3, T23 = K2 (x) K3, T2 = K1 (x) T23.
MorPtr assoc_iso(const TensorBimodule& T12, const TensorBimodule& T1,
                 const TensorBimodule& T23, const TensorBimodule& T2);

// Bar constructions of a bimodule M.
TensorBimodule bar_left(BimodPtr M, const Window& win);   // A (x)_A M
TensorBimodule bar_right(BimodPtr M, const Window& win);  // M (x)_B B

// mu: A (x)_A M -> M (or M (x)_B B -> M), the action collapse.
MorPtr mu_left(const TensorBimodule& bar);
MorPtr mu_right(const TensorBimodule& bar);

// Phi: M -> A (x)_A M (resp. M -> M (x)_B B), supported on augmented slots.
MorPtr phi_left(const TensorBimodule& bar);
MorPtr phi_right(const TensorBimodule& bar);

// H with Phi o mu = 1 + dH + Hd on the bar.
MorPtr bar_homotopy_left(const TensorBimodule& bar);
MorPtr bar_homotopy_right(const TensorBimodule& bar);

// Functor on morphisms: induced map X (x)_A K -> Y (x)_A K of a right-module
// morphism f : X -> Y (strict), and the left-factor version for bimodule
// morphisms g : X -> X'.
MorPtr tensor_morphism_right(MorPtr f, const TensorModule& srcT, const TensorModule& tgtT);
MorPtr tensor_morphism_left(MorPtr g, const TensorBimodule& srcT, const TensorBimodule& tgtT);

// ---- endomorphism objects -------------------------------------------------

// End_B(K) for the one-dimensional K: basis dual to B-words, product by
// concatenation, differential induced by d_K.  side = right gives
// End_B(K) (words act on the right of K); side = left gives End_A(K).
struct EndObject {
    Side side = Side::right;
    AlgPtr inner;  // the word algebra (B or A)
    BimodPtr K;    // the Koszul bimodule
    SpacePtr space;
    std::map<BasisKey, std::vector<BasisKey>> word_of;
    std::map<std::vector<BasisKey>, BasisKey> key_of;
    AlgPtr alg;   // A-infinity algebra structure
    int order = 0;
};
using EndPtr = std::shared_ptr<const EndObject>;

EndPtr end_algebra(BimodPtr K, Side side, const Window& win);

// Derived actions as algebra morphisms.
MorPtr derived_action_left(AlgPtr A, BimodPtr K, EndPtr endB);     // A -> End_B(K)
MorPtr derived_action_right(AlgPtr Bop, BimodPtr K, EndPtr endA);  // B^op -> End_A(K)

// End_B(K) as an A-A-bimodule (side=right) or End_A(K)^op as a B-B-bimodule
// (side=left), with the derived action as a bimodule morphism.
struct EndBimodule {
    BimodPtr bim;
    MorPtr action;  // as_bimodule(A) -> bim (resp. B side)
    EndPtr end;
};
EndBimodule end_bimodule(EndPtr end, const Window& win);

// ---- dual modules ---------------------------------------------------------

// Right derived dual K_ = Hom_B(B_B(K), B), a B-A-bimodule; basis (word, beta).
struct DualModule {
    BimodPtr bim;
    SpacePtr space;
    std::map<BasisKey, std::pair<std::vector<BasisKey>, BasisKey>> data_of;
    std::map<std::pair<std::vector<BasisKey>, BasisKey>, BasisKey> key_of;
};
DualModule dual_right(BimodPtr K, const Window& win);
// Left derived dual K^ = Hom_A(A (x)_A K, A), a B-A-bimodule; basis (word, alpha).
DualModule dual_left(BimodPtr K, const Window& win);

// ---- Endd objects and the comparison maps ---------------------------------

// Endd_B(B_B(K)): right-B-linear endomorphisms of the bar; basis
// (w_in, w_out, beta).  side = right.  side = left gives Endd_A(_AB(K))^op.
struct EnddObject {
    Side side = Side::right;
    BimodPtr bim;
    SpacePtr space;
    std::map<BasisKey, std::tuple<std::vector<BasisKey>, std::vector<BasisKey>, BasisKey>> data_of;
    std::map<std::tuple<std::vector<BasisKey>, std::vector<BasisKey>, BasisKey>, BasisKey> key_of;
};
EnddObject endd_bar(BimodPtr K, Side side, const Window& win, int max_weight);

// The Endd A-A-bimodule structure (resp. B-B on side=left).
BimodPtr endd_bimodule(const EnddObject& endd, BimodPtr K, const Window& win);

// G: K (x)_B K_ -> Endd_B(B_B(K)), strict isomorphism (and the mirror
// K^ (x)_A K -> Endd_A^op on side=left).
MorPtr iso_G(const TensorBimodule& KK, const DualModule& dual, const EnddObject& endd,
             BimodPtr endd_bim);

// H: Endd_B(B_B(K)) -> End_B(K), strict homotopy equivalence.
MorPtr homotopy_H_map(const EnddObject& endd, BimodPtr endd_bim, const EndBimodule& endbim);

// ---- Morita data -----------------------------------------------------------

struct MoritaData {
    // side = right: End_B(K), Endd_B, K_, K (x)_B K_, unit A -> K (x) K_
    // side = left (counit): End_A(K)^op, Endd_A^op, K^, K^ (x)_A K,
    // counit B -> K^ (x) K
    Side side = Side::right;
    EndPtr end;
    EndBimodule end_bim;
    DualModule dual;
    TensorBimodule tensor;       // K (x)_B K_  resp.  K^ (x)_A K
    EnddObject endd;
    BimodPtr endd_bim;
    MorPtr G_map;                // tensor -> Endd (strict iso)
    MorPtr H_map;                // Endd -> End-bimodule (strict)
    MorPtr Psi;                  // H o G
    MorPtr action_alg;           // L_A resp. R_B as algebra morphism
    MorPtr unit;                 // solved unit/counit morphism
    Element unit_image;          // unit(1), the Appendix-B element
};
// Builds one side of the Morita data and solves the unit morphism by
// imposing the morphism equations plus the seed unit(1) = t, the canonical
// degree-(0,0) cocycle with Psi(t) = identity.
MoritaData build_morita_unit(AlgPtr A, AlgPtr B, BimodPtr K, const Window& win, int W,
                             Side side);

// verify right o f = bottom o left on all strings <= W.
CheckReport verify_square(MorPtr f, MorPtr left, MorPtr right, MorPtr bottom, int W,
                          const Window& win);

// phi_X of Appendix B: X -> X (x)_A (K (x)_B K_), built from the unit image
// t = unit(1); components phi^{n'}(x|a_1..a_n') = (x, a_1..a_n', t).
// sign_flip mutates the component sign for the failure-witness test.
MorPtr appendix_phi(ModPtr X, const TensorModule& XT, const Element& t, bool sign_flip = false);

// single-component sample morphisms for the Appendix-B squares:
// n = 0: right multiplication by a monomial; n >= 1: the coboundary of a
// single-component degree -1 map (nonzero, strictly unital by construction)
MorPtr sample_square_morphism(ModPtr X, ModPtr Y, int n, const Window& win);

// boundary d_Y H + H d_X of a degree -1 comodule map: always a morphism
MorPtr boundary_of_homotopy(MorPtr H);

}  // namespace akb
