#pragma once

#include <set>

#include "akb/ainfty.hpp"

namespace akb {

// A bigraded complex: the carrier together with its (1,0) differential at
// the label level (the arity-(0)/(0,0) Taylor component of a flat
// structure).  Signs are irrelevant for every rank computed from it.
struct Complex {
    SpacePtr space;
    int order = 0;
    std::function<Element(BasisKey, EvalCtx&)> d;
};

Complex complex_of(BimodPtr M);
Complex complex_of(ModPtr M);
Complex complex_of_algebra(AlgPtr A);  // flat algebra; differential is d^1

// Exact cohomology dimensions over the Q-expansion of R_N.  A bidegree is
// interior when both its incoming and outgoing differentials stay inside
// the window; boundary bidegrees are listed in `edge` and excluded from
// pass/fail decisions.
struct CohomologyTable {
    std::map<Bidegree, int> dims;  // interior bidegrees only
    std::set<Bidegree> edge;
    Window window{};
    bool zero_everywhere() const;
    int dim_at(Bidegree d) const;
    std::string to_csv() const;
};

CohomologyTable cohomology_dims(const Complex& C, const Window& win);

// Mapping cone M[1] (+) N of a degree-(0,0) chain map given by its action
// on basis labels.
Complex cone_complex(const Complex& M, const Complex& N,
                     const std::function<Element(BasisKey, EvalCtx&)>& f0);

Complex cone_of_morphism(const AMorphism& F);  // uses the first Taylor component

// Acyclicity of the mapping cone of F on the window.
CheckReport cone_acyclic(const AMorphism& F, const Window& win);

// Independent route: F's first Taylor component induces bidegree-wise
// isomorphisms on cohomology (exact rank computation on ker/im matrices).
CheckReport is_quasi_iso(const AMorphism& F, const Window& win);

// Euler characteristic per internal degree (interior part of the window),
// from a table of space dimensions and from cohomology: must agree.
std::map<int, long> euler_per_internal(const Complex& C, const Window& win, bool* ok);

// Solves f - g = dH + Hd for a homotopy H with components on tuples of
// word length <= W inside the window.  Returns nullptr when the finite
// linear system is inconsistent (NONE); rep, when given, records whether
// window leakage made NONE inconclusive.
MorPtr solve_homotopy(const AMorphism& f, const AMorphism& g, int W, const Window& win,
                      CheckReport* rep = nullptr);

}  // namespace akb
