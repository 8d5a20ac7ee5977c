#pragma once

#include "akb/ainfty.hpp"
#include "akb/homology.hpp"

namespace akb {

// A = S(X*) with A_i = A^0_i (monomials up to the given internal degree;
// truncated beyond), strictly unital and augmented.
AlgPtr make_symmetric(int dim, int max_internal_degree, int order);

// B = /\(X) with B^i = B^i_{-i}; complete, strictly unital, augmented.
AlgPtr make_exterior(int dim, int order);

// Exponent/subset views of the generator data, used by constructions that
// need the pairing between A- and B-generators.
std::vector<int> symmetric_exponents(const Algebra& A, BasisKey k);
unsigned exterior_mask(const Algebra& B, BasisKey k);

struct KoszulSolveInfo {
    bool success = true;
    std::string obstruction;          // first inconsistent equation, on failure
    std::map<int, int> gauge_dim;     // per weight: free parameters in the solve
    std::map<int, int> unknown_count; // per weight
    std::vector<std::pair<std::string, Rational>> coefficients;  // solved entries
};

// Reconstructs the one-dimensional strictly unital A-B-bimodule K by
// solving the A-infinity relations weight by weight; every nonzero
// component is supported on tuples with sum deg a_i = sum |b_i| = k+l-1,
// and d^{1,1} is seeded with the canonical pairing.
BimodPtr solve_koszul_bimodule(AlgPtr A, AlgPtr B, int dim, int W, KoszulSolveInfo* info);

struct KoszulTriple {
    int dim = 2;
    int W = 5;
    Window window{-6, 2, -6, 6};
    int order = 0;
    AlgPtr A, B;
    BimodPtr K;
    KoszulSolveInfo solve_info;
};

KoszulTriple make_koszul_triple(int dim, int W, Window window, int order = 0);

// Derived actions are quasi-isomorphisms (cone acyclicity of L_A and R_B),
// plus the bimodule-level statement via check_morphism on L_A.
CheckReport keller_check(const KoszulTriple& T, const Window& win);

// Cohomology of End_B(K) (matches dims of A) and of End_A(K) (matches
// dims of B at the exterior bidegrees).
struct ExtTables {
    CohomologyTable end_b;  // Ext_B(k,k)
    CohomologyTable end_a;  // Ext_A(k,k)
    bool matches_A = false;
    bool matches_B = false;
};
ExtTables koszul_ext_table(const KoszulTriple& T, const Window& win);

// Morita verification: cones of the unit/counit acyclic, F(A) ~ K and
// G(F(A)) ~ A as cohomology tables, and the Appendix-B squares.
CheckReport morita_check(const KoszulTriple& T, const Window& win);

}  // namespace akb
