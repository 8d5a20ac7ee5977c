#pragma once

#include "akb/ainfty.hpp"
#include "akb/homology.hpp"

namespace akb {

// Mapping cone of a right-module morphism: carrier M[1] (+) N with the
// block codifferential [[ -d_M, 0 ], [ f, d_N ]], d^2 = 0 checked at build.
struct ConeData {
    ModPtr total;
    SpacePtr space;
    MorPtr f;
    // embeddings: part 0 = M[1] (module keys at shifted degree), part 1 = N
    std::function<BasisKey(int part, BasisKey)> embed;
    std::function<std::pair<int, BasisKey>(BasisKey)> split;
    MorPtr incl_N;    // N -> C(f), strict
    MorPtr proj_M1;   // C(f) -> M[1], strict
};
ConeData cone(MorPtr f);

// Cylinder M (+) M[1] (+) N per the block matrix with the -i entry.
struct CylinderData {
    ModPtr total;
    SpacePtr space;
    MorPtr f;
    std::function<BasisKey(int part, BasisKey)> embed;  // 0=M, 1=M[1], 2=N
    std::function<std::pair<int, BasisKey>(BasisKey)> split;
    MorPtr incl_M;   // M -> Cyl(f), strict
    MorPtr proj_C;   // Cyl(f) -> C(f), strict
    MorPtr rho;      // Cyl(f) -> M, the strict splitting of incl_M
};
CylinderData cylinder(MorPtr f, const ConeData& cf);

// H with 1_{C(1_M)} = H d + d H, the contraction H(sx (+) x') = (sx', 0).
MorPtr contraction_of_identity_cone(const ConeData& c_of_id);

// Rotation witnesses for u : X -> Y:
//   theta : X[1] -> C(v),  psi : C(v) -> X[1]   (v : Y -> C(u) inclusion)
//   psi o theta = 1;  theta o psi ~ 1 via H';  s o 1 - theta o p ~ 0 via H.
struct RotationWitnesses {
    ConeData cu;         // C(u)
    ConeData cv;         // C(v), v = incl_N of cu
    ModPtr X1;           // X[1]
    MorPtr theta, psi, H, Hprime, incl_s, proj_p;
    CheckReport psi_theta_is_id;
    CheckReport theta_psi_homotopic_id;
    CheckReport rotation_square;
};
RotationWitnesses rotation_witnesses(MorPtr u, int W, const Window& win);

// Semi-split sequence checks: rho o f = 1 and rho commutes with the
// arity >= 1 Taylor components (and demonstrably NOT with arity 0 when the
// connecting map is nonzero).
struct SemiSplitReport {
    CheckReport rho_splits_f;
    CheckReport rho_commutes_higher;
    bool rho_commutes_differential = true;
};
SemiSplitReport semisplit_check(const CylinderData& cyl, int W, const Window& win);

// connecting morphism of a direct sum built from h (eq. (ciao!)) is h itself;
// the assembled d squares to zero iff h is a morphism, verified both ways.
CheckReport connecting_morphism_check(ModPtr M, ModPtr Msecond, MorPtr h, int W,
                                      const Window& win);

}  // namespace akb
