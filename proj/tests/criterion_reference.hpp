// Generated by gen_ml_reference.py (mpmath). Do not edit.
#pragma once

namespace fracsde_test {

// Built-in example parameter set: p=2, alpha=5/3, iota=1/2, M=0.002,
// C_p=1, k(p)=1, a_hat=(1/3,1/3,1/3,1/3,0.02), c_mu=1, mu=1/2,
// D2=0.002, a2=1, p=2 limit convention enabled.
inline constexpr double kInvNormOverride = 0.17958712212516656;
inline constexpr double kThetaExistOverride = 0.073039037770165878;
inline constexpr double kThetaExistComputed = 0.61067707419616616;
inline constexpr double kThetaStabOverride = 0.073046730322895531;
inline constexpr double kThetaStabComputed = 0.61068476674889582;
inline constexpr double kExistAddendsOverride[5] = {
    0.017917519129555272,
    0.055118092082229148,
    9.3225048124626268e-8,
    1.1111111111111111e-6,
    2.2222222222222222e-6,
};
inline constexpr double kStabAddendsOverride[5] = {
    0.017917519129555272,
    0.055118092082229148,
    2.2222222222222222e-6,
    2.2222222222222222e-6,
    6.6746666666666667e-6,
};
inline constexpr double kOplus1Override = 0.073035704436832545;
inline constexpr double kOplus2Override = 3.3333333333333333e-6;
inline constexpr double kA1HatOverride = 0.073035611211784420;
inline constexpr double kA2HatOverride = 1.1119111111111111e-5;

// Root of 0.2 e^{-0.1 mu} + 0.3 e^{-0.1 mu}/(1-mu) = 1 in (0,1).
inline constexpr double kDecayRootSample = 0.65422240673643997;

}  // namespace fracsde_test
