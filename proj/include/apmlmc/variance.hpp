#pragma once

#include "apmlmc/scheme.hpp"

namespace apmlmc {

// Coarse/fine parameter pair for one correlated level: dt_coarse = M dt_fine,
// N coarse steps to the horizon. Same epsilon and v_char on both sides.
struct LevelPairParams {
    LevelPairParams(double epsilon, double v_char, double dt_fine, int refinement,
                    long n_coarse_steps);

    SchemeParams fine;
    SchemeParams coarse;
    int refinement;       // M
    long n_coarse_steps;  // N
};

// V[sum_{m=0}^{M-1} Vbar^m] = M + 2 p_nc (p_nc^M + M p_c - 1) / p_c^2,
// the variance of a sum of M unit velocities with per-step no-collision
// probability p_nc. p_nc = 1 is the fully-correlated limit M^2.
double var_velocity_sum(double p_nc, int M);
double var_velocity_sum(double p_nc, int M, bool& at_limit);

// E[Vbar^m Vbar'^m2] under the boundary-substitution rule:
// (1 - p_nc^min)(1 - p_nc^(M-max)) p_nc^|m-m2|
double pair_velocity_expectation(int m, int m2, double p_nc, int M);

// sum over all (m, m2) of pair_velocity_expectation
double double_sum_expectation(double p_nc, int M);

struct CouplingWeights {
    double c1;      // 2 dt_c sqrt(D_f D_c)
    double c2;      // dt_f v_f sqrt(2 dt_c D_c / V[sum Vbar]) * double sum
    double cov_ww;  // sqrt(theta) c1
    double cov_tw;  // sqrt(1-theta) c2
};

CouplingWeights coupling_weights(const LevelPairParams& params, double theta);

// theta* = C1^2 / (C1^2 + C2^2), the variance-minimizing coupling weight
double optimal_theta(const LevelPairParams& params);

// Exact sum of cross-step covariances 2-sum_{n<n'} Cov(Delta_X,n, Delta_X,n')
// (without the factor 2), for pairs started from a shared velocity draw.
// Decomposes into fine-fine, coarse-coarse and the two transport cross
// blocks; each block is validated against a Monte Carlo oracle.
double cross_step_covariance(const LevelPairParams& params);

// Same quantity under the stationary velocity-correlation approximation
// (cross blocks weighted by the stationary renewal factor). Coincides with
// the exact form at N = 1, where both are zero.
double cross_step_covariance_stationary(const LevelPairParams& params);

// V[sum_n Delta_X,n] = N * per-step variance + 2 * cross_step_covariance
double total_pair_variance(const LevelPairParams& params, double theta);

// per-step variance of the coupled difference (exposed for tests)
double per_step_pair_variance(const LevelPairParams& params, double theta);

}  // namespace apmlmc
