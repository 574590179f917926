#pragma once

#include <span>
#include <vector>

#include "apmlmc/scheme.hpp"
#include "apmlmc/variance.hpp"

namespace apmlmc {

enum class CouplingMode { TermByTerm, Combined };

struct CouplingConfig {
    int refinement = 1;  // M, with dt_coarse = M dt_fine exactly
    CouplingMode mode = CouplingMode::Combined;
    double theta = 1.0;  // ignored (treated as 1) in TermByTerm mode
};

// Per fine sub-step record of the draws needed to synthesize coarse inputs.
// vbar is the unit velocity in effect during the sub-step's transport;
// vbar_post the unit velocity after the sub-step's collision stage.
struct FineStepRecord {
    double xi = 0.0;
    double u = 0.0;
    double vbar = 0.0;
    double vbar_post = 0.0;
    bool collided = false;
};

// Correlated (coarse, fine) particle pair. Positions are maintained as the
// sum of the diffusion and transport accumulators, so the trace decomposition
// is exact by construction. Pairs start at the origin with a shared unit
// velocity draw.
struct CoupledPair {
    CoupledPair(double epsilon, double v_char, double dt_fine, CouplingConfig config,
                const VelocityModel& model, InitVelocity init, Rng& rng);

    ParticleState fine;
    ParticleState coarse;
    SchemeParams fine_params;
    SchemeParams coarse_params;
    CouplingConfig config;

    double fine_vbar;    // unit velocity backing fine.v
    double coarse_vbar;  // unit velocity backing coarse.v

    double fine_diffusion = 0.0, fine_transport = 0.0;
    double coarse_diffusion = 0.0, coarse_transport = 0.0;

    double velocity_sum_variance;  // V[sum Vbar] for the transport contribution
};

// Reusable per-coarse-step buffer: storage M, not M*N.
struct PairStepScratch {
    std::vector<FineStepRecord> records;
};

// (1/sqrt(M)) sum of the fine Brownian increments; standard normal.
double coarse_xi_term_by_term(std::span<const FineStepRecord> records);

// u_coarse = (max_m u^m)^M, uniform on [0,1); collision iff u_coarse >= p_nc.
struct CoarseCollision {
    bool collided = false;
    double u_coarse = 0.0;
};
CoarseCollision coarse_collision(std::span<const FineStepRecord> records,
                                 const SchemeParams& coarse_params);

// On a coarse collision, the unit velocity after the final fine sub-step;
// otherwise the previous coarse unit velocity.
double coarse_velocity(std::span<const FineStepRecord> records, bool collided,
                       double prev_vbar_coarse);

// sqrt(theta) xi_W + sqrt(1-theta) xi_T where xi_W is the term-by-term sum and
// xi_T the normalized velocity sum with the two boundary substitutions (the
// sub-steps before the first collision share one fresh draw, those after the
// last collision share another; a whole collision-free interval uses a single
// draw). Mean 0, variance 1.
double coarse_xi_combined(std::span<const FineStepRecord> records,
                          double velocity_sum_variance, double theta,
                          const VelocityModel& model, Rng& rng);

// One coarse step: M fine AP steps recording (xi, u, vbar), then one coarse AP
// step from the synthesized (xi, u, vbar) triple. The observer, when given,
// sees the pair after every fine sub-step (used by the trace writer).
using FineSubStepObserver = void (*)(void* user, int sub_step, const CoupledPair& pair);

void paired_coarse_step(CoupledPair& pair, const VelocityModel& model, Rng& rng,
                        PairStepScratch& scratch,
                        FineSubStepObserver observer = nullptr, void* user = nullptr);

}  // namespace apmlmc
