#pragma once

#include "apmlmc/rng.hpp"
#include "apmlmc/velocity.hpp"

namespace apmlmc {

// Time-stepping parameters (epsilon, dt, v_char) with the derived
// coefficients of the asymptotic-preserving scheme:
//   p_c   = dt / (eps^2 + dt)          collision probability
//   D_dt  = v_char^2 dt / (eps^2 + dt) diffusion coefficient
//   v_dt  = eps v_char / (eps^2 + dt)  characteristic velocity of M_dt
struct SchemeParams {
    SchemeParams(double epsilon, double dt, double v_char);

    double epsilon;
    double dt;
    double v_char;

    double collision_prob() const { return dt / (epsilon * epsilon + dt); }
    double no_collision_prob() const { return epsilon * epsilon / (epsilon * epsilon + dt); }
    double diffusion_coeff() const { return v_char * v_char * dt / (epsilon * epsilon + dt); }
    double scaled_v_char() const { return epsilon * v_char / (epsilon * epsilon + dt); }

    // standard (non-AP) scheme quantities; stepping requires dt <= eps^2
    double standard_collision_prob() const { return dt / (epsilon * epsilon); }
    double kinetic_v_char() const { return v_char / epsilon; }
};

// Velocity is stored post-scaling: the value multiplied by dt in the
// transport update. The same transport kernel serves both schemes.
struct ParticleState {
    double x = 0.0;
    double v = 0.0;
};

enum class SchemeKind { Standard, AP };

// scaled: draw from the scheme's own post-collision distribution
// kinetic: draw from (1/eps) M(v) regardless of scheme
enum class InitVelocity { Scaled, Kinetic };

double initial_velocity(const SchemeParams& params, const VelocityModel& model,
                        SchemeKind scheme, InitVelocity init, Rng& rng);

// x' = x + dt v; collision with probability dt/eps^2 redraws v from (1/eps)M.
// Requires dt <= eps^2.
ParticleState standard_step(ParticleState state, const SchemeParams& params,
                            const VelocityModel& model, Rng& rng);

// x' = x + dt v + sqrt(2 dt) sqrt(D_dt) xi; collision with probability
// dt/(eps^2+dt) redraws v from M_dt. Unconditionally stable.
ParticleState ap_step(ParticleState state, const SchemeParams& params,
                      const VelocityModel& model, Rng& rng);

// ap_step with an externally supplied Brownian increment (used by the
// coupled pair stepper and the consistent level-0 sampler).
ParticleState ap_step_with_xi(ParticleState state, const SchemeParams& params,
                              const VelocityModel& model, double xi, Rng& rng);

ParticleState simulate_path(ParticleState initial, const SchemeParams& params,
                            const VelocityModel& model, long n_steps,
                            SchemeKind scheme, Rng& rng);

}  // namespace apmlmc
