#include "apmlmc/scheme.hpp"

#include <cmath>
#include <stdexcept>

namespace apmlmc {

SchemeParams::SchemeParams(double epsilon_, double dt_, double v_char_)
    : epsilon(epsilon_), dt(dt_), v_char(v_char_) {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("SchemeParams: epsilon must be > 0");
    if (!(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("SchemeParams: dt must be > 0");
    if (!(v_char > 0.0) || !std::isfinite(v_char))
        throw std::invalid_argument("SchemeParams: v_char must be > 0");
}

double initial_velocity(const SchemeParams& params, const VelocityModel& model,
                        SchemeKind scheme, InitVelocity init, Rng& rng) {
    const double b = sample_unit_velocity(model, rng);
    const double scale = (init == InitVelocity::Kinetic || scheme == SchemeKind::Standard)
                             ? params.kinetic_v_char()
                             : params.scaled_v_char();
    return scale * b;
}

ParticleState standard_step(ParticleState state, const SchemeParams& params,
                            const VelocityModel& model, Rng& rng) {
    const double p_c = params.standard_collision_prob();
    if (p_c > 1.0)
        throw std::invalid_argument("standard_step: requires dt <= eps^2");
    state.x += params.dt * state.v;
    const double u = rng.uniform();
    if (u >= 1.0 - p_c)
        state.v = params.kinetic_v_char() * sample_unit_velocity(model, rng);
    return state;
}

ParticleState ap_step_with_xi(ParticleState state, const SchemeParams& params,
                              const VelocityModel& model, double xi, Rng& rng) {
    state.x += params.dt * state.v +
               std::sqrt(2.0 * params.dt) * std::sqrt(params.diffusion_coeff()) * xi;
    const double u = rng.uniform();
    if (u >= params.no_collision_prob())
        state.v = params.scaled_v_char() * sample_unit_velocity(model, rng);
    return state;
}

ParticleState ap_step(ParticleState state, const SchemeParams& params,
                      const VelocityModel& model, Rng& rng) {
    const double xi = rng.normal();
    return ap_step_with_xi(state, params, model, xi, rng);
}

ParticleState simulate_path(ParticleState initial, const SchemeParams& params,
                            const VelocityModel& model, long n_steps,
                            SchemeKind scheme, Rng& rng) {
    if (n_steps < 0)
        throw std::invalid_argument("simulate_path: n_steps must be >= 0");
    ParticleState state = initial;
    for (long n = 0; n < n_steps; ++n)
        state = scheme == SchemeKind::AP ? ap_step(state, params, model, rng)
                                         : standard_step(state, params, model, rng);
    return state;
}

}  // namespace apmlmc
