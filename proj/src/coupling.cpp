#include "apmlmc/coupling.hpp"

#include <cmath>
#include <stdexcept>

namespace apmlmc {

CoupledPair::CoupledPair(double epsilon, double v_char, double dt_fine,
                         CouplingConfig config_, const VelocityModel& model,
                         InitVelocity init, Rng& rng)
    : fine(),
      coarse(),
      fine_params(epsilon, dt_fine, v_char),
      coarse_params(epsilon, dt_fine * config_.refinement, v_char),
      config(config_) {
    if (config.refinement < 1)
        throw std::invalid_argument("CoupledPair: refinement must be >= 1");
    if (config.mode == CouplingMode::TermByTerm) config.theta = 1.0;
    if (config.theta < 0.0 || config.theta > 1.0)
        throw std::invalid_argument("CoupledPair: theta must be in [0,1]");

    const double b0 = sample_unit_velocity(model, rng);  // shared initial draw
    fine_vbar = b0;
    coarse_vbar = b0;
    const double fine_scale = init == InitVelocity::Kinetic
                                  ? fine_params.kinetic_v_char()
                                  : fine_params.scaled_v_char();
    const double coarse_scale = init == InitVelocity::Kinetic
                                    ? coarse_params.kinetic_v_char()
                                    : coarse_params.scaled_v_char();
    fine.v = fine_scale * b0;
    coarse.v = coarse_scale * b0;
    velocity_sum_variance =
        var_velocity_sum(fine_params.no_collision_prob(), config.refinement);
}

double coarse_xi_term_by_term(std::span<const FineStepRecord> records) {
    double sum = 0.0;
    for (const auto& rec : records) sum += rec.xi;
    return sum / std::sqrt(double(records.size()));
}

CoarseCollision coarse_collision(std::span<const FineStepRecord> records,
                                 const SchemeParams& coarse_params) {
    double u_max = 0.0;
    for (const auto& rec : records) u_max = std::max(u_max, rec.u);
    const double u_coarse = std::pow(u_max, double(records.size()));
    return CoarseCollision{u_coarse >= coarse_params.no_collision_prob(), u_coarse};
}

double coarse_velocity(std::span<const FineStepRecord> records, bool collided,
                       double prev_vbar_coarse) {
    return collided ? records.back().vbar_post : prev_vbar_coarse;
}

double coarse_xi_combined(std::span<const FineStepRecord> records,
                          double velocity_sum_variance, double theta,
                          const VelocityModel& model, Rng& rng) {
    if (theta < 0.0 || theta > 1.0)
        throw std::invalid_argument("coarse_xi_combined: theta must be in [0,1]");
    const std::size_t m_steps = records.size();
    const double xi_w = coarse_xi_term_by_term(records);
    if (theta == 1.0) return xi_w;

    std::ptrdiff_t first = -1, last = -1;
    for (std::size_t m = 0; m < m_steps; ++m) {
        if (records[m].collided) {
            if (first < 0) first = std::ptrdiff_t(m);
            last = std::ptrdiff_t(m);
        }
    }

    double velocity_sum = 0.0;
    if (first < 0) {
        // collision-free interval: the whole sum is one run with a fresh draw
        velocity_sum = double(m_steps) * sample_unit_velocity(model, rng);
    } else {
        const double before = sample_unit_velocity(model, rng);
        velocity_sum += double(first + 1) * before;
        for (std::ptrdiff_t m = first + 1; m <= last; ++m)
            velocity_sum += records[std::size_t(m)].vbar;
        if (last < std::ptrdiff_t(m_steps) - 1) {
            const double after = sample_unit_velocity(model, rng);
            velocity_sum += double(std::ptrdiff_t(m_steps) - 1 - last) * after;
        }
    }
    const double xi_t = velocity_sum / std::sqrt(velocity_sum_variance);
    return std::sqrt(theta) * xi_w + std::sqrt(1.0 - theta) * xi_t;
}

void paired_coarse_step(CoupledPair& pair, const VelocityModel& model, Rng& rng,
                        PairStepScratch& scratch, FineSubStepObserver observer,
                        void* user) {
    const int m_steps = pair.config.refinement;
    auto& records = scratch.records;
    records.resize(std::size_t(m_steps));

    const SchemeParams& fp = pair.fine_params;
    const double fine_noise_scale =
        std::sqrt(2.0 * fp.dt) * std::sqrt(fp.diffusion_coeff());
    for (int m = 0; m < m_steps; ++m) {
        auto& rec = records[std::size_t(m)];
        rec.xi = rng.normal();
        rec.u = rng.uniform();
        rec.vbar = pair.fine_vbar;
        pair.fine_transport += fp.dt * pair.fine.v;
        pair.fine_diffusion += fine_noise_scale * rec.xi;
        pair.fine.x = pair.fine_diffusion + pair.fine_transport;
        rec.collided = rec.u >= fp.no_collision_prob();
        if (rec.collided) {
            pair.fine_vbar = sample_unit_velocity(model, rng);
            pair.fine.v = fp.scaled_v_char() * pair.fine_vbar;
        }
        rec.vbar_post = pair.fine_vbar;
        if (observer != nullptr) observer(user, m, pair);
    }

    const double xi_coarse =
        pair.config.mode == CouplingMode::TermByTerm
            ? coarse_xi_term_by_term(records)
            : coarse_xi_combined(records, pair.velocity_sum_variance,
                                 pair.config.theta, model, rng);
    const CoarseCollision coll = coarse_collision(records, pair.coarse_params);

    const SchemeParams& cp = pair.coarse_params;
    pair.coarse_transport += cp.dt * pair.coarse.v;
    pair.coarse_diffusion +=
        std::sqrt(2.0 * cp.dt) * std::sqrt(cp.diffusion_coeff()) * xi_coarse;
    pair.coarse.x = pair.coarse_diffusion + pair.coarse_transport;
    if (coll.collided) {
        pair.coarse_vbar = coarse_velocity(records, true, pair.coarse_vbar);
        pair.coarse.v = cp.scaled_v_char() * pair.coarse_vbar;
    }
}

}  // namespace apmlmc
