#include "apmlmc/mlmc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "apmlmc/parallel.hpp"

namespace apmlmc {

namespace {

constexpr double kBaselineDt = 0.01;

long steps_for_horizon(double t_star, double dt, const char* what) {
    const double ratio = t_star / dt;
    const long n = std::lround(ratio);
    if (n < 1 || std::abs(ratio - double(n)) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument(std::string(what) +
                                    ": horizon must be an integer multiple of dt");
    return n;
}

int refinement_factor(double dt_coarse, double dt_fine, const char* what) {
    const double ratio = dt_coarse / dt_fine;
    const int m = int(std::lround(ratio));
    if (m < 1 || std::abs(ratio - double(m)) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument(std::string(what) +
                                    ": dt_coarse must be an integer multiple of dt_fine");
    return m;
}

std::int64_t chunk_size(double steps_per_sample) {
    const double target = 2.0e5;  // draws per chunk, keeps load balance even
    const std::int64_t c = std::int64_t(target / std::max(1.0, steps_per_sample));
    return std::clamp<std::int64_t>(c, 1, 4096);
}

LevelStats run_level0(const EstimatorContext& ctx, const LevelSpec& spec,
                      std::uint64_t stream_key, std::int64_t first, std::int64_t count) {
    const SchemeParams params(ctx.epsilon, spec.dt, ctx.v_char);
    const long n_steps = steps_for_horizon(ctx.t_star, spec.dt, "run_level");

    const FastLevel0* fast = nullptr;
    if (spec.fast_level0 && ctx.fast_level0 != nullptr &&
        ctx.model.kind != VelocityKind::Gaussian && ctx.fast_level0->theta < 1.0)
        fast = ctx.fast_level0;

    const double baseline_steps = ctx.t_star / kBaselineDt;
    const double cost_per_sample = double(n_steps) / baseline_steps;
    // one probe is charged as Lambda/M of a step; Lambda probes per step
    const double overhead_per_sample =
        fast == nullptr ? 0.0
                        : double(n_steps) * double(fast->run_tables.lambda_max) *
                              (double(fast->run_tables.lambda_max) /
                               double(fast->run_tables.m_steps)) /
                              baseline_steps;

    const std::int64_t chunk = chunk_size(double(n_steps));
    const std::int64_t n_chunks = (count + chunk - 1) / chunk;
    std::vector<LevelStats> partials(static_cast<std::size_t>(n_chunks));
    parallel_chunks(first, count, chunk, ctx.workers,
                    [&](std::int64_t chunk, std::int64_t begin, std::int64_t end) {
                        LevelStats local;
                        for (std::int64_t p = begin; p < end; ++p) {
                            Rng rng = Rng::stream(ctx.seed, stream_key, std::uint64_t(p));
                            ParticleState state;
                            state.v = initial_velocity(params, ctx.model, SchemeKind::AP,
                                                       ctx.init_velocity, rng);
                            for (long n = 0; n < n_steps; ++n) {
                                const double xi =
                                    fast != nullptr
                                        ? fast_level0_xi(ctx.model, fast->run_tables,
                                                         fast->sum_table, fast->theta, rng)
                                        : rng.normal();
                                state = ap_step_with_xi(state, params, ctx.model, xi, rng);
                            }
                            const double f = ctx.qoi(state.x, state.v);
                            local.samples += 1;
                            local.sum += f;
                            local.sumsq += f * f;
                        }
                        local.cost = double(local.samples) * cost_per_sample;
                        local.cost_overhead = double(local.samples) * overhead_per_sample;
                        partials[std::size_t(chunk)] = local;
                    });
    LevelStats stats;
    for (const auto& partial : partials) stats.merge(partial);
    return stats;
}

LevelStats run_level_pair(const EstimatorContext& ctx, const LevelSpec& spec,
                          double prev_dt, std::uint64_t stream_key, std::int64_t first,
                          std::int64_t count) {
    const int m = refinement_factor(prev_dt, spec.dt, "run_level");
    const long n_coarse = steps_for_horizon(ctx.t_star, prev_dt, "run_level");
    CouplingConfig config;
    config.refinement = m;
    config.mode = spec.coupling == LevelCoupling::Combined ? CouplingMode::Combined
                                                           : CouplingMode::TermByTerm;
    config.theta = spec.theta;

    const double steps_per_sample = double(n_coarse) * (m + 1.0);
    const double cost_per_sample = level_cost_per_sample(ctx.t_star, spec.dt, prev_dt);
    const std::int64_t chunk = chunk_size(steps_per_sample);
    const std::int64_t n_chunks = (count + chunk - 1) / chunk;
    std::vector<LevelStats> partials(static_cast<std::size_t>(n_chunks));
    parallel_chunks(first, count, chunk, ctx.workers,
                    [&](std::int64_t chunk_index, std::int64_t begin, std::int64_t end) {
                        LevelStats local;
                        PairStepScratch scratch;
                        for (std::int64_t p = begin; p < end; ++p) {
                            Rng rng = Rng::stream(ctx.seed, stream_key, std::uint64_t(p));
                            CoupledPair pair(ctx.epsilon, ctx.v_char, spec.dt, config,
                                             ctx.model, ctx.init_velocity, rng);
                            for (long n = 0; n < n_coarse; ++n)
                                paired_coarse_step(pair, ctx.model, rng, scratch);
                            const double f = ctx.qoi(pair.fine.x, pair.fine.v) -
                                             ctx.qoi(pair.coarse.x, pair.coarse.v);
                            local.samples += 1;
                            local.sum += f;
                            local.sumsq += f * f;
                        }
                        local.cost = double(local.samples) * cost_per_sample;
                        partials[std::size_t(chunk_index)] = local;
                    });
    LevelStats stats;
    for (const auto& partial : partials) stats.merge(partial);
    return stats;
}

// weak rate alpha from log_{m_tail}|mean_l| over the last <= 3 tail levels,
// delta-method weights P mean^2 / V, floored at 1/2
double estimate_alpha(const std::vector<LevelStats>& stats, int m_tail) {
    const int last = int(stats.size()) - 1;
    const int first_tail = 2;
    const int lo = std::max(first_tail, last - 2);
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    int points = 0;
    for (int l = lo; l <= last; ++l) {
        const double mean = std::abs(stats[std::size_t(l)].mean());
        if (mean <= 0.0) continue;
        const double variance = stats[std::size_t(l)].variance();
        const double w =
            variance > 0.0
                ? std::min(1e12, double(stats[std::size_t(l)].samples) * mean * mean / variance)
                : 1.0;
        const double x = double(l);
        const double y = std::log(mean) / std::log(double(m_tail));
        sw += w;
        swx += w * x;
        swy += w * y;
        swxx += w * x * x;
        swxy += w * x * y;
        ++points;
    }
    if (points < 2) return 1.0;
    const double denom = sw * swxx - swx * swx;
    if (denom <= 0.0) return 1.0;
    const double slope = (sw * swxy - swx * swy) / denom;
    return std::max(0.5, -slope);
}

}  // namespace

double qoi_squared_displacement(double x, double /*v*/) { return x * x; }

double level_cost_per_sample(double t_star, double dt_fine, double dt_coarse) {
    return (t_star / dt_fine + t_star / dt_coarse) / (t_star / kBaselineDt);
}

LevelStats run_level(const EstimatorContext& ctx, const LevelSpec& spec, double prev_dt,
                     std::uint64_t stream_key, std::int64_t first, std::int64_t count) {
    if (count <= 0) return LevelStats{};
    return prev_dt <= 0.0 ? run_level0(ctx, spec, stream_key, first, count)
                          : run_level_pair(ctx, spec, prev_dt, stream_key, first, count);
}

std::int64_t allocate_samples(double rmse, double variance, double cost_per_sample,
                              double sum_sqrt_vc, std::int64_t min_samples) {
    if (variance <= 0.0 || cost_per_sample <= 0.0) return min_samples;
    const double p = 2.0 / (rmse * rmse) * std::sqrt(variance / cost_per_sample) * sum_sqrt_vc;
    if (p >= 9.0e18) return std::int64_t(9.0e18);
    return std::max<std::int64_t>(min_samples, std::int64_t(std::ceil(p)));
}

double leave_out_score(double var_l, double cost_l, double var_l1, double cost_l1,
                       double merged_var, double merged_cost) {
    return std::sqrt(var_l * cost_l) + std::sqrt(var_l1 * cost_l1) -
           std::sqrt(merged_var * merged_cost);
}

MlmcResult adaptive_mlmc(const EstimatorContext& ctx, const MlmcOptions& options) {
    if (!(options.rmse > 0.0))
        throw std::invalid_argument("adaptive_mlmc: rmse must be > 0");
    if (options.m_tail < 2)
        throw std::invalid_argument("adaptive_mlmc: m_tail must be >= 2");
    steps_for_horizon(ctx.t_star, options.dt0, "adaptive_mlmc");
    const int m1 = refinement_factor(options.dt0, options.dt1, "adaptive_mlmc");
    const long n1_coarse = steps_for_horizon(ctx.t_star, options.dt0, "adaptive_mlmc");

    MlmcResult result;
    result.rmse_target = options.rmse;

    double theta1 = options.theta1;
    if (options.coupling == LevelCoupling::TermByTerm) {
        theta1 = 1.0;
    } else if (theta1 < 0.0) {
        theta1 = m1 > 1 ? optimal_theta(LevelPairParams(ctx.epsilon, ctx.v_char,
                                                        options.dt1, m1, n1_coarse))
                        : 1.0;
    }
    result.theta1 = theta1;

    EstimatorContext level_ctx = ctx;
    const bool use_fast = options.fast_level0 &&
                          ctx.model.kind != VelocityKind::Gaussian &&
                          options.coupling == LevelCoupling::Combined && theta1 < 1.0 &&
                          m1 >= 2;
    if (use_fast) {
        auto fast = std::make_shared<FastLevel0>();
        const SchemeParams fine(ctx.epsilon, options.dt1, ctx.v_char);
        const int lambda_max = std::min(options.lambda_max, m1);
        fast->run_tables = build_tables(m1, fine.no_collision_prob(), lambda_max);
        fast->sum_table = build_velocity_sum_table(ctx.model, m1);
        fast->theta = theta1;
        result.fast_level0 = fast;
        level_ctx.fast_level0 = fast.get();
    }

    auto& levels = result.levels;
    levels.push_back({options.dt0, LevelCoupling::None, 1.0, use_fast});
    levels.push_back({options.dt1, options.coupling, theta1, false});
    for (int l = 2; l <= 3; ++l)  // minimum two warm-up levels beyond level 1
        levels.push_back({options.dt1 * std::pow(double(options.m_tail), 1.0 - l),
                          options.coupling, 1.0, false});

    auto& stats = result.stats;
    stats.resize(levels.size());

    const int max_iterations = 200;
    bool converged = false;
    for (int iteration = 0; iteration < max_iterations; ++iteration) {
        // warm-up newly added levels
        for (std::size_t l = 0; l < levels.size(); ++l) {
            if (stats[l].samples >= options.warmup_samples) continue;
            const double prev_dt = l == 0 ? 0.0 : levels[l - 1].dt;
            LevelStats fresh =
                run_level(level_ctx, levels[l], prev_dt, std::uint64_t(l),
                          stats[l].samples, options.warmup_samples - stats[l].samples);
            stats[l].merge(fresh);
        }

        double sum_sqrt_vc = 0.0;
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const double c = stats[l].cost / double(stats[l].samples);
            sum_sqrt_vc += std::sqrt(stats[l].variance() * c);
        }
        bool satisfied = true;
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const double c = stats[l].cost / double(stats[l].samples);
            const std::int64_t target = allocate_samples(
                options.rmse, stats[l].variance(), c, sum_sqrt_vc, options.min_samples);
            if (target > stats[l].samples) {
                satisfied = false;
                const double prev_dt = l == 0 ? 0.0 : levels[l - 1].dt;
                LevelStats fresh = run_level(level_ctx, levels[l], prev_dt,
                                             std::uint64_t(l), stats[l].samples,
                                             target - stats[l].samples);
                stats[l].merge(fresh);
            }
        }
        if (!satisfied) continue;

        result.alpha = estimate_alpha(stats, options.m_tail);
        const double bias_bound =
            (std::pow(double(options.m_tail), result.alpha) - 1.0) * options.rmse /
            std::sqrt(2.0);
        const double tail_mean = std::abs(stats.back().mean());
        if (tail_mean <= bias_bound) {
            converged = true;
            break;
        }
        if (int(levels.size()) >= options.max_levels) break;
        const int l_new = int(levels.size());
        levels.push_back({options.dt1 * std::pow(double(options.m_tail), 1.0 - l_new),
                          options.coupling, 1.0, false});
        stats.emplace_back();
    }

    result.converged = converged;
    result.estimate = 0.0;
    result.total_cost = 0.0;
    result.fast_level0_overhead = 0.0;
    for (const auto& level_stats : stats) {
        result.estimate += level_stats.mean();
        result.total_cost += level_stats.cost;
        result.fast_level0_overhead += level_stats.cost_overhead;
    }
    return result;
}

int worker_count() {
    if (const char* env = std::getenv("APMLMC_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

}  // namespace apmlmc
