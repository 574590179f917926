#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "apmlmc/coupling.hpp"
#include "apmlmc/runlength.hpp"
#include "apmlmc/scheme.hpp"
#include "apmlmc/variance.hpp"
#include "apmlmc/velocity.hpp"

namespace apmlmc {

enum class LevelCoupling { None, TermByTerm, Combined };

struct LevelSpec {
    double dt = 0.0;
    LevelCoupling coupling = LevelCoupling::None;  // None only at level 0
    double theta = 1.0;
    bool fast_level0 = false;
};

// Mergeable accumulators of F-differences; cost in baseline units (one full
// dt = 0.01 path over the horizon counts as 1).
struct LevelStats {
    std::int64_t samples = 0;
    double sum = 0.0;
    double sumsq = 0.0;
    double cost = 0.0;
    double cost_overhead = 0.0;  // consistent level-0 table probes, charged separately

    double mean() const { return samples > 0 ? sum / double(samples) : 0.0; }
    double variance() const {
        if (samples < 2) return 0.0;
        const double v = (sumsq - sum * sum / double(samples)) / double(samples - 1);
        return v > 0.0 ? v : 0.0;
    }
    void merge(const LevelStats& other) {
        samples += other.samples;
        sum += other.sum;
        sumsq += other.sumsq;
        cost += other.cost;
        cost_overhead += other.cost_overhead;
    }
};

using QoiFn = double (*)(double x, double v);

// squared particle displacement, the default F
double qoi_squared_displacement(double x, double v);

// Machinery for the consistent level-0 sampler (two-speed, combined coupling
// with theta < 1); built once per (M, p_nc, Lambda).
struct FastLevel0 {
    RunLengthTables run_tables;
    VelocitySumTable sum_table;
    double theta = 1.0;
};

struct EstimatorContext {
    VelocityModel model;
    double epsilon = 0.1;
    double v_char = 1.0;
    double t_star = 0.5;
    InitVelocity init_velocity = InitVelocity::Scaled;
    QoiFn qoi = qoi_squared_displacement;
    std::uint64_t seed = 1;
    int workers = 1;
    const FastLevel0* fast_level0 = nullptr;  // only consulted by non-Gaussian level 0
};

// One level's estimator over particles [first, first+count):
//   level 0 (prev_dt <= 0): independent AP paths, F accumulated;
//   level l >= 1: coupled (dt, prev_dt) pairs, F-difference accumulated.
// stream_key namespaces the per-particle random streams.
LevelStats run_level(const EstimatorContext& ctx, const LevelSpec& spec, double prev_dt,
                     std::uint64_t stream_key, std::int64_t first, std::int64_t count);

struct MlmcOptions {
    double dt0 = 0.5;
    double dt1 = 0.01;
    int m_tail = 2;  // geometric tail ratio for levels l >= 2
    LevelCoupling coupling = LevelCoupling::Combined;
    double theta1 = -1.0;  // < 0: use optimal_theta for level 1
    bool fast_level0 = false;
    int lambda_max = 20;
    double rmse = 0.01;
    int max_levels = 25;
    std::int64_t warmup_samples = 1000;
    std::int64_t min_samples = 1000;
};

struct MlmcResult {
    std::vector<LevelSpec> levels;
    std::vector<LevelStats> stats;
    double estimate = 0.0;
    double total_cost = 0.0;
    double rmse_target = 0.0;
    bool converged = false;
    double alpha = 0.0;   // estimated weak convergence rate
    double theta1 = 1.0;  // level-1 coupling weight actually used
    double fast_level0_overhead = 0.0;
    std::shared_ptr<FastLevel0> fast_level0;  // kept alive for reuse
};

// Warm-up, sample allocation P_l = ceil((2/rmse^2) sqrt(V_l/C_l) sum sqrt(V C)),
// and geometric level extension until |mean_L| <= (m_tail^alpha - 1) rmse/sqrt(2).
MlmcResult adaptive_mlmc(const EstimatorContext& ctx, const MlmcOptions& options);

// sqrt(V_l C_l) + sqrt(V_l1 C_l1) - sqrt(V' C'); positive means dropping the
// middle level is beneficial. Costs are per sample.
double leave_out_score(double var_l, double cost_l, double var_l1, double cost_l1,
                       double merged_var, double merged_cost);

// allocation rule exposed for tests
std::int64_t allocate_samples(double rmse, double variance, double cost_per_sample,
                              double sum_sqrt_vc, std::int64_t min_samples);

// per-sample cost of a level in baseline units
double level_cost_per_sample(double t_star, double dt_fine, double dt_coarse);

}  // namespace apmlmc
