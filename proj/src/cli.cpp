#include "apmlmc/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

namespace apmlmc {

namespace {

constexpr std::uint64_t kMergedPairStream = 1000000;  // aux pairings, off the level namespace
constexpr std::uint64_t kTraceStream = 2000000;
constexpr std::int64_t kMergedPairSamples = 10000;

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5e", x);
    return buf;
}

std::string full(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::ofstream open_output(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
}

void write_levels_csv(const MlmcResult& result, std::ofstream& out) {
    out << "level,dt,samples,mean_diff,var_diff,var_level,cost\n";
    for (std::size_t l = 0; l < result.levels.size(); ++l) {
        const auto& stats = result.stats[l];
        const double var = stats.variance();
        out << l << ',' << sci(result.levels[l].dt) << ',' << sci(double(stats.samples))
            << ',' << sci(stats.mean()) << ',' << sci(var) << ','
            << sci(stats.samples > 0 ? var / double(stats.samples) : 0.0) << ','
            << sci(stats.cost) << "\n";
    }
}

void write_summary_csv(const RunConfig& config, const MlmcResult& result,
                       std::ofstream& out) {
    out << "key,value\n";
    out << "estimate," << full(result.estimate) << "\n";
    out << "total_cost," << full(result.total_cost) << "\n";
    out << "rmse_target," << full(result.rmse_target) << "\n";
    out << "converged," << (result.converged ? "true" : "false") << "\n";
    out << "alpha," << full(result.alpha) << "\n";
    out << "theta1," << full(result.theta1) << "\n";
    out << "fast_level0_overhead," << full(result.fast_level0_overhead) << "\n";
    out << "levels," << result.levels.size() << "\n";
    out << "seed," << config.seed << "\n";
    out << "model," << (config.model == VelocityKind::TwoSpeed ? "two-speed" : "gaussian")
        << "\n";
    out << "epsilon," << full(config.epsilon) << "\n";
    out << "v_char," << full(config.v_char) << "\n";
    out << "t_end," << full(config.t_end) << "\n";
    out << "rmse," << full(config.rmse) << "\n";
    out << "dt0," << full(config.dt0) << "\n";
    out << "dt1," << full(config.dt1) << "\n";
    out << "m_tail," << config.m_tail << "\n";
    out << "coupling,"
        << (config.coupling == LevelCoupling::Combined ? "combined" : "term") << "\n";
    out << "theta," << (config.theta_auto ? std::string("auto") : full(config.theta))
        << "\n";
    out << "lambda_max," << config.lambda_max << "\n";
    out << "fast_level0," << (config.fast_level0 ? "true" : "false") << "\n";
    out << "init_velocity,"
        << (config.init_velocity == InitVelocity::Scaled ? "scaled" : "kinetic") << "\n";
    out << "max_levels," << config.max_levels << "\n";
    out << "output_dir," << config.output_dir << "\n";
}

// leave-out score at level 1: keep-both terms from the ladder stats, merged
// (level 0, level 2) pairing estimated with a dedicated sample set
double level1_leave_out_score(const RunConfig& config, const EstimatorContext& ctx,
                              const MlmcResult& result) {
    const auto& spec1 = result.levels[1];
    const auto& spec2 = result.levels[2];
    const double c1 = result.stats[1].cost / double(result.stats[1].samples);
    const double c2 = result.stats[2].cost / double(result.stats[2].samples);

    LevelSpec merged = spec2;
    if (merged.coupling == LevelCoupling::Combined) {
        const int m = int(std::lround(config.dt0 / spec2.dt));
        const long n = std::lround(config.t_end / config.dt0);
        merged.theta = m > 1 ? optimal_theta(LevelPairParams(config.epsilon, config.v_char,
                                                             spec2.dt, m, n))
                             : 1.0;
    }
    const LevelStats merged_stats = run_level(ctx, merged, config.dt0,
                                              kMergedPairStream + 1, 0, kMergedPairSamples);
    const double merged_cost = merged_stats.cost / double(merged_stats.samples);
    return leave_out_score(result.stats[1].variance(), c1, result.stats[2].variance(), c2,
                           merged_stats.variance(), merged_cost);
}

}  // namespace

MlmcResult run_from_config(const RunConfig& config) {
    const EstimatorContext ctx = estimator_context_from(config);
    return adaptive_mlmc(ctx, mlmc_options_from(config));
}

int cmd_run(const RunConfig& config) {
    const MlmcResult result = run_from_config(config);
    auto levels = open_output(config.output_dir, "levels.csv");
    write_levels_csv(result, levels);
    auto summary = open_output(config.output_dir, "summary.csv");
    write_summary_csv(config, result, summary);
    return 0;
}

int cmd_sweep(const RunConfig& config, const std::vector<double>& dt1_grid) {
    if (dt1_grid.empty()) throw ConfigError("sweep: empty dt1 grid");
    auto out = open_output(config.output_dir, "sweep.csv");
    out << "dt1,total_cost,leave_out_score,estimate\n";
    for (const double dt1 : dt1_grid) {
        RunConfig point = config;
        point.dt1 = dt1;
        const double ratio = point.dt0 / dt1;
        if (!(ratio >= 1.0) ||
            std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
            throw ConfigError("sweep: dt1 grid entry must divide dt0");
        const EstimatorContext ctx = estimator_context_from(point);
        const MlmcResult result = adaptive_mlmc(ctx, mlmc_options_from(point));
        const double score = level1_leave_out_score(point, ctx, result);
        out << sci(dt1) << ',' << sci(result.total_cost) << ',' << sci(score) << ','
            << sci(result.estimate) << "\n";
    }
    return 0;
}

int cmd_tables(int m_steps, double epsilon, double dt, int lambda_max,
               const std::string& out_path, const std::string& velocity_sums_path) {
    const SchemeParams params(epsilon, dt, 1.0);
    const RunLengthTables tables = build_tables(m_steps, params.no_collision_prob(),
                                                lambda_max);
    write_run_length_tables(tables, out_path);
    if (!velocity_sums_path.empty()) {
        const VelocityModel model{VelocityKind::TwoSpeed, 1.0};
        write_velocity_sum_table(build_velocity_sum_table(model, m_steps),
                                 velocity_sums_path);
    }
    return 0;
}

int cmd_analyze(const RunConfig& config, std::ostream& out) {
    const int m = int(std::lround(config.dt0 / config.dt1));
    const long n = std::lround(config.t_end / config.dt0);
    const LevelPairParams pair(config.epsilon, config.v_char, config.dt1, m, n);
    const double p_nc = pair.fine.no_collision_prob();
    const double vvs = var_velocity_sum(p_nc, m);
    const double dsum = double_sum_expectation(p_nc, m);
    const double theta_star = optimal_theta(pair);
    const double theta = config.theta_auto ? theta_star : config.theta;
    const CouplingWeights w = coupling_weights(pair, theta);

    char buf[64];
    auto print = [&out, &buf](const char* key, double value) {
        std::snprintf(buf, sizeof buf, "%.12g", value);
        out << key << " = " << buf << "\n";
    };
    print("epsilon", config.epsilon);
    print("dt_fine", config.dt1);
    print("dt_coarse", config.dt0);
    print("refinement", m);
    print("n_coarse_steps", double(n));
    print("p_c_fine", pair.fine.collision_prob());
    print("p_nc_fine", pair.fine.no_collision_prob());
    print("D_fine", pair.fine.diffusion_coeff());
    print("v_char_fine", pair.fine.scaled_v_char());
    print("p_c_coarse", pair.coarse.collision_prob());
    print("p_nc_coarse", pair.coarse.no_collision_prob());
    print("D_coarse", pair.coarse.diffusion_coeff());
    print("v_char_coarse", pair.coarse.scaled_v_char());
    print("velocity_sum_variance", vvs);
    print("double_sum_expectation", dsum);
    print("C1", w.c1);
    print("C2", w.c2);
    print("theta_star", theta_star);
    print("theta", theta);
    print("predicted_pair_variance", total_pair_variance(pair, theta));
    return 0;
}

namespace {

struct TraceWriter {
    std::ofstream* out;
    const CoupledPair* pair;
    long coarse_step;

    void fine_row(int m) const {
        const double t = (double(coarse_step) * pair->config.refinement + m + 1) *
                         pair->fine_params.dt;
        row(t);
    }
    void coarse_row() const { row(double(coarse_step + 1) * pair->coarse_params.dt); }
    void row(double t) const {
        *out << full(t) << ',' << full(pair->fine.x) << ',' << full(pair->coarse.x) << ','
             << full(pair->fine_diffusion) << ',' << full(pair->fine_transport) << ','
             << full(pair->coarse_diffusion) << ',' << full(pair->coarse_transport)
             << "\n";
    }
};

void trace_observer(void* user, int sub_step, const CoupledPair&) {
    static_cast<const TraceWriter*>(user)->fine_row(sub_step);
}

}  // namespace

int cmd_trace(const RunConfig& config, long n_units) {
    if (n_units < 1) throw ConfigError("trace: units must be >= 1");
    auto out = open_output(config.output_dir, "trace.csv");
    out << "t,x_fine,x_coarse,x_fine_diffusion_only,x_fine_transport_only,"
           "x_coarse_diffusion_only,x_coarse_transport_only\n";

    const int m = int(std::lround(config.dt0 / config.dt1));
    const long n1 = std::lround(config.t_end / config.dt0);
    CouplingConfig coupling;
    coupling.refinement = m;
    coupling.mode = config.coupling == LevelCoupling::Combined ? CouplingMode::Combined
                                                               : CouplingMode::TermByTerm;
    coupling.theta = 1.0;
    if (coupling.mode == CouplingMode::Combined) {
        if (config.theta_auto)
            coupling.theta = m > 1 ? optimal_theta(LevelPairParams(
                                         config.epsilon, config.v_char, config.dt1, m,
                                         std::max(n1, 1L)))
                                   : 1.0;
        else
            coupling.theta = config.theta;
    }

    const VelocityModel model{config.model, config.v_char};
    Rng rng = Rng::stream(config.seed, kTraceStream, 0);
    CoupledPair pair(config.epsilon, config.v_char, config.dt1, coupling, model,
                     config.init_velocity, rng);
    PairStepScratch scratch;
    TraceWriter writer{&out, &pair, 0};
    for (long n = 0; n < n_units; ++n) {
        writer.coarse_step = n;
        paired_coarse_step(pair, model, rng, scratch, &trace_observer, &writer);
        writer.coarse_row();
    }
    return 0;
}

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"asymptotic-preserving multilevel Monte Carlo particle simulation"};
    app.require_subcommand(1);

    std::string config_path, output_dir, dt1_grid_arg;
    std::uint64_t seed_override = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* cmd, bool needs_grid) {
        cmd->add_option("--config", config_path, "configuration file")->required();
        cmd->add_option_function<std::uint64_t>(
               "--seed", [&](std::uint64_t s) { seed_override = s; seed_set = true; },
               "override the config seed");
        cmd->add_option("--output", output_dir, "override the output directory");
        if (needs_grid)
            cmd->add_option("--dt1-grid", dt1_grid_arg, "comma-separated dt1 values");
    };

    CLI::App* run = app.add_subcommand("run", "adaptive MLMC estimate");
    add_common(run, false);
    CLI::App* sweep = app.add_subcommand("sweep", "vary dt1 and score level 1");
    add_common(sweep, true);
    CLI::App* analyze = app.add_subcommand("analyze", "closed-form coupling quantities");
    add_common(analyze, false);
    CLI::App* trace = app.add_subcommand("trace", "dump one coupled pair trajectory");
    add_common(trace, false);
    long trace_units = 1;
    trace->add_option("--units", trace_units, "number of coarse steps");

    CLI::App* tables = app.add_subcommand("tables", "build run-length tables");
    int tables_m = 0, tables_lambda = 20;
    double tables_epsilon = 0.0, tables_dt = 0.0;
    std::string tables_out, tables_vs;
    tables->add_option("--m", tables_m, "fine steps per coarse step")->required();
    tables->add_option("--epsilon", tables_epsilon, "Knudsen number")->required();
    tables->add_option("--dt", tables_dt, "fine time step")->required();
    tables->add_option("--lambda-max", tables_lambda, "run-length truncation");
    tables->add_option("--out", tables_out, "output path")->required();
    tables->add_option("--velocity-sums", tables_vs, "velocity-sum table output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (tables->parsed())
            return cmd_tables(tables_m, tables_epsilon, tables_dt, tables_lambda,
                              tables_out, tables_vs);

        RunConfig config = parse_config_file(config_path);
        if (seed_set) config.seed = seed_override;
        if (!output_dir.empty()) config.output_dir = output_dir;

        if (run->parsed()) return cmd_run(config);
        if (analyze->parsed()) return cmd_analyze(config, std::cout);
        if (trace->parsed()) return cmd_trace(config, trace_units);
        if (sweep->parsed()) {
            std::vector<double> grid;
            if (dt1_grid_arg.empty()) {
                grid.push_back(config.dt1);
            } else {
                std::istringstream in(dt1_grid_arg);
                std::string item;
                while (std::getline(in, item, ',')) {
                    try {
                        grid.push_back(std::stod(item));
                    } catch (const std::exception&) {
                        throw ConfigError("invalid dt1 grid entry: " + item);
                    }
                }
            }
            return cmd_sweep(config, grid);
        }
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("apmlmc");
    for (const auto& arg : args) argv.push_back(arg.c_str());
    return cli_main(int(argv.size()), argv.data());
}

}  // namespace apmlmc
