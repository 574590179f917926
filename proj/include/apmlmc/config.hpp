#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "apmlmc/mlmc.hpp"

namespace apmlmc {

// raised for malformed configuration; the CLI maps it to exit code 2
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat "key = value" configuration with '#' comments.
struct RunConfig {
    VelocityKind model = VelocityKind::TwoSpeed;
    double epsilon = 0.0;
    double v_char = 1.0;
    double t_end = 0.5;
    double rmse = 0.0;
    double dt0 = 0.0;
    double dt1 = 0.0;
    int m_tail = 2;
    LevelCoupling coupling = LevelCoupling::Combined;
    bool theta_auto = true;
    double theta = 1.0;
    int lambda_max = 20;
    bool fast_level0 = true;
    InitVelocity init_velocity = InitVelocity::Scaled;
    std::uint64_t seed = 1;
    int max_levels = 25;
    std::string output_dir = ".";
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

MlmcOptions mlmc_options_from(const RunConfig& config);
EstimatorContext estimator_context_from(const RunConfig& config);

}  // namespace apmlmc
