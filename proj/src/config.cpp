#include "apmlmc/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "apmlmc/parallel.hpp"

namespace apmlmc {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid value for key: " + key);
    }
}

long parse_integer(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("invalid value for key: " + key);
    }
}

bool parse_flag(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("invalid value for key: " + key);
}

void check_divides(const std::string& outer, const std::string& inner, double big,
                   double small) {
    const double ratio = big / small;
    if (!(ratio >= 1.0) ||
        std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio))
        throw ConfigError(outer + " must be a positive integer multiple of " + inner);
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
    std::map<std::string, std::string> entries;
    std::istringstream in(text);
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("malformed line " + std::to_string(line_number) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("malformed line " + std::to_string(line_number) +
                              ": expected key = value");
        if (!entries.emplace(key, value).second)
            throw ConfigError("duplicate key: " + key);
    }

    RunConfig config;
    auto take = [&entries](const char* key) {
        auto it = entries.find(key);
        if (it == entries.end()) return std::string();
        std::string value = it->second;
        entries.erase(it);
        return value;
    };
    auto require = [&take](const char* key) {
        std::string value = take(key);
        if (value.empty()) throw ConfigError(std::string("missing key: ") + key);
        return value;
    };

    {
        const std::string value = require("model");
        if (value == "two-speed")
            config.model = VelocityKind::TwoSpeed;
        else if (value == "gaussian")
            config.model = VelocityKind::Gaussian;
        else
            throw ConfigError("invalid value for key: model");
    }
    config.epsilon = parse_real("epsilon", require("epsilon"));
    config.rmse = parse_real("rmse", require("rmse"));
    config.dt0 = parse_real("dt0", require("dt0"));
    config.dt1 = parse_real("dt1", require("dt1"));

    if (std::string v = take("v_char"); !v.empty()) config.v_char = parse_real("v_char", v);
    if (std::string v = take("t_end"); !v.empty()) config.t_end = parse_real("t_end", v);
    if (std::string v = take("m_tail"); !v.empty())
        config.m_tail = int(parse_integer("m_tail", v));
    if (std::string v = take("coupling"); !v.empty()) {
        if (v == "term")
            config.coupling = LevelCoupling::TermByTerm;
        else if (v == "combined")
            config.coupling = LevelCoupling::Combined;
        else
            throw ConfigError("invalid value for key: coupling");
    }
    if (std::string v = take("theta"); !v.empty()) {
        if (v == "auto") {
            config.theta_auto = true;
        } else {
            config.theta_auto = false;
            config.theta = parse_real("theta", v);
            if (config.theta < 0.0 || config.theta > 1.0)
                throw ConfigError("invalid value for key: theta");
        }
    }
    if (std::string v = take("lambda_max"); !v.empty())
        config.lambda_max = int(parse_integer("lambda_max", v));
    if (std::string v = take("fast_level0"); !v.empty())
        config.fast_level0 = parse_flag("fast_level0", v);
    if (std::string v = take("init_velocity"); !v.empty()) {
        if (v == "scaled")
            config.init_velocity = InitVelocity::Scaled;
        else if (v == "kinetic")
            config.init_velocity = InitVelocity::Kinetic;
        else
            throw ConfigError("invalid value for key: init_velocity");
    }
    if (std::string v = take("seed"); !v.empty()) {
        try {
            std::size_t pos = 0;
            config.seed = std::stoull(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw ConfigError("invalid value for key: seed");
        }
    }
    if (std::string v = take("max_levels"); !v.empty())
        config.max_levels = int(parse_integer("max_levels", v));
    if (std::string v = take("output_dir"); !v.empty()) config.output_dir = v;

    if (!entries.empty()) throw ConfigError("unknown key: " + entries.begin()->first);

    if (!(config.epsilon > 0.0)) throw ConfigError("invalid value for key: epsilon");
    if (!(config.v_char > 0.0)) throw ConfigError("invalid value for key: v_char");
    if (!(config.rmse > 0.0)) throw ConfigError("invalid value for key: rmse");
    if (!(config.dt0 > 0.0)) throw ConfigError("invalid value for key: dt0");
    if (!(config.dt1 > 0.0)) throw ConfigError("invalid value for key: dt1");
    if (!(config.t_end > 0.0)) throw ConfigError("invalid value for key: t_end");
    if (config.m_tail < 2) throw ConfigError("invalid value for key: m_tail");
    if (config.lambda_max < 2) throw ConfigError("invalid value for key: lambda_max");
    if (config.max_levels < 2) throw ConfigError("invalid value for key: max_levels");
    check_divides("t_end", "dt0", config.t_end, config.dt0);
    check_divides("dt0", "dt1", config.dt0, config.dt1);
    return config;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str());
}

MlmcOptions mlmc_options_from(const RunConfig& config) {
    MlmcOptions options;
    options.dt0 = config.dt0;
    options.dt1 = config.dt1;
    options.m_tail = config.m_tail;
    options.coupling = config.coupling;
    options.theta1 = config.theta_auto ? -1.0 : config.theta;
    options.fast_level0 = config.fast_level0;
    options.lambda_max = config.lambda_max;
    options.rmse = config.rmse;
    options.max_levels = config.max_levels;
    return options;
}

EstimatorContext estimator_context_from(const RunConfig& config) {
    EstimatorContext ctx;
    ctx.model = VelocityModel{config.model, config.v_char};
    ctx.epsilon = config.epsilon;
    ctx.v_char = config.v_char;
    ctx.t_star = config.t_end;
    ctx.init_velocity = config.init_velocity;
    ctx.seed = config.seed;
    ctx.workers = worker_count();
    return ctx;
}

}  // namespace apmlmc
