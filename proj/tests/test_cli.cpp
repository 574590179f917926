#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "apmlmc/cli.hpp"
#include "apmlmc/runlength.hpp"
#include "support.hpp"

using namespace apmlmc;

namespace {

const char* kBaseConfig =
    "# two-speed desk config\n"
    "model = two-speed\n"
    "epsilon = 0.1\n"
    "rmse = 0.05\n"
    "dt0 = 0.5\n"
    "dt1 = 0.01\n"
    "seed = 42\n";

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

std::filesystem::path write_config(const std::string& name, const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << text;
    return path;
}

std::map<std::string, std::string> read_summary(const std::filesystem::path& path) {
    std::map<std::string, std::string> entries;
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        entries[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return entries;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config parsing") {
    const RunConfig config = parse_config_text(kBaseConfig);
    CHECK(config.model == VelocityKind::TwoSpeed);
    CHECK(config.epsilon == 0.1);
    CHECK(config.seed == 42);
    CHECK(config.theta_auto);
    CHECK(config.fast_level0);
    CHECK(config.m_tail == 2);

    CHECK_THROWS_WITH_AS(parse_config_text("model = two-speed\nrmse = 0.01\n"
                                           "dt0 = 0.5\ndt1 = 0.01\n"),
                         "missing key: epsilon", ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_text(std::string(kBaseConfig) + "bogus = 1\n"),
                         "unknown key: bogus", ConfigError);
    CHECK_THROWS_AS(parse_config_text(std::string(kBaseConfig) + "t_end = 0.7\n"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config_text(std::string(kBaseConfig) + "theta = 1.5\n"),
                    ConfigError);
    const RunConfig fixed =
        parse_config_text(std::string(kBaseConfig) + "theta = 0.25\ncoupling = term\n");
    CHECK_FALSE(fixed.theta_auto);
    CHECK(fixed.theta == 0.25);
    CHECK(fixed.coupling == LevelCoupling::TermByTerm);
}

TEST_CASE("missing key exits with code 2") {
    const auto path = write_config("apmlmc_missing_eps.txt",
                                   "model = two-speed\nrmse = 0.01\ndt0 = 0.5\ndt1 = 0.01\n");
    const int code = cli_main({"run", "--config", path.string()});
    CHECK(code == 2);
}

TEST_CASE("run writes the fixed-schema csv files") {
    const auto out_dir = std::filesystem::temp_directory_path() / "apmlmc_run_out";
    std::filesystem::remove_all(out_dir);
    const auto path = write_config("apmlmc_run.txt", kBaseConfig);
    setenv("APMLMC_THREADS", "4", 1);
    REQUIRE(cli_main({"run", "--config", path.string(), "--output", out_dir.string()}) ==
            0);

    const std::string levels = slurp(out_dir / "levels.csv");
    CHECK(levels.rfind("level,dt,samples,mean_diff,var_diff,var_level,cost\n", 0) == 0);
    CHECK(levels.find('\r') == std::string::npos);
    {
        std::istringstream in(levels);
        std::string header, row0;
        std::getline(in, header);
        std::getline(in, row0);
        // level 0 row: index, dt = 5e-1, then the one-step mean near 0.990
        double dt = 0, samples = 0, mean = 0, var = 0;
        int level = -1;
        char comma;
        std::istringstream row(row0);
        row >> level >> comma >> dt >> comma >> samples >> comma >> mean >> comma >> var;
        CHECK(level == 0);
        CHECK(dt == doctest::Approx(0.5));
        const double se = std::sqrt(var / samples);
        CHECK(std::abs(mean - 0.990) < 4.0 * se + 5e-4);
    }

    const auto summary = read_summary(out_dir / "summary.csv");
    CHECK(summary.at("seed") == "42");
    CHECK(summary.at("model") == "two-speed");
    CHECK(summary.at("rmse") == "0.050000000000000003");
    CHECK(summary.count("estimate") == 1);
    CHECK(summary.count("total_cost") == 1);
    CHECK(summary.at("converged") == "true");
    const double estimate = std::stod(summary.at("estimate"));
    CHECK(std::abs(estimate - 0.980) < 3.0 * 0.05);
}

TEST_CASE("identical runs produce byte-identical outputs under 1, 2, 8 workers") {
    const auto path = write_config("apmlmc_det.txt", kBaseConfig);
    const auto out_dir = std::filesystem::temp_directory_path() / "apmlmc_det_out";
    std::filesystem::remove_all(out_dir);
    std::string reference;
    for (const char* workers : {"1", "2", "8", "2"}) {
        setenv("APMLMC_THREADS", workers, 1);
        REQUIRE(cli_main({"run", "--config", path.string(), "--output",
                          out_dir.string()}) == 0);
        const std::string bytes =
            slurp(out_dir / "levels.csv") + slurp(out_dir / "summary.csv");
        if (reference.empty())
            reference = bytes;
        else
            CHECK(bytes == reference);
    }
}

TEST_CASE("seed flag overrides the config") {
    const auto path = write_config("apmlmc_seed.txt", kBaseConfig);
    const auto out_a = std::filesystem::temp_directory_path() / "apmlmc_seed_a";
    const auto out_b = std::filesystem::temp_directory_path() / "apmlmc_seed_b";
    std::filesystem::remove_all(out_a);
    std::filesystem::remove_all(out_b);
    setenv("APMLMC_THREADS", "4", 1);
    REQUIRE(cli_main({"run", "--config", path.string(), "--seed", "7", "--output",
                      out_a.string()}) == 0);
    REQUIRE(cli_main({"run", "--config", path.string(), "--seed", "9", "--output",
                      out_b.string()}) == 0);
    CHECK(read_summary(out_a / "summary.csv").at("seed") == "7");
    CHECK(slurp(out_a / "levels.csv") != slurp(out_b / "levels.csv"));
}

TEST_CASE("tables subcommand persists normalized rows and rebuilds identically") {
    const auto out_a = std::filesystem::temp_directory_path() / "apmlmc_tables_a.txt";
    const auto out_b = std::filesystem::temp_directory_path() / "apmlmc_tables_b.txt";
    REQUIRE(cli_main({"tables", "--m", "12", "--epsilon", "0.1", "--dt", "0.01",
                      "--lambda-max", "6", "--out", out_a.string()}) == 0);
    REQUIRE(cli_main({"tables", "--m", "12", "--epsilon", "0.1", "--dt", "0.01",
                      "--lambda-max", "6", "--out", out_b.string()}) == 0);
    CHECK(slurp(out_a) == slurp(out_b));

    const RunLengthTables tables = read_run_length_tables(out_a.string());
    CHECK(tables.m_steps == 12);
    CHECK(tables.lambda_max == 6);
    CHECK(tables.p_nc == doctest::Approx(0.5).epsilon(1e-15));
    for (const auto* rows : {&tables.e_rows, &tables.g_rows})
        for (const auto& row : *rows) CHECK(std::abs(row.back() - 1.0) <= 1e-9);

    // persisted values equal the freshly built chain output
    const RunLengthTables rebuilt = build_tables(12, 0.5, 6);
    for (std::size_t r = 0; r < rebuilt.e_rows.size(); ++r)
        for (std::size_t i = 0; i < rebuilt.e_rows[r].size(); ++i)
            CHECK(std::abs(tables.e_rows[r][i] - rebuilt.e_rows[r][i]) <= 1e-15);
}

TEST_CASE("analyze prints the coupling quantities") {
    const auto path = write_config("apmlmc_analyze.txt", kBaseConfig);
    RunConfig config = parse_config_file(path.string());
    std::ostringstream out;
    REQUIRE(cmd_analyze(config, out) == 0);
    const std::string report = out.str();
    CHECK(report.find("theta_star = 0.608726469178") != std::string::npos);
    CHECK(report.find("velocity_sum_variance = 146") != std::string::npos);
    CHECK(report.find("double_sum_expectation = 137") != std::string::npos);

    // M = 1 with theta = 1: perfectly coupled pair, predicted variance 0
    RunConfig trivial = parse_config_text(
        "model = two-speed\nepsilon = 0.1\nrmse = 0.05\ndt0 = 0.5\ndt1 = 0.5\n"
        "theta = 1\n");
    std::ostringstream out2;
    REQUIRE(cmd_analyze(trivial, out2) == 0);
    std::istringstream lines(out2.str());
    std::string line;
    bool found = false;
    while (std::getline(lines, line)) {
        if (line.rfind("predicted_pair_variance = ", 0) == 0) {
            found = true;
            CHECK(std::abs(std::stod(line.substr(line.find('=') + 1))) < 1e-12);
        }
    }
    CHECK(found);
}

TEST_CASE("trace rows decompose exactly and repeat with the seed") {
    const auto path = write_config(
        "apmlmc_trace.txt",
        "model = two-speed\nepsilon = 0.1\nrmse = 0.05\ndt0 = 1.0\ndt1 = 0.01\n"
        "t_end = 1.0\nseed = 5\n");
    const auto out_dir = std::filesystem::temp_directory_path() / "apmlmc_trace_out";
    std::filesystem::remove_all(out_dir);
    REQUIRE(cli_main({"trace", "--config", path.string(), "--units", "1", "--output",
                      out_dir.string()}) == 0);
    const std::string first = slurp(out_dir / "trace.csv");

    std::istringstream in(first);
    std::string line;
    std::getline(in, line);
    CHECK(line ==
          "t,x_fine,x_coarse,x_fine_diffusion_only,x_fine_transport_only,"
          "x_coarse_diffusion_only,x_coarse_transport_only");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream row(line);
        double t, xf, xc, fd, ft, cd, ct;
        char comma;
        row >> t >> comma >> xf >> comma >> xc >> comma >> fd >> comma >> ft >> comma >>
            cd >> comma >> ct;
        CHECK(std::abs(xf - (fd + ft)) <= 1e-12);
        CHECK(std::abs(xc - (cd + ct)) <= 1e-12);
    }
    CHECK(rows == 101);  // 100 fine rows + 1 coarse row per unit

    REQUIRE(cli_main({"trace", "--config", path.string(), "--units", "1", "--output",
                      out_dir.string()}) == 0);
    CHECK(slurp(out_dir / "trace.csv") == first);
}

TEST_CASE("tables subcommand can emit the velocity-sum table") {
    const auto out = std::filesystem::temp_directory_path() / "apmlmc_tables_rl.txt";
    const auto vs = std::filesystem::temp_directory_path() / "apmlmc_tables_vs.txt";
    REQUIRE(cli_main({"tables", "--m", "8", "--epsilon", "0.1", "--dt", "0.01",
                      "--lambda-max", "4", "--out", out.string(), "--velocity-sums",
                      vs.string()}) == 0);
    const VelocitySumTable table = read_velocity_sum_table(vs.string());
    CHECK(table.max_phi == 8);
    CHECK(table.rows[1][0] == doctest::Approx(0.5).epsilon(1e-12));  // P(|sigma_2|=0)
}

TEST_CASE("term-by-term crossing sits at a coarser dt1 than combined") {
    // paper series: the term-by-term score changes sign between 2.5e-3 and
    // 1.25e-3 while the combined score is still strongly positive there
    const auto out_dir = std::filesystem::temp_directory_path() / "apmlmc_cross_out";
    auto scores_for = [&](const char* coupling) {
        std::filesystem::remove_all(out_dir);
        RunConfig config = parse_config_text(
            std::string("model = two-speed\nepsilon = 0.1\nrmse = 0.01\ndt0 = 0.5\n"
                        "dt1 = 0.01\nfast_level0 = false\nseed = 77\ncoupling = ") +
            coupling + "\n");
        config.output_dir = out_dir.string();
        REQUIRE(cmd_sweep(config, {2.5e-3, 1.25e-3}) == 0);
        std::ifstream in(out_dir / "sweep.csv");
        std::string line;
        std::getline(in, line);
        std::vector<double> scores;
        while (std::getline(in, line)) {
            double dt1, cost, score;
            char comma;
            std::istringstream row(line);
            row >> dt1 >> comma >> cost >> comma >> score;
            scores.push_back(score);
        }
        return scores;
    };
    setenv("APMLMC_THREADS", "8", 1);
    const auto term = scores_for("term");
    const auto combined = scores_for("combined");
    REQUIRE(term.size() == 2);
    REQUIRE(combined.size() == 2);
    CHECK(term[0] > 0.0);
    CHECK(term[1] < 0.0);  // term-by-term crosses inside the bracket
    CHECK(combined[0] > 0.0);
    CHECK(combined[1] > 0.0);  // combined crosses much further down
}

TEST_CASE("single-point sweep writes one row") {
    const auto path = write_config("apmlmc_sweep.txt",
                                   std::string(kBaseConfig) + "fast_level0 = false\n");
    const auto out_dir = std::filesystem::temp_directory_path() / "apmlmc_sweep_out";
    std::filesystem::remove_all(out_dir);
    setenv("APMLMC_THREADS", "4", 1);
    REQUIRE(cli_main({"sweep", "--config", path.string(), "--dt1-grid", "0.01",
                      "--output", out_dir.string()}) == 0);
    const std::string sweep = slurp(out_dir / "sweep.csv");
    CHECK(sweep.rfind("dt1,total_cost,leave_out_score,estimate\n", 0) == 0);
    CHECK(std::count(sweep.begin(), sweep.end(), '\n') == 2);
}

}  // TEST_SUITE
