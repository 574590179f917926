#pragma once

#include <string>
#include <vector>

#include "apmlmc/rng.hpp"
#include "apmlmc/velocity.hpp"

namespace apmlmc {

// Cumulative distributions of the Bernoulli run statistics over the M-1
// boundaries of a coarse interval split into M fine steps (success = no
// collision, probability p_nc):
//   E(lambda*): number of runs of exactly lambda* fine steps
//   G(lambda*): number of runs of at least lambda* fine steps
// Rows cover omega = 0..floor(M/lambda*) for lambda* = 2..lambda_max.
struct RunLengthTables {
    int m_steps = 0;  // M
    double p_nc = 0.0;
    int lambda_max = 0;  // Lambda

    std::vector<std::vector<double>> e_rows;  // index lambda*-2
    std::vector<std::vector<double>> g_rows;
    std::vector<int> e_hint;  // search start near the mean
    std::vector<int> g_hint;
};

RunLengthTables build_tables(int m_steps, double p_nc, int lambda_max);

// Exact run-count distributions via the embedded Markov chain, applied as
// M-1 sparse transition passes (exposed for the enumeration oracle tests).
std::vector<double> run_count_distribution_exact(int m_steps, double p_nc, int lambda_star);
std::vector<double> run_count_distribution_at_least(int m_steps, double p_nc, int lambda_star);

// Counts phi[lambda*-1] of runs per length, satisfying
// sum lambda* phi_{lambda*} = M by construction.
struct RunMultiset {
    std::vector<int> phi;  // size lambda_max, index lambda*-1

    long weighted_sum() const {
        long s = 0;
        for (std::size_t i = 0; i < phi.size(); ++i) s += long(i + 1) * phi[i];
        return s;
    }
};

void sample_run_multiset(const RunLengthTables& tables, Rng& rng, RunMultiset& out);
RunMultiset sample_run_multiset(const RunLengthTables& tables, Rng& rng);

// Level-0 Brownian substitute distributed like the combined-coupling coarse
// increment: sqrt(theta) N(0,1) + sqrt(1-theta) (sum lambda* sigma) / sqrt(V),
// at cost O(lambda_max) per draw, independent of M.
double fast_level0_xi(const VelocityModel& model, const RunLengthTables& tables,
                      const VelocitySumTable& sum_table, double theta, Rng& rng);

// Text format: line 1 "M p_nc lambda_max", then per lambda* = 2..Lambda one
// E line and one G line of cumulative probabilities.
void write_run_length_tables(const RunLengthTables& tables, const std::string& path);
RunLengthTables read_run_length_tables(const std::string& path);

}  // namespace apmlmc
