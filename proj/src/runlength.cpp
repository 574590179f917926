#include "apmlmc/runlength.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "apmlmc/variance.hpp"

namespace apmlmc {

namespace {

constexpr int kMaxTableSteps = 20000;  // chain work grows as M^2 per lambda*

// Run-count chain over (count omega, trailing status j) for M-1 trials.
// exact=true counts runs of exactly lambda* steps (j = k is "counted, run at
// exactly k successes" and an extra success de-counts into the overflow
// state j = k+1); exact=false counts runs of >= lambda* steps (j = k stays).
std::vector<double> run_count_distribution(int m_steps, double p_nc, int lambda_star,
                                           bool exact) {
    if (lambda_star < 2 || lambda_star > m_steps)
        throw std::invalid_argument("run length chain: need 2 <= lambda* <= M");
    if (!(p_nc > 0.0) || !(p_nc < 1.0))
        throw std::invalid_argument("run length chain: p_nc must be in (0,1)");
    const int k = lambda_star - 1;        // successes forming a lambda*-step run
    const int l = m_steps / lambda_star;  // maximal count
    const int sub = exact ? k + 2 : k + 1;
    // one spare block guards the (provably unreachable) count l+1 transition
    const int blocks = l + 2;
    const double p_c = 1.0 - p_nc;

    std::vector<double> cur(std::size_t(blocks) * sub, 0.0);
    std::vector<double> nxt(cur.size());
    cur[0] = 1.0;  // count 0, no trailing successes
    for (int trial = 0; trial < m_steps - 1; ++trial) {
        std::fill(nxt.begin(), nxt.end(), 0.0);
        for (int omega = 0; omega < blocks; ++omega) {
            const std::size_t base = std::size_t(omega) * sub;
            for (int j = 0; j < sub; ++j) {
                const double mass = cur[base + j];
                if (mass == 0.0) continue;
                nxt[base] += p_c * mass;  // failure resets the trailing run
                if (j < k - 1) {
                    nxt[base + j + 1] += p_nc * mass;
                } else if (j == k - 1) {
                    if (omega + 1 < blocks) nxt[base + sub + k] += p_nc * mass;
                } else if (exact && j == k) {
                    assert(omega >= 1);
                    nxt[base - sub + k + 1] += p_nc * mass;  // run exceeds lambda*
                } else {
                    nxt[base + j] += p_nc * mass;  // overflow / counted-long run
                }
            }
        }
        cur.swap(nxt);
    }

    std::vector<double> dist(std::size_t(l) + 1, 0.0);
    for (int omega = 0; omega <= l; ++omega)
        for (int j = 0; j < sub; ++j) dist[omega] += cur[std::size_t(omega) * sub + j];
    double spill = 0.0;
    for (int j = 0; j < sub; ++j) spill += cur[std::size_t(l + 1) * sub + j];
    const double total = std::accumulate(dist.begin(), dist.end(), spill);
    if (spill > 1e-12 || std::abs(total - 1.0) > 1e-9)
        throw std::runtime_error("run length chain: probability mass check failed");
    return dist;
}

std::vector<double> cumulative(const std::vector<double>& pmf) {
    std::vector<double> cum(pmf.size());
    double c = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        c += pmf[i];
        cum[i] = c;
    }
    return cum;
}

int mean_index(const std::vector<double>& pmf) {
    double mean = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) mean += double(i) * pmf[i];
    const int idx = int(std::lround(mean));
    return std::clamp(idx, 0, int(pmf.size()) - 1);
}

// Inverse transform on a cumulative row: smallest i with u < cum[i].
// Starts near the supplied hint and brackets outward, then bisects.
int sample_cumulative(const std::vector<double>& cum, double u, int hint) {
    const int n = int(cum.size());
    int lo, hi;
    if (u < cum[std::size_t(hint)]) {
        hi = hint;
        int step = 1;
        lo = hint;
        while (lo > 0 && u < cum[std::size_t(lo - 1)]) {
            hi = lo - 1;
            lo = std::max(0, lo - step);
            step *= 2;
        }
        if (lo == 0 && u < cum[0]) return 0;
    } else {
        lo = hint + 1;
        int step = 1;
        hi = lo;
        while (hi < n - 1 && u >= cum[std::size_t(hi)]) {
            lo = hi + 1;
            hi = std::min(n - 1, hi + step);
            step *= 2;
        }
        if (hi == n - 1 && u >= cum[std::size_t(n - 1)]) return n - 1;
    }
    while (lo < hi) {
        const double c_lo = lo > 0 ? cum[std::size_t(lo - 1)] : 0.0;
        const double c_hi = cum[std::size_t(hi)];
        int mid = lo + (hi - lo) / 2;
        if (c_hi > c_lo) {  // interpolate the split from the cumulative mass
            mid = lo + int((u - c_lo) / (c_hi - c_lo) * double(hi - lo));
            mid = std::clamp(mid, lo, hi - 1);
        }
        if (u < cum[std::size_t(mid)])
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

}  // namespace

std::vector<double> run_count_distribution_exact(int m_steps, double p_nc,
                                                 int lambda_star) {
    return run_count_distribution(m_steps, p_nc, lambda_star, true);
}

std::vector<double> run_count_distribution_at_least(int m_steps, double p_nc,
                                                    int lambda_star) {
    return run_count_distribution(m_steps, p_nc, lambda_star, false);
}

RunLengthTables build_tables(int m_steps, double p_nc, int lambda_max) {
    if (lambda_max < 2 || lambda_max > m_steps)
        throw std::invalid_argument("build_tables: need 2 <= lambda_max <= M");
    if (!(p_nc > 0.0) || !(p_nc < 1.0))
        throw std::invalid_argument("build_tables: p_nc must be in (0,1)");
    if (m_steps > kMaxTableSteps)
        throw std::runtime_error("build_tables: M " + std::to_string(m_steps) +
                                 " exceeds table limit " + std::to_string(kMaxTableSteps));

    RunLengthTables tables;
    tables.m_steps = m_steps;
    tables.p_nc = p_nc;
    tables.lambda_max = lambda_max;
    for (int lambda = 2; lambda <= lambda_max; ++lambda) {
        const auto e_pmf = run_count_distribution(m_steps, p_nc, lambda, true);
        const auto g_pmf = run_count_distribution(m_steps, p_nc, lambda, false);
        tables.e_hint.push_back(mean_index(e_pmf));
        tables.g_hint.push_back(mean_index(g_pmf));
        tables.e_rows.push_back(cumulative(e_pmf));
        tables.g_rows.push_back(cumulative(g_pmf));
    }
    return tables;
}

void sample_run_multiset(const RunLengthTables& tables, Rng& rng, RunMultiset& out) {
    out.phi.assign(std::size_t(tables.lambda_max), 0);
    int run_sum = 0;
    int remaining_steps = tables.m_steps;
    for (int lambda = tables.lambda_max; lambda >= 2; --lambda) {
        const std::size_t row = std::size_t(lambda - 2);
        const double u = rng.uniform();
        int phi;
        if (run_sum == 0) {
            phi = sample_cumulative(tables.e_rows[row], u, tables.e_hint[row]);
        } else {
            // draw the G count conditioned on G >= run_sum: an independent
            // draw clamped at run_sum loses several percent of the sum
            // variance, which the level-0 consistency budget cannot absorb
            const auto& g = tables.g_rows[row];
            const int cap = int(g.size()) - 1;
            if (run_sum > cap) {
                phi = 0;
            } else {
                const double base = g[std::size_t(run_sum - 1)];
                const double mass = 1.0 - base;
                phi = mass <= 0.0
                          ? 0
                          : sample_cumulative(g, base + u * mass, tables.g_hint[row]);
            }
        }
        phi = std::max(phi - run_sum, 0);
        remaining_steps -= lambda * phi;
        while (remaining_steps < 0) {
            remaining_steps += lambda;
            --phi;
        }
        run_sum += phi;
        out.phi[std::size_t(lambda - 1)] = phi;
    }
    out.phi[0] = remaining_steps;
}

RunMultiset sample_run_multiset(const RunLengthTables& tables, Rng& rng) {
    RunMultiset out;
    sample_run_multiset(tables, rng, out);
    return out;
}

double fast_level0_xi(const VelocityModel& model, const RunLengthTables& tables,
                      const VelocitySumTable& sum_table, double theta, Rng& rng) {
    if (theta < 0.0 || theta > 1.0)
        throw std::invalid_argument("fast_level0_xi: theta must be in [0,1]");
    const double xi_w = rng.normal();
    if (theta == 1.0) return xi_w;

    thread_local RunMultiset multiset;
    sample_run_multiset(tables, rng, multiset);
    double velocity_sum = 0.0;
    for (int lambda = 1; lambda <= tables.lambda_max; ++lambda) {
        const int phi = multiset.phi[std::size_t(lambda - 1)];
        if (phi == 0) continue;
        velocity_sum += lambda * sample_velocity_sum(model, phi, &sum_table, rng);
    }
    const double vvs = var_velocity_sum(tables.p_nc, tables.m_steps);
    return std::sqrt(theta) * xi_w + std::sqrt(1.0 - theta) * velocity_sum / std::sqrt(vvs);
}

void write_run_length_tables(const RunLengthTables& tables, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", tables.p_nc);
    out << tables.m_steps << ' ' << buf << ' ' << tables.lambda_max << "\n";
    for (int lambda = 2; lambda <= tables.lambda_max; ++lambda) {
        const std::size_t row = std::size_t(lambda - 2);
        for (const char* tag : {"E", "G"}) {
            const auto& cum = tag[0] == 'E' ? tables.e_rows[row] : tables.g_rows[row];
            out << tag << ' ' << lambda;
            for (double c : cum) {
                std::snprintf(buf, sizeof buf, "%.17g", c);
                out << ' ' << buf;
            }
            out << "\n";
        }
    }
}

RunLengthTables read_run_length_tables(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    RunLengthTables tables;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty table file " + path);
    {
        std::istringstream header(line);
        if (!(header >> tables.m_steps >> tables.p_nc >> tables.lambda_max))
            throw std::runtime_error("bad table header in " + path);
    }
    for (int lambda = 2; lambda <= tables.lambda_max; ++lambda) {
        for (const char* tag : {"E", "G"}) {
            if (!std::getline(in, line))
                throw std::runtime_error("truncated table file " + path);
            std::istringstream row(line);
            std::string tag_read;
            int lambda_read = 0;
            if (!(row >> tag_read >> lambda_read) || tag_read != tag ||
                lambda_read != lambda)
                throw std::runtime_error("bad table row in " + path);
            std::vector<double> cum;
            double c = 0.0;
            while (row >> c) cum.push_back(c);
            if (cum.empty()) throw std::runtime_error("empty table row in " + path);
            auto& rows = tag[0] == 'E' ? tables.e_rows : tables.g_rows;
            auto& hints = tag[0] == 'E' ? tables.e_hint : tables.g_hint;
            rows.push_back(std::move(cum));
            // rebuild the search hint from the cumulative row
            const auto& r = rows.back();
            double mean = 0.0, prev = 0.0;
            for (std::size_t i = 0; i < r.size(); ++i) {
                mean += double(i) * (r[i] - prev);
                prev = r[i];
            }
            hints.push_back(std::clamp(int(std::lround(mean)), 0, int(r.size()) - 1));
        }
    }
    return tables;
}

}  // namespace apmlmc
