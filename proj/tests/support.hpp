#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "apmlmc/parallel.hpp"
#include "apmlmc/rng.hpp"

namespace apmlmc::testing {

struct Moments {
    long n = 0;
    double s1 = 0, s2 = 0, s3 = 0, s4 = 0;

    void add(double x) {
        ++n;
        s1 += x;
        s2 += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
    }
    void merge(const Moments& o) {
        n += o.n;
        s1 += o.s1;
        s2 += o.s2;
        s3 += o.s3;
        s4 += o.s4;
    }
    double mean() const { return s1 / double(n); }
    double raw2() const { return s2 / double(n); }
    double raw3() const { return s3 / double(n); }
    double variance() const {
        return (s2 - s1 * s1 / double(n)) / double(n - 1);
    }
    double se_mean() const { return std::sqrt(variance() / double(n)); }
    // standard error of the sample variance via the fourth central moment
    double se_variance() const {
        const double m = mean(), v = variance();
        const double m4 = s4 / double(n) - 4 * m * s3 / double(n) +
                          6 * m * m * s2 / double(n) - 3 * m * m * m * m;
        const double var_of_var = (m4 - v * v) / double(n);
        return var_of_var > 0 ? std::sqrt(var_of_var) : 0.0;
    }
};

// parallel accumulation of per-particle samples; chunk layout is fixed so the
// merged moments are identical for any worker count
inline Moments sample_moments(long n, int workers,
                              const std::function<double(std::int64_t)>& draw) {
    const std::int64_t chunk = 4096;
    const std::int64_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<Moments> partials(static_cast<std::size_t>(n_chunks));
    parallel_chunks(0, n, chunk, workers,
                    [&](std::int64_t c, std::int64_t begin, std::int64_t end) {
                        Moments local;
                        for (std::int64_t p = begin; p < end; ++p) local.add(draw(p));
                        partials[std::size_t(c)] = local;
                    });
    Moments total;
    for (const auto& partial : partials) total.merge(partial);
    return total;
}

inline std::vector<double> sample_vector(long n, int workers,
                                         const std::function<double(std::int64_t)>& draw) {
    std::vector<double> out(static_cast<std::size_t>(n));
    parallel_chunks(0, n, 4096, workers,
                    [&](std::int64_t, std::int64_t begin, std::int64_t end) {
                        for (std::int64_t p = begin; p < end; ++p)
                            out[std::size_t(p)] = draw(p);
                    });
    return out;
}

// two-sample Kolmogorov-Smirnov statistic (sorts copies)
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        const double fa = double(i) / double(a.size());
        const double fb = double(j) / double(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    return d;
}

inline double ks_two_sample_critical_1pct(std::size_t n, std::size_t m) {
    return 1.628 * std::sqrt(double(n + m) / (double(n) * double(m)));
}

// one-sample KS against a CDF
inline double ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
    std::sort(a.begin(), a.end());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double f = cdf(a[i]);
        d = std::max(d, std::abs(f - double(i) / double(a.size())));
        d = std::max(d, std::abs(f - double(i + 1) / double(a.size())));
    }
    return d;
}

inline double ks_one_sample_critical_1pct(std::size_t n) {
    return 1.628 / std::sqrt(double(n));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// total variation distance between two discrete distributions
inline double total_variation(const std::map<int, double>& p, const std::map<int, double>& q) {
    double tv = 0.0;
    for (const auto& [k, pk] : p) {
        const auto it = q.find(k);
        tv += std::abs(pk - (it == q.end() ? 0.0 : it->second));
    }
    for (const auto& [k, qk] : q)
        if (p.find(k) == p.end()) tv += qk;
    return 0.5 * tv;
}

}  // namespace apmlmc::testing
