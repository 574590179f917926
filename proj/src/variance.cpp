#include "apmlmc/variance.hpp"

#include <cmath>
#include <stdexcept>

namespace apmlmc {

namespace {

// p_nc^M - 1 without cancellation
double pow_minus_one(double p_nc, double M) {
    return std::expm1(M * std::log1p(-(1.0 - p_nc)));
}

// sum_{d=1}^{N-1} (N - d) x^(d-1)
double weighted_geometric_sum(double x, long N) {
    double sum = 0.0, xp = 1.0;
    for (long d = 1; d < N; ++d) {
        sum += double(N - d) * xp;
        xp *= x;
    }
    return sum;
}

}  // namespace

LevelPairParams::LevelPairParams(double epsilon, double v_char, double dt_fine,
                                 int refinement_, long n_coarse_steps_)
    : fine(epsilon, dt_fine, v_char),
      coarse(epsilon, dt_fine * refinement_, v_char),
      refinement(refinement_),
      n_coarse_steps(n_coarse_steps_) {
    if (refinement < 1)
        throw std::invalid_argument("LevelPairParams: refinement must be >= 1");
    if (n_coarse_steps < 1)
        throw std::invalid_argument("LevelPairParams: n_coarse_steps must be >= 1");
}

double var_velocity_sum(double p_nc, int M, bool& at_limit) {
    if (M < 1) throw std::invalid_argument("var_velocity_sum: M must be >= 1");
    if (p_nc < 0.0 || p_nc > 1.0)
        throw std::invalid_argument("var_velocity_sum: p_nc must be in [0,1]");
    at_limit = false;
    if (p_nc == 0.0) return double(M);
    if (p_nc == 1.0) {
        at_limit = true;  // singular closed form; fully correlated limit
        return double(M) * double(M);
    }
    const double p_c = 1.0 - p_nc;
    double numerator;
    if (double(M) * p_c < 1e-4) {
        // p_nc^M + M p_c - 1 = sum_{k>=2} C(M,k) (-p_c)^k, a few terms suffice
        double term = 0.5 * double(M) * double(M - 1) * p_c * p_c;
        numerator = term;
        for (int k = 2; k < 12 && term != 0.0; ++k) {
            term *= -p_c * double(M - k) / double(k + 1);
            numerator += term;
        }
    } else {
        numerator = pow_minus_one(p_nc, M) + double(M) * p_c;
    }
    return double(M) + 2.0 * p_nc * numerator / (p_c * p_c);
}

double var_velocity_sum(double p_nc, int M) {
    bool at_limit = false;
    return var_velocity_sum(p_nc, M, at_limit);
}

double pair_velocity_expectation(int m, int m2, double p_nc, int M) {
    if (m < 0 || m2 < 0 || m >= M || m2 >= M)
        throw std::invalid_argument("pair_velocity_expectation: indices must be in [0, M)");
    const int lo = std::min(m, m2), hi = std::max(m, m2);
    return (1.0 - std::pow(p_nc, lo)) * (1.0 - std::pow(p_nc, M - hi)) *
           std::pow(p_nc, hi - lo);
}

double double_sum_expectation(double p_nc, int M) {
    if (M < 1) throw std::invalid_argument("double_sum_expectation: M must be >= 1");
    if (M == 1) return 0.0;  // single term, killed by the boundary factor
    if (p_nc == 0.0) return double(M) - 1.0;
    const double p_c = 1.0 - p_nc;

    if (p_c >= 0.01) {
        const double pM = std::pow(p_nc, M);
        const double t1 = 2.0 *
                          (3.0 * pM - (M + 1.0) * p_nc * p_nc + (M - 2.0) * p_nc) /
                          (p_c * p_c);
        const double t2 = double(M) - 2.0 * p_nc / p_c - 1.0;
        const double t3 = (2.0 * (M - 2.0) / p_c + (M - 1.0) * (M + 2.0 / p_c - 1.0)) * pM;
        return t1 + t2 + t3;
    }
    if (M <= 2048) {
        double sum = 0.0;
        for (int m = 0; m < M; ++m)
            for (int m2 = 0; m2 < M; ++m2)
                sum += pair_velocity_expectation(m, m2, p_nc, M);
        return sum;
    }
    // near p_c = 0 with large M the compact form cancels badly; sum the
    // worked-out inner m* sums per offset instead, with stable p - p^K
    const double log_pnc = std::log1p(-p_c);
    const double pM = std::exp(M * log_pnc);
    double sum = (M - 1.0) * (1.0 + pM) + 2.0 * p_nc * pow_minus_one(p_nc, M - 1) / p_c;
    double p_dm = p_nc;
    for (int dm = 1; dm <= M - 2; ++dm) {
        const int K = M - dm;
        const double pK = std::exp(K * log_pnc);
        const double p_minus_pK = -p_nc * std::expm1((K - 1) * log_pnc);
        const double inner = (1.0 + pK) * (K - 1.0) - 2.0 * p_minus_pK / p_c;
        sum += 2.0 * inner * p_dm;
        p_dm *= p_nc;
    }
    return sum;
}

CouplingWeights coupling_weights(const LevelPairParams& params, double theta) {
    if (theta < 0.0 || theta > 1.0)
        throw std::invalid_argument("coupling_weights: theta must be in [0,1]");
    const double dt_c = params.coarse.dt;
    const double c1 = 2.0 * dt_c *
                      std::sqrt(params.fine.diffusion_coeff() * params.coarse.diffusion_coeff());
    const double vvs = var_velocity_sum(params.fine.no_collision_prob(), params.refinement);
    const double c2 = params.fine.dt * params.fine.scaled_v_char() *
                      std::sqrt(2.0 * dt_c * params.coarse.diffusion_coeff() / vvs) *
                      double_sum_expectation(params.fine.no_collision_prob(), params.refinement);
    return CouplingWeights{c1, c2, std::sqrt(theta) * c1, std::sqrt(1.0 - theta) * c2};
}

double optimal_theta(const LevelPairParams& params) {
    const CouplingWeights w = coupling_weights(params, 1.0);
    return w.c1 * w.c1 / (w.c1 * w.c1 + w.c2 * w.c2);
}

double per_step_pair_variance(const LevelPairParams& params, double theta) {
    const double eps = params.fine.epsilon;
    const int M = params.refinement;
    const double dt_f = params.fine.dt, dt_c = params.coarse.dt;
    const double v_f = params.fine.scaled_v_char(), v_c = params.coarse.scaled_v_char();
    const double p_nc = params.fine.no_collision_prob();
    const CouplingWeights w = coupling_weights(params, theta);

    const double diffusion = 2.0 * M * dt_f * params.fine.diffusion_coeff() +
                             2.0 * dt_c * params.coarse.diffusion_coeff();
    const double transport =
        M * dt_f * dt_f * v_f * v_f - dt_c * dt_c * v_c * v_c +
        2.0 * eps * eps * v_f * v_f *
            (M * dt_f + (eps * eps + dt_f) * pow_minus_one(p_nc, M));
    return diffusion + transport - 2.0 * w.cov_ww - 2.0 * w.cov_tw;
}

double cross_step_covariance(const LevelPairParams& params) {
    const long N = params.n_coarse_steps;
    if (N < 2) return 0.0;
    const int M = params.refinement;
    const double p = params.fine.no_collision_prob();
    const double P = params.coarse.no_collision_prob();
    const double q = std::pow(p, M);
    const double beta = std::pow(P, 1.0 / M);
    const double af = params.fine.dt * params.fine.scaled_v_char();
    const double ac = params.coarse.dt * params.coarse.scaled_v_char();

    const double ff = af * af * (1.0 - q) * (1.0 - q) / ((1.0 - p) * (1.0 - p)) * p *
                      weighted_geometric_sum(q, N);
    const double cc = ac * ac * P * weighted_geometric_sum(P, N);

    // E_ii = sum_{k=1}^{M-1} p^k (1 - beta^(M-k)): interval-internal renewal,
    // summed in ascending powers of p so large-M tails underflow harmlessly
    double e_ii = 0.0;
    {
        double pk = 1.0;
        double bq = P / beta;  // beta^(M-k) at k = 1
        for (int k = 1; k < M; ++k) {
            pk *= p;
            if (pk == 0.0) break;
            e_ii += pk * (1.0 - bq);
            bq /= beta;
        }
    }
    // sum_pb = sum_{m=0}^{M-1} p^m beta^(M-m); sum_p = sum_{m=0}^{M-1} p^m
    double sum_pb = 0.0, sum_p = 0.0;
    {
        double pm = 1.0, bMm = std::pow(beta, M);
        for (int m = 0; m < M; ++m) {
            sum_pb += pm * bMm;
            sum_p += pm;
            pm *= p;
            bMm /= beta;
        }
    }

    const double a = (1.0 - P) / (1.0 - q);  // stationary renewal weight
    double st = 0.0, ts = 0.0;
    double qn = 1.0;  // q^n
    for (long n = 0; n + 1 < N; ++n) {
        const double r = a + (1.0 - a) * qn;  // shared-initialization weight
        const long K = N - 1 - n;
        const double g1 = (1.0 - std::pow(P, double(K))) / (1.0 - P);
        const double g2 = q * (1.0 - std::pow(q, double(K))) / (1.0 - q);
        st += (e_ii + sum_pb * r) * g1;
        ts += r * g2;
        qn *= q;
    }
    st *= af * ac;
    ts *= af * ac * sum_p;
    return ff + cc - st - ts;
}

double cross_step_covariance_stationary(const LevelPairParams& params) {
    const long N = params.n_coarse_steps;
    if (N < 2) return 0.0;
    const int M = params.refinement;
    const double eps = params.fine.epsilon;
    const double p = params.fine.no_collision_prob();
    const double P = params.coarse.no_collision_prob();
    const double q = std::pow(p, M);
    const double af = params.fine.dt * params.fine.scaled_v_char();
    const double ac = params.coarse.dt * params.coarse.scaled_v_char();

    // A*B with A = eps^2 vt^2 (p^(1-M) + p^(M+1) - 2p) - dt_c^2 v_c^2, evaluated
    // in the overflow-safe split A*B = FF - dt_c^2 v_c^2 B
    const double B = q * weighted_geometric_sum(q, N);
    const double C = P * weighted_geometric_sum(P, N);
    const double ff = af * af * (1.0 - q) * (1.0 - q) / ((1.0 - p) * (1.0 - p)) * p *
                      weighted_geometric_sum(q, N);
    const double stuff =
        af / (eps * eps * params.coarse.scaled_v_char()) *
        ((P - q) / (1.0 - q) *
             (1.0 / params.fine.collision_prob() - M * q / (1.0 - q)) +
         eps * eps / params.fine.dt);
    return (ff - ac * ac * B) + C * ac * ac * (1.0 - stuff);
}

double total_pair_variance(const LevelPairParams& params, double theta) {
    // the per-step transport cross term Cov(sum dT_f, dT_c) enters the
    // stationary block with weight a = p_c,coarse / (1 - p_nc^M); under the
    // shared initial draw the step-n weight is R(n) = a + (1-a) q^n, so the
    // stationary assembly is corrected by the geometric excess
    const long N = params.n_coarse_steps;
    const int M = params.refinement;
    const double p = params.fine.no_collision_prob();
    const double P = params.coarse.no_collision_prob();
    const double q = std::pow(p, M);
    const double a = (1.0 - P) / (1.0 - q);
    const double af = params.fine.dt * params.fine.scaled_v_char();
    const double ac = params.coarse.dt * params.coarse.scaled_v_char();
    const double sum_p = (1.0 - q) / (1.0 - p);
    double geo = 0.0, qn = 1.0;
    for (long n = 0; n < N; ++n) {
        geo += qn;
        qn *= q;
    }
    return double(N) * per_step_pair_variance(params, theta) -
           2.0 * af * ac * sum_p * (1.0 - a) * geo +
           2.0 * cross_step_covariance(params);
}

}  // namespace apmlmc
