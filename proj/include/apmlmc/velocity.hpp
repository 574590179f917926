#pragma once

#include <string>
#include <vector>

#include "apmlmc/rng.hpp"

namespace apmlmc {

enum class VelocityKind { TwoSpeed, Gaussian };

// Symmetric post-collision velocity distribution M(v) with characteristic
// velocity v_char. Draws are produced in normalized form B(v) with mean 0 and
// variance 1; callers scale by the characteristic velocity of the scheme.
struct VelocityModel {
    VelocityKind kind = VelocityKind::TwoSpeed;
    double v_char = 1.0;
};

// Unit draw from B: +-1 for the two-speed model, standard normal otherwise.
double sample_unit_velocity(const VelocityModel& model, Rng& rng);

// Cumulative distributions of |sigma_phi| where sigma_phi is the sum of phi
// independent two-speed unit velocities. Row phi covers the support
// {phi mod 2, phi mod 2 + 2, ..., phi} in increasing order, so a head-first
// scan terminates quickly (small magnitudes carry most of the mass).
struct VelocitySumTable {
    int max_phi = 0;
    std::vector<std::vector<double>> rows;  // rows[phi-1]: cumulative P(|sigma| <= k)

    double value_at(int phi, int index) const { return phi % 2 + 2.0 * index; }
};

// Two-speed only; Gaussian sums have a closed form and take no table.
VelocitySumTable build_velocity_sum_table(const VelocityModel& model, int max_phi);

// Draw from S(phi) at cost independent of phi. TwoSpeed requires a table with
// max_phi >= phi; Gaussian draws are normal with variance phi.
double sample_velocity_sum(const VelocityModel& model, int phi,
                           const VelocitySumTable* table, Rng& rng);

void write_velocity_sum_table(const VelocitySumTable& table, const std::string& path);
VelocitySumTable read_velocity_sum_table(const std::string& path);

}  // namespace apmlmc
