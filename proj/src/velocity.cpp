#include "apmlmc/velocity.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace apmlmc {

namespace {

constexpr int kMaxTablePhi = 4096;  // O(max_phi^2) storage

// P(|sigma_phi| = k) from the symmetric binomial, k in the row support
double abs_sum_pmf(int phi, int k) {
    const int j = (phi + k) / 2;  // number of +1 draws
    const double log_p = std::lgamma(phi + 1.0) - std::lgamma(j + 1.0) -
                         std::lgamma(phi - j + 1.0) - phi * std::log(2.0);
    const double p = std::exp(log_p);
    return k == 0 ? p : 2.0 * p;
}

}  // namespace

double sample_unit_velocity(const VelocityModel& model, Rng& rng) {
    return model.kind == VelocityKind::TwoSpeed ? rng.sign() : rng.normal();
}

VelocitySumTable build_velocity_sum_table(const VelocityModel& model, int max_phi) {
    if (model.kind != VelocityKind::TwoSpeed)
        throw std::invalid_argument(
            "velocity sum table: only the two-speed model is tabulated");
    if (max_phi < 1)
        throw std::invalid_argument("velocity sum table: max_phi must be >= 1");
    if (max_phi > kMaxTablePhi)
        throw std::runtime_error("velocity sum table: max_phi " +
                                 std::to_string(max_phi) + " exceeds table limit " +
                                 std::to_string(kMaxTablePhi));

    VelocitySumTable table;
    table.max_phi = max_phi;
    table.rows.resize(max_phi);
    for (int phi = 1; phi <= max_phi; ++phi) {
        auto& row = table.rows[phi - 1];
        row.reserve(phi / 2 + 1);
        double cum = 0.0;
        for (int k = phi % 2; k <= phi; k += 2) {
            cum += abs_sum_pmf(phi, k);
            row.push_back(cum);
        }
        if (std::abs(row.back() - 1.0) > 1e-12)
            throw std::runtime_error("velocity sum table: row does not sum to 1");
    }
    return table;
}

double sample_velocity_sum(const VelocityModel& model, int phi,
                           const VelocitySumTable* table, Rng& rng) {
    if (phi < 0) throw std::invalid_argument("sample_velocity_sum: phi must be >= 0");
    if (phi == 0) return 0.0;
    if (model.kind == VelocityKind::Gaussian)
        return std::sqrt(double(phi)) * rng.normal();

    if (table == nullptr || phi > table->max_phi)
        throw std::out_of_range("sample_velocity_sum: phi exceeds table max_phi");
    const auto& row = table->rows[phi - 1];
    const double u = rng.uniform();
    std::size_t i = 0;
    while (i + 1 < row.size() && u >= row[i]) ++i;
    return rng.sign() * table->value_at(phi, int(i));
}

void write_velocity_sum_table(const VelocitySumTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << table.max_phi << "\n";
    char buf[32];
    for (int phi = 1; phi <= table.max_phi; ++phi) {
        out << "S " << phi;
        for (double c : table.rows[phi - 1]) {
            std::snprintf(buf, sizeof buf, "%.17g", c);
            out << ' ' << buf;
        }
        out << "\n";
    }
}

VelocitySumTable read_velocity_sum_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    VelocitySumTable table;
    if (!(in >> table.max_phi) || table.max_phi < 1)
        throw std::runtime_error("bad velocity sum table header in " + path);
    table.rows.resize(table.max_phi);
    std::string line;
    std::getline(in, line);
    for (int phi = 1; phi <= table.max_phi; ++phi) {
        if (!std::getline(in, line))
            throw std::runtime_error("truncated velocity sum table in " + path);
        std::istringstream row(line);
        std::string tag;
        int phi_read = 0;
        if (!(row >> tag >> phi_read) || tag != "S" || phi_read != phi)
            throw std::runtime_error("bad velocity sum table row in " + path);
        double c = 0.0;
        while (row >> c) table.rows[phi - 1].push_back(c);
        if (table.rows[phi - 1].size() != std::size_t(phi / 2 + 1))
            throw std::runtime_error("bad velocity sum table row length in " + path);
    }
    return table;
}

}  // namespace apmlmc
