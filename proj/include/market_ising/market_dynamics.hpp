#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "market_ising/errors.hpp"
#include "market_ising/lattice.hpp"
#include "market_ising/rng.hpp"

namespace market_ising {

// P ("Park and Shop", drawn blue) and W ("Welcome", drawn red).
enum class Company : std::uint8_t { P = 0, W = 1 };

constexpr Company complement(Company c) noexcept { return c == Company::P ? Company::W : Company::P; }

constexpr const char* to_string(Company c) noexcept { return c == Company::P ? "P" : "W"; }

// One shop per mall: every site holds exactly one company.
class ShopConfiguration {
public:
    ShopConfiguration() = default;
    explicit ShopConfiguration(std::size_t site_count, Company fill = Company::P)
        : occupancy_(site_count, fill) {}
    explicit ShopConfiguration(std::vector<Company> occupancy) : occupancy_(std::move(occupancy)) {}

    std::size_t size() const noexcept { return occupancy_.size(); }

    Company operator[](std::size_t i) const noexcept { return occupancy_[i]; }
    Company& operator[](std::size_t i) noexcept { return occupancy_[i]; }

    Company at(SiteId s) const {
        if (s.index >= size()) throw InvalidSite("site " + std::to_string(s.index) + " out of range");
        return occupancy_[s.index];
    }

    void flip(std::size_t i) noexcept { occupancy_[i] = complement(occupancy_[i]); }

    std::size_t count(Company c) const noexcept {
        std::size_t n = 0;
        for (Company x : occupancy_) n += (x == c);
        return n;
    }
    std::size_t count_p() const noexcept { return count(Company::P); }
    std::size_t count_w() const noexcept { return count(Company::W); }

    const std::vector<Company>& occupancy() const noexcept { return occupancy_; }

    friend bool operator==(const ShopConfiguration&, const ShopConfiguration&) = default;

private:
    std::vector<Company> occupancy_;
};

inline ShopConfiguration swap_companies(ShopConfiguration config) {
    for (std::size_t i = 0; i < config.size(); ++i) config.flip(i);
    return config;
}

inline void validate_temperature(double temperature) {
    if (!(temperature > 0.0) || std::isnan(temperature)) {
        throw InvalidTemperature("temperature must be positive, got " + std::to_string(temperature));
    }
}

// What a replica contributes to the fitness: its share after the last step,
// or its share averaged over steps 1..steps.
enum class ShareAverage { FinalState, Trajectory };

struct McParams {
    double temperature = 1.0;
    std::size_t steps = 50;
    std::size_t replicas = 20;
    std::uint64_t seed = 0;
    ShareAverage average = ShareAverage::FinalState;

    double beta() const noexcept { return 1.0 / temperature; }

    void validate() const {
        validate_temperature(temperature);
        if (replicas == 0) throw ValidationError("replicas", "must be positive");
    }
};

inline void check_size(const ShopConfiguration& config, const LatticeTopology& topology) {
    if (config.size() != topology.site_count()) {
        throw SizeMismatch("configuration has " + std::to_string(config.size()) +
                           " sites, lattice has " + std::to_string(topology.site_count()));
    }
}

// Sum over nearest-neighbour edges: -1 for a same-company pair, +1 otherwise.
inline long total_energy(const ShopConfiguration& config, const LatticeTopology& topology) {
    check_size(config, topology);
    long twice = 0;
    for (std::size_t i = 0; i < config.size(); ++i) {
        for (SiteId j : topology.neighbors_unchecked(i)) twice += (config[i] == config[j.index]) ? -1 : 1;
    }
    return twice / 2;
}

inline int matching_neighbors(const ShopConfiguration& config, const LatticeTopology& topology,
                              std::size_t site) noexcept {
    int k = 0;
    const Company own = config[site];
    for (SiteId j : topology.neighbors_unchecked(site)) k += (config[j.index] == own);
    return k;
}

// Energy change if `site` switched company. With k matching neighbours: 4k - 12.
inline int delta_energy(const ShopConfiguration& config, const LatticeTopology& topology, SiteId site) {
    topology.check_site(site);
    check_size(config, topology);
    return 4 * matching_neighbors(config, topology, site.index) - 2 * static_cast<int>(kDegree);
}

// 1 / (1 + exp(2 dE / T)), evaluated without overflow for any exponent.
inline double switch_probability(double delta_e, double temperature) {
    validate_temperature(temperature);
    const double x = 2.0 * delta_e / temperature;
    if (x > 0.0) {
        const double e = std::exp(-x);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(x));
}

// Switch probabilities indexed by the number of matching neighbours.
class SwitchTable {
public:
    explicit SwitchTable(double temperature) {
        for (std::size_t k = 0; k <= kDegree; ++k) {
            p_[k] = switch_probability(4.0 * static_cast<double>(k) - 2.0 * kDegree, temperature);
        }
    }
    double operator[](int matching) const noexcept { return p_[static_cast<std::size_t>(matching)]; }

private:
    std::array<double, kDegree + 1> p_{};
};

// One MC step in place: N random-site attempts, two draws per attempt.
inline void mc_step_in_place(ShopConfiguration& config, const LatticeTopology& topology,
                             const SwitchTable& table, RngStream& rng) {
    const std::size_t n = config.size();
    for (std::size_t attempt = 0; attempt < n; ++attempt) {
        const auto site = static_cast<std::size_t>(rng.below(n));
        const double u = rng.uniform();
        if (u < table[matching_neighbors(config, topology, site)]) config.flip(site);
    }
}

inline ShopConfiguration mc_step(ShopConfiguration config, const LatticeTopology& topology,
                                 const McParams& params, RngStream& rng) {
    check_size(config, topology);
    params.validate();
    mc_step_in_place(config, topology, SwitchTable(params.temperature), rng);
    return config;
}

inline double market_share(const ShopConfiguration& config, Company company) {
    if (config.size() == 0) return 0.0;
    return static_cast<double>(config.count(company)) / static_cast<double>(config.size());
}

inline double magnetization(const ShopConfiguration& config) {
    if (config.size() == 0) return 0.0;
    const auto p = static_cast<double>(config.count_p());
    const auto w = static_cast<double>(config.count_w());
    return (p - w) / static_cast<double>(config.size());
}

struct TracePoint {
    std::size_t step = 0;
    double share_p = 0.0;
    long energy = 0;
    double magnetization = 0.0;
};

struct DynamicsResult {
    ShopConfiguration final_state;
    // Row 0 is the input state; row s is the state after s steps. Empty unless traced.
    std::vector<TracePoint> trace;
};

inline DynamicsResult run_dynamics(ShopConfiguration config, const LatticeTopology& topology,
                                   const McParams& params, RngStream& rng, bool with_trace = false) {
    check_size(config, topology);
    params.validate();
    const SwitchTable table(params.temperature);
    DynamicsResult result;
    const auto record = [&](std::size_t step) {
        result.trace.push_back({step, market_share(config, Company::P), total_energy(config, topology),
                                magnetization(config)});
    };
    if (with_trace) {
        result.trace.reserve(params.steps + 1);
        record(0);
    }
    for (std::size_t s = 1; s <= params.steps; ++s) {
        mc_step_in_place(config, topology, table, rng);
        if (with_trace) record(s);
    }
    result.final_state = std::move(config);
    return result;
}

// ---------------------------------------------------------------------------
// Exhaustive stationary measure for small lattices.
//
// State index: bit i set iff site i holds W. The switching rule satisfies
// detailed balance with respect to pi(s) ~ exp(-2 E(s) / T).

inline constexpr std::size_t kMaxEnumerableSites = 16;

inline ShopConfiguration configuration_from_index(std::uint64_t index, std::size_t site_count) {
    ShopConfiguration c(site_count);
    for (std::size_t i = 0; i < site_count; ++i) {
        if ((index >> i) & 1U) c[i] = Company::W;
    }
    return c;
}

inline std::uint64_t configuration_index(const ShopConfiguration& config) {
    if (config.size() > 64) throw TooLargeToEnumerate("configuration too large to index");
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < config.size(); ++i) {
        if (config[i] == Company::W) index |= std::uint64_t{1} << i;
    }
    return index;
}

inline std::vector<double> exact_stationary_distribution(const LatticeTopology& topology, double temperature) {
    validate_temperature(temperature);
    const std::size_t n = topology.site_count();
    if (n > kMaxEnumerableSites) {
        throw TooLargeToEnumerate(std::to_string(n) + " sites exceeds enumeration bound of " +
                                  std::to_string(kMaxEnumerableSites));
    }
    const std::size_t states = std::size_t{1} << n;
    std::vector<double> pi(states);
    // Shift by the ground-state energy so the largest weight is exactly 1.
    const double ground = -3.0 * static_cast<double>(n);
    double norm = 0.0;
    for (std::size_t s = 0; s < states; ++s) {
        const double e = static_cast<double>(total_energy(configuration_from_index(s, n), topology));
        pi[s] = std::exp(-2.0 * (e - ground) / temperature);
        norm += pi[s];
    }
    for (double& p : pi) p /= norm;
    return pi;
}

} // namespace market_ising
