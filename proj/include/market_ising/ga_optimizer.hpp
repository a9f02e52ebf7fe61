#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "market_ising/errors.hpp"
#include "market_ising/lattice.hpp"
#include "market_ising/market_dynamics.hpp"
#include "market_ising/rng.hpp"

namespace market_ising {

// Binary encoding of an initial allocation: locus i is site i, 0 = P, 1 = W.
// Always holds exactly as many zeros as ones.
class Chromosome {
public:
    Chromosome() = default;

    explicit Chromosome(std::vector<std::uint8_t> loci) : loci_(std::move(loci)) {
        if (loci_.size() % 2 != 0) {
            throw InvalidSize("chromosome length must be even, got " + std::to_string(loci_.size()));
        }
        std::size_t ones = 0;
        for (auto& v : loci_) {
            if (v > 1) throw InvalidSize("chromosome loci must be 0 or 1");
            ones += v;
        }
        if (2 * ones != loci_.size()) {
            throw InvalidSize("chromosome must hold equal numbers of 0 and 1, got " +
                              std::to_string(loci_.size() - ones) + " zeros and " + std::to_string(ones) +
                              " ones");
        }
    }

    static Chromosome from_string(std::string_view text) {
        std::vector<std::uint8_t> loci;
        loci.reserve(text.size());
        for (char c : text) {
            if (c != '0' && c != '1') throw InvalidSize(std::string("invalid locus character '") + c + "'");
            loci.push_back(static_cast<std::uint8_t>(c - '0'));
        }
        return Chromosome(std::move(loci));
    }

    std::string to_string() const {
        std::string s;
        s.reserve(loci_.size());
        for (auto v : loci_) s.push_back(static_cast<char>('0' + v));
        return s;
    }

    std::size_t size() const noexcept { return loci_.size(); }
    std::uint8_t operator[](std::size_t i) const noexcept { return loci_[i]; }
    const std::vector<std::uint8_t>& loci() const noexcept { return loci_; }

    std::size_t zeros() const noexcept { return loci_.size() - ones(); }
    std::size_t ones() const noexcept {
        return static_cast<std::size_t>(std::count(loci_.begin(), loci_.end(), std::uint8_t{1}));
    }

    ShopConfiguration decode() const {
        ShopConfiguration config(loci_.size());
        for (std::size_t i = 0; i < loci_.size(); ++i) config[i] = loci_[i] ? Company::W : Company::P;
        return config;
    }

    friend bool operator==(const Chromosome&, const Chromosome&) = default;

private:
    std::vector<std::uint8_t> loci_;
};

struct GaParams {
    std::size_t population_size = 50;
    double mutation_probability = 0.03;
    std::size_t generations = 100;
    double survivor_fraction = 0.5;
    McParams mc;
    std::uint64_t seed = 0;

    void validate() const {
        if (population_size < 2) throw ValidationError("population_size", "must be at least 2");
        if (!(mutation_probability >= 0.0 && mutation_probability <= 1.0)) {
            throw ValidationError("mutation_probability", "must lie in [0, 1]");
        }
        if (!(survivor_fraction > 0.0 && survivor_fraction < 1.0)) {
            throw ValidationError("survivor_fraction", "must lie strictly between 0 and 1");
        }
        mc.validate();
    }
};

struct GenerationRecord {
    std::size_t generation = 0;
    double best = 0.0;  // best fitness seen so far
    double mean = 0.0;  // of this generation's evaluations
    double worst = 0.0;
    std::size_t evaluations = 0;  // cumulative
};

struct GaResult {
    Chromosome best_chromosome;
    double best_fitness = 0.0;
    std::vector<GenerationRecord> history;
    std::size_t evaluations = 0;
    std::uint64_t master_seed = 0;
};

// Called once per generation with the evaluated population.
using GenerationObserver =
    std::function<void(std::size_t generation, std::span<const Chromosome>, std::span<const double>)>;

// Uniform shuffle of N/2 zeros and N/2 ones (Fisher-Yates).
inline Chromosome random_chromosome(std::size_t n, RngStream& rng) {
    if (n % 2 != 0) throw InvalidSize("chromosome length must be even, got " + std::to_string(n));
    std::vector<std::uint8_t> loci(n, 0);
    std::fill(loci.begin() + static_cast<std::ptrdiff_t>(n / 2), loci.end(), std::uint8_t{1});
    for (std::size_t i = n; i > 1; --i) {
        std::swap(loci[i - 1], loci[static_cast<std::size_t>(rng.below(i))]);
    }
    return Chromosome(std::move(loci));
}

// Mean P share over mc.replicas independent runs of mc.steps steps, taken
// from the final state (default) or averaged along each trajectory.
inline double evaluate_fitness(const Chromosome& chromosome, const LatticeTopology& topology,
                               const McParams& mc, const RngStream& rng) {
    if (chromosome.size() != topology.site_count()) {
        throw SizeMismatch("chromosome length " + std::to_string(chromosome.size()) +
                           " does not match lattice size " + std::to_string(topology.site_count()));
    }
    mc.validate();
    const SwitchTable table(mc.temperature);
    const ShopConfiguration initial = chromosome.decode();
    double total = 0.0;
    for (std::size_t r = 0; r < mc.replicas; ++r) {
        RngStream replica = rng.derive("replica/" + std::to_string(r));
        ShopConfiguration config = initial;
        double along = 0.0;
        for (std::size_t s = 0; s < mc.steps; ++s) {
            mc_step_in_place(config, topology, table, replica);
            if (mc.average == ShareAverage::Trajectory) along += market_share(config, Company::P);
        }
        if (mc.average == ShareAverage::Trajectory && mc.steps > 0) {
            total += along / static_cast<double>(mc.steps);
        } else {
            total += market_share(config, Company::P);
        }
    }
    return total / static_cast<double>(mc.replicas);
}

// Flip each locus with probability p, then restore balance by flipping
// uniformly chosen majority-value loci one at a time.
inline Chromosome mutate_and_repair(const Chromosome& chromosome, double p, RngStream& rng) {
    std::vector<std::uint8_t> loci = chromosome.loci();
    for (auto& v : loci) {
        if (rng.uniform() < p) v ^= 1U;
    }
    std::size_t ones = static_cast<std::size_t>(std::count(loci.begin(), loci.end(), std::uint8_t{1}));
    std::size_t zeros = loci.size() - ones;
    std::vector<std::size_t> majority;
    while (ones != zeros) {
        const std::uint8_t value = ones > zeros ? 1 : 0;
        majority.clear();
        for (std::size_t i = 0; i < loci.size(); ++i) {
            if (loci[i] == value) majority.push_back(i);
        }
        loci[majority[static_cast<std::size_t>(rng.below(majority.size()))]] ^= 1U;
        if (value == 1) {
            --ones;
            ++zeros;
        } else {
            --zeros;
            ++ones;
        }
    }
    return Chromosome(std::move(loci));
}

inline std::size_t survivor_count(std::size_t population_size, double survivor_fraction) {
    // Small slack so that e.g. 50 * 0.5 does not round up past 25.
    const double raw = static_cast<double>(population_size) * survivor_fraction;
    auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return std::clamp<std::size_t>(k, 1, population_size);
}

// Indices of the top ceil(size * fraction) fitnesses, best first, ties to the lower index.
inline std::vector<std::size_t> select_survivors(std::span<const Chromosome> population,
                                                 std::span<const double> fitnesses, double survivor_fraction) {
    if (population.size() != fitnesses.size()) {
        throw SizeMismatch("population has " + std::to_string(population.size()) + " members but " +
                           std::to_string(fitnesses.size()) + " fitness values");
    }
    if (population.empty()) throw SizeMismatch("population is empty");
    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fitnesses[a] > fitnesses[b]; });
    order.resize(survivor_count(population.size(), survivor_fraction));
    return order;
}

namespace detail {

// Runs body(i) for i in [0, count) on up to `workers` threads. Each index is
// processed exactly once; results must not depend on the schedule.
template <class Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) body(i);
        });
    }
}

inline std::string slot_label(std::string_view kind, std::size_t generation, std::size_t slot) {
    return std::string(kind) + "/" + std::to_string(generation) + "/" + std::to_string(slot);
}

} // namespace detail

inline GaResult evolve(const GaParams& ga, const LatticeTopology& topology, const GenerationObserver& observer = {},
                       std::size_t workers = 1) {
    ga.validate();
    const std::size_t n = topology.site_count();
    if (n % 2 != 0) throw InvalidSize("lattice must have an even number of sites, got " + std::to_string(n));

    const RngStream root(ga.seed);
    std::vector<Chromosome> population;
    population.reserve(ga.population_size);
    for (std::size_t i = 0; i < ga.population_size; ++i) {
        RngStream rng = root.derive(detail::slot_label("init", 0, i));
        population.push_back(random_chromosome(n, rng));
    }

    GaResult result;
    result.master_seed = ga.seed;
    result.best_fitness = -std::numeric_limits<double>::infinity();
    result.history.reserve(ga.generations + 1);
    std::size_t elite = 0;  // index of best_chromosome in the current population
    std::vector<double> fitness(ga.population_size);

    for (std::size_t g = 0; g <= ga.generations; ++g) {
        if (g > 0) {
            const std::vector<std::size_t> survivors = select_survivors(population, fitness, ga.survivor_fraction);
            RngStream rng = root.derive("breed/" + std::to_string(g));
            std::vector<Chromosome> next;
            next.reserve(ga.population_size);
            next.push_back(population[elite]);
            for (std::size_t s : survivors) {
                if (next.size() == ga.population_size) break;
                if (s != elite) next.push_back(population[s]);
            }
            while (next.size() < ga.population_size) {
                const Chromosome& parent = population[survivors[static_cast<std::size_t>(rng.below(survivors.size()))]];
                next.push_back(mutate_and_repair(parent, ga.mutation_probability, rng));
            }
            population = std::move(next);
            elite = 0;
        }

        detail::parallel_for(population.size(), workers, [&](std::size_t i) {
            fitness[i] = evaluate_fitness(population[i], topology, ga.mc, root.derive(detail::slot_label("eval", g, i)));
        });
        result.evaluations += population.size();
        if (observer) observer(g, population, fitness);

        for (std::size_t i = 0; i < population.size(); ++i) {
            if (fitness[i] > result.best_fitness) {
                result.best_fitness = fitness[i];
                result.best_chromosome = population[i];
                elite = i;
            }
        }
        const double worst = *std::min_element(fitness.begin(), fitness.end());
        const double mean = std::accumulate(fitness.begin(), fitness.end(), 0.0) / static_cast<double>(fitness.size());
        result.history.push_back({g, result.best_fitness, mean, worst, result.evaluations});
    }
    return result;
}

} // namespace market_ising
