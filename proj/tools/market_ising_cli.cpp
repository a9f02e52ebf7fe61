// market-ising: evolve, simulate or analyze shop allocations on the lattice.
//
//   market-ising evolve --temperature 1 --temperature 3 --out results
//   market-ising simulate --chromosome results/best_chromosome_T1.txt --mc-steps 200
//   market-ising analyze --chromosome results/best_chromosome_T1.txt

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "market_ising/market_ising.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Flags {
    std::optional<std::string> config;
    std::optional<std::uint64_t> seed;
    std::vector<double> temperatures;
    std::optional<std::size_t> generations;
    std::optional<std::size_t> population;
    std::optional<double> mutation_prob;
    std::optional<double> survivor_fraction;
    std::optional<std::size_t> mc_steps;
    std::optional<std::size_t> replicas;
    std::optional<std::size_t> lattice_size;
    std::optional<std::size_t> workers;
    std::optional<std::string> out;
    std::optional<std::string> chromosome;
    std::optional<std::string> share_average;
    bool snapshot = false;
};

void add_flags(CLI::App& cmd, Flags& f) {
    cmd.add_option("--config", f.config, "key = value configuration file");
    cmd.add_option("--seed", f.seed, "master seed");
    cmd.add_option("--temperature", f.temperatures, "noise level; repeat for several")->take_all();
    cmd.add_option("--generations", f.generations, "GA generations");
    cmd.add_option("--population", f.population, "GA population size");
    cmd.add_option("--mutation-prob", f.mutation_prob, "per-locus mutation probability");
    cmd.add_option("--survivor-fraction", f.survivor_fraction, "fraction of the population kept each generation");
    cmd.add_option("--mc-steps", f.mc_steps, "Monte Carlo steps per run");
    cmd.add_option("--replicas", f.replicas, "independent MC runs per fitness evaluation");
    cmd.add_option("--lattice-size", f.lattice_size, "sites per lattice axis");
    cmd.add_option("--workers", f.workers, "threads for fitness evaluation");
    cmd.add_option("--out", f.out, "output directory");
    cmd.add_option("--chromosome", f.chromosome, "chromosome file (simulate, analyze)");
    cmd.add_option("--share-average", f.share_average, "fitness from the final share or the trajectory mean")
        ->check(CLI::IsMember({"final", "trajectory"}));
    cmd.add_flag("--snapshot", f.snapshot, "write SVG snapshots");
}

market_ising::KeyValues to_overrides(const Flags& f) {
    using market_ising::format_double;
    market_ising::KeyValues kv;
    if (f.seed) kv.emplace_back("seed", std::to_string(*f.seed));
    for (double t : f.temperatures) kv.emplace_back("temperature", format_double(t));
    if (f.generations) kv.emplace_back("generations", std::to_string(*f.generations));
    if (f.population) kv.emplace_back("population_size", std::to_string(*f.population));
    if (f.mutation_prob) kv.emplace_back("mutation_probability", format_double(*f.mutation_prob));
    if (f.survivor_fraction) kv.emplace_back("survivor_fraction", format_double(*f.survivor_fraction));
    if (f.mc_steps) kv.emplace_back("mc_steps", std::to_string(*f.mc_steps));
    if (f.replicas) kv.emplace_back("replicas", std::to_string(*f.replicas));
    if (f.lattice_size) kv.emplace_back("lattice_size", std::to_string(*f.lattice_size));
    if (f.workers) kv.emplace_back("workers", std::to_string(*f.workers));
    if (f.out) kv.emplace_back("out", *f.out);
    if (f.chromosome) kv.emplace_back("chromosome", *f.chromosome);
    if (f.share_average) kv.emplace_back("share_average", *f.share_average);
    if (f.snapshot) kv.emplace_back("snapshot", "true");
    return kv;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shop-allocation optimisation for two competing companies on a periodic lattice"};
    app.require_subcommand(1);
    Flags flags;
    for (const char* name : {"evolve", "simulate", "analyze"}) add_flags(*app.add_subcommand(name), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        const auto mode = market_ising::parse_mode(app.get_subcommands().front()->get_name());
        std::optional<std::filesystem::path> config_file;
        if (flags.config) config_file = *flags.config;
        const auto config = market_ising::parse_config(*mode, config_file, to_overrides(flags));
        const auto manifest = market_ising::run_experiment(config);
        for (const auto& s : manifest.summaries) {
            std::cout << market_ising::temperature_tag(s.temperature) << ": best fitness "
                      << market_ising::format_double(s.best_fitness) << ", re-evaluated "
                      << market_ising::format_double(s.validation_fitness) << ", sigma blue/red "
                      << market_ising::format_double(s.widths.sigma_blue) << "/"
                      << market_ising::format_double(s.widths.sigma_red) << "\n";
        }
        std::cout << "wrote " << manifest.outputs.size() << " files to " << config.output_dir.string() << "\n";
    } catch (const market_ising::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const market_ising::ValidationError& e) {
        std::cerr << "invalid value: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
