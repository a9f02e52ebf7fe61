#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <utility>
#include <vector>

#include "market_ising/errors.hpp"
#include "market_ising/ga_optimizer.hpp"
#include "market_ising/lattice.hpp"
#include "market_ising/market_dynamics.hpp"
#include "market_ising/rng.hpp"
#include "market_ising/topology_analysis.hpp"

namespace market_ising {

inline constexpr std::string_view kToolVersion = "1.0.0";

enum class Mode { Evolve, Simulate, Analyze };

inline std::string_view to_string(Mode m) noexcept {
    switch (m) {
    case Mode::Evolve: return "evolve";
    case Mode::Simulate: return "simulate";
    case Mode::Analyze: return "analyze";
    }
    return "unknown";
}

inline std::optional<Mode> parse_mode(std::string_view s) noexcept {
    if (s == "evolve") return Mode::Evolve;
    if (s == "simulate") return Mode::Simulate;
    if (s == "analyze") return Mode::Analyze;
    return std::nullopt;
}

struct ExperimentConfig {
    Mode mode = Mode::Evolve;
    std::size_t lattice_size = 10;
    GaParams ga;  // ga.mc carries steps and replicas; temperature and seeds are set per run
    std::vector<double> temperatures{1.0, 3.0, 4.0};
    std::filesystem::path output_dir = "results";
    std::uint64_t seed = 1;
    bool snapshot = false;
    std::optional<std::filesystem::path> chromosome_file;
    std::size_t workers = 1;
};

struct RunManifest {
    ExperimentConfig config;
    std::vector<std::pair<double, std::uint64_t>> temperature_seeds;
    std::string started_at;
    std::string finished_at;
    std::vector<std::string> outputs;  // file names relative to the output directory
    // Evolve-mode summary, one entry per temperature.
    struct Summary {
        double temperature = 0.0;
        double best_fitness = 0.0;
        double validation_fitness = 0.0;
        WidthComparison widths;
    };
    std::vector<Summary> summaries;
};

// ---------------------------------------------------------------------------
// Configuration

using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <class T>
T parse_number(const std::string& field, std::string_view text) {
    text = trim(text);
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw ValidationError(field, "cannot parse '" + std::string(text) + "'");
    }
    return value;
}

inline bool parse_bool(const std::string& field, std::string_view text) {
    text = trim(text);
    if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
    if (text == "0" || text == "false" || text == "no" || text == "off") return false;
    throw ValidationError(field, "expected a boolean, got '" + std::string(text) + "'");
}

inline std::vector<double> parse_temperature_list(std::string_view text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        out.push_back(parse_number<double>("temperature", item));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline ShareAverage parse_share_average(std::string_view text) {
    text = trim(text);
    if (text == "final") return ShareAverage::FinalState;
    if (text == "trajectory") return ShareAverage::Trajectory;
    throw ValidationError("share_average", "expected 'final' or 'trajectory', got '" + std::string(text) + "'");
}

inline const std::vector<std::string_view>& known_keys() {
    static const std::vector<std::string_view> keys{
        "lattice_size", "population_size", "mutation_probability", "generations", "survivor_fraction",
        "mc_steps",     "replicas",        "temperature",          "seed",        "out",
        "snapshot",     "chromosome",      "workers",              "share_average"};
    return keys;
}

inline void apply_key(ExperimentConfig& cfg, const std::string& key, std::string_view value) {
    if (key == "lattice_size") cfg.lattice_size = parse_number<std::size_t>(key, value);
    else if (key == "population_size") cfg.ga.population_size = parse_number<std::size_t>(key, value);
    else if (key == "mutation_probability") cfg.ga.mutation_probability = parse_number<double>(key, value);
    else if (key == "generations") cfg.ga.generations = parse_number<std::size_t>(key, value);
    else if (key == "survivor_fraction") cfg.ga.survivor_fraction = parse_number<double>(key, value);
    else if (key == "mc_steps") cfg.ga.mc.steps = parse_number<std::size_t>(key, value);
    else if (key == "replicas") cfg.ga.mc.replicas = parse_number<std::size_t>(key, value);
    else if (key == "temperature") cfg.temperatures = parse_temperature_list(value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "out") cfg.output_dir = std::string(trim(value));
    else if (key == "snapshot") cfg.snapshot = parse_bool(key, value);
    else if (key == "chromosome") cfg.chromosome_file = std::string(trim(value));
    else if (key == "workers") cfg.workers = parse_number<std::size_t>(key, value);
    else if (key == "share_average") cfg.ga.mc.average = parse_share_average(value);
    else throw ValidationError(key, "unknown key");
}

} // namespace detail

// key = value lines; '#' or ';' start a comment. Unknown keys are rejected
// with the offending line number.
inline KeyValues parse_config_text(std::string_view text) {
    KeyValues kv;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        ++line_no;
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() : nl + 1;

        if (const auto hash = line.find_first_of("#;"); hash != std::string_view::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty() || line.front() == '[') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key(detail::trim(line.substr(0, eq)));
        const auto value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("missing key", line_no);
        const auto& keys = detail::known_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ParseError("unknown key '" + key + "'", line_no);
        }
        if (value.empty()) throw ParseError("missing value for '" + key + "'", line_no);
        kv.emplace_back(key, std::string(value));
    }
    return kv;
}

inline void validate(const ExperimentConfig& cfg) {
    if (cfg.lattice_size < 3) throw ValidationError("lattice_size", "must be at least 3");
    if ((cfg.lattice_size * cfg.lattice_size) % 2 != 0) {
        throw ValidationError("lattice_size", "site count must be even for the 50/50 constraint");
    }
    if (cfg.temperatures.empty()) throw ValidationError("temperature", "at least one temperature is required");
    for (double t : cfg.temperatures) {
        if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("temperature", "must be positive");
    }
    if (cfg.workers == 0) throw ValidationError("workers", "must be positive");
    if (cfg.ga.mc.replicas == 0) throw ValidationError("replicas", "must be positive");
    cfg.ga.validate();
}

// File values first, then flag overrides. Flags use the file's key names;
// repeated "temperature" flags together replace the file's list.
inline ExperimentConfig parse_config(Mode mode, const std::optional<std::filesystem::path>& file,
                                     const KeyValues& flags = {}) {
    ExperimentConfig cfg;
    cfg.mode = mode;
    cfg.workers = std::max(1U, std::thread::hardware_concurrency());
    if (file) {
        std::ifstream in(*file);
        if (!in) throw InputError("cannot open config file " + file->string());
        std::stringstream ss;
        ss << in.rdbuf();
        for (const auto& [k, v] : parse_config_text(ss.str())) detail::apply_key(cfg, k, v);
    }
    std::vector<double> flag_temperatures;
    for (const auto& [k, v] : flags) {
        if (k == "temperature") {
            for (double t : detail::parse_temperature_list(v)) flag_temperatures.push_back(t);
        } else {
            detail::apply_key(cfg, k, v);
        }
    }
    if (!flag_temperatures.empty()) cfg.temperatures = std::move(flag_temperatures);
    validate(cfg);
    return cfg;
}

// ---------------------------------------------------------------------------
// Output helpers

inline std::string temperature_tag(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "T%g", t);
    return buf;
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline std::uint64_t temperature_seed(std::uint64_t master_seed, double t) {
    return RngStream(master_seed).derive("temperature/" + temperature_tag(t)).seed();
}

class OutputDirectory {
public:
    explicit OutputDirectory(std::filesystem::path root) : root_(std::move(root)) {
        std::error_code ec;
        std::filesystem::create_directories(root_, ec);
        if (ec || !std::filesystem::is_directory(root_)) {
            throw IoError("cannot create output directory " + root_.string() + ": " + ec.message());
        }
    }

    const std::filesystem::path& root() const noexcept { return root_; }

    void write(const std::string& name, const std::string& content) {
        const auto path = root_ / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + path.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write failed for " + path.string());
        written_.push_back(name);
    }

    const std::vector<std::string>& written() const noexcept { return written_; }

private:
    std::filesystem::path root_;
    std::vector<std::string> written_;
};

inline Chromosome read_chromosome_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open chromosome file " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        const auto t = detail::trim(line);
        if (!t.empty()) {
            try {
                return Chromosome::from_string(t);
            } catch (const InvalidSize& e) {
                throw InputError("malformed chromosome file " + path.string() + ": " + e.what());
            }
        }
    }
    throw InputError("chromosome file " + path.string() + " is empty");
}

inline std::string chromosome_file_content(const Chromosome& c) { return c.to_string() + "\n"; }

inline std::string render_snapshot_svg(const ShopConfiguration& config, const LatticeTopology& topology) {
    check_size(config, topology);
    constexpr double scale = 20.0;
    const double radius = 1.0 / std::sqrt(3.0);  // hexagon circumradius for unit site spacing
    const double side = static_cast<double>(topology.side_length());
    const double width = (1.5 * (side - 1.0) + 1.0) * scale;
    const double height = ((side - 1.0) * std::sqrt(3.0) / 2.0 + 2.0 * radius) * scale;
    const double x0 = 0.5 * scale;
    const double y0 = radius * scale;

    std::string svg;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.2f\" height=\"%.2f\" viewBox=\"0 0 %.2f %.2f\">\n",
                  width, height, width, height);
    svg += buf;
    for (std::size_t i = 0; i < config.size(); ++i) {
        const Point p = topology.coordinate(SiteId{i});
        const double cx = x0 + p.x * scale;
        const double cy = y0 + p.y * scale;
        svg += "<polygon points=\"";
        for (int k = 0; k < 6; ++k) {
            const double angle = (60.0 * k + 30.0) * 3.14159265358979323846 / 180.0;
            std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", k ? " " : "", cx + radius * scale * std::cos(angle),
                          cy + radius * scale * std::sin(angle));
            svg += buf;
        }
        svg += config[i] == Company::P ? "\" fill=\"#1f5fbf\"" : "\" fill=\"#d62728\"";
        svg += " stroke=\"#ffffff\" stroke-width=\"1\"/>\n";
    }
    svg += "</svg>\n";
    return svg;
}

inline void render_snapshot(const ShopConfiguration& config, const LatticeTopology& topology,
                            const std::filesystem::path& path) {
    const std::string svg = render_snapshot_svg(config, topology);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << svg;
    if (!out) throw IoError("write failed for " + path.string());
}

inline std::string fitness_history_csv(const GaResult& r) {
    std::string s = "generation,best,mean,worst,evaluations\n";
    for (const auto& h : r.history) {
        s += std::to_string(h.generation) + ',' + format_double(h.best) + ',' + format_double(h.mean) + ',' +
             format_double(h.worst) + ',' + std::to_string(h.evaluations) + '\n';
    }
    return s;
}

inline std::string trace_csv(const std::vector<TracePoint>& trace) {
    std::string s = "step,share_P,energy,magnetization\n";
    for (const auto& t : trace) {
        s += std::to_string(t.step) + ',' + format_double(t.share_p) + ',' + std::to_string(t.energy) + ',' +
             format_double(t.magnetization) + '\n';
    }
    return s;
}

inline std::string sites_csv(const ShopConfiguration& config, const LatticeTopology& topology) {
    std::string s = "site,a,b,company\n";
    for (std::size_t i = 0; i < config.size(); ++i) {
        const auto [a, b] = topology.axial(SiteId{i});
        s += std::to_string(i) + ',' + std::to_string(a) + ',' + std::to_string(b) + ',' + to_string(config[i]) + '\n';
    }
    return s;
}

inline std::pair<std::string, std::string> connectivity_csvs(const ConnectivityAnalysis& a) {
    std::ostringstream hist;
    std::ostringstream fits;
    const std::array<ConnectivityHistogram, 2> hs{a.blue, a.red};
    const std::array<std::pair<Company, GaussianFit>, 2> fs{{{Company::P, a.blue_fit}, {Company::W, a.red_fit}}};
    write_histogram_csv(hist, hs);
    write_fit_csv(fits, fs);
    return {hist.str(), fits.str()};
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string manifest_text(const RunManifest& m) {
    const auto& c = m.config;
    std::ostringstream os;
    os << "tool = market-ising\n";
    os << "tool_version = " << kToolVersion << "\n";
    os << "mode = " << to_string(c.mode) << "\n";
    os << "started_at = " << m.started_at << "\n";
    os << "finished_at = " << m.finished_at << "\n";
    os << "seed = " << c.seed << "\n";
    os << "lattice_size = " << c.lattice_size << "\n";
    os << "population_size = " << c.ga.population_size << "\n";
    os << "mutation_probability = " << format_double(c.ga.mutation_probability) << "\n";
    os << "generations = " << c.ga.generations << "\n";
    os << "survivor_fraction = " << format_double(c.ga.survivor_fraction) << "\n";
    os << "mc_steps = " << c.ga.mc.steps << "\n";
    os << "replicas = " << c.ga.mc.replicas << "\n";
    os << "share_average = " << (c.ga.mc.average == ShareAverage::Trajectory ? "trajectory" : "final") << "\n";
    os << "temperature = ";
    for (std::size_t i = 0; i < c.temperatures.size(); ++i) os << (i ? ", " : "") << format_double(c.temperatures[i]);
    os << "\n";
    os << "snapshot = " << (c.snapshot ? "true" : "false") << "\n";
    if (c.chromosome_file) os << "chromosome = " << c.chromosome_file->string() << "\n";
    os << "out = " << c.output_dir.string() << "\n";
    os << "workers = " << c.workers << "\n";
    for (const auto& [t, s] : m.temperature_seeds) os << "seed_" << temperature_tag(t) << " = " << s << "\n";
    for (const auto& s : m.summaries) {
        const auto tag = temperature_tag(s.temperature);
        os << "best_fitness_" << tag << " = " << format_double(s.best_fitness) << "\n";
        os << "validation_fitness_" << tag << " = " << format_double(s.validation_fitness) << "\n";
        os << "sigma_blue_" << tag << " = " << format_double(s.widths.sigma_blue) << "\n";
        os << "sigma_red_" << tag << " = " << format_double(s.widths.sigma_red) << "\n";
        os << "blue_wider_" << tag << " = " << (s.widths.blue_wider ? "true" : "false") << "\n";
    }
    for (const auto& f : m.outputs) os << "output = " << f << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Pipelines

namespace detail {

inline void run_evolve(const ExperimentConfig& cfg, const LatticeTopology& topology, OutputDirectory& out,
                       RunManifest& manifest) {
    std::string summary = "temperature,seed,best_fitness,validation_fitness,sigma_blue,sigma_red,blue_wider\n";
    for (double t : cfg.temperatures) {
        const std::string tag = temperature_tag(t);
        const std::uint64_t seed = temperature_seed(cfg.seed, t);
        manifest.temperature_seeds.emplace_back(t, seed);

        GaParams ga = cfg.ga;
        ga.seed = seed;
        ga.mc.temperature = t;
        ga.mc.seed = seed;
        const GaResult result = evolve(ga, topology, {}, cfg.workers);

        const RngStream stream(seed);
        const double validation = evaluate_fitness(result.best_chromosome, topology, ga.mc, stream.derive("validation"));
        const ShopConfiguration best = result.best_chromosome.decode();
        const ConnectivityAnalysis analysis = analyze_connectivity(best, topology);
        const auto [hist_csv, fit_csv] = connectivity_csvs(analysis);

        out.write("fitness_history_" + tag + ".csv", fitness_history_csv(result));
        out.write("best_chromosome_" + tag + ".txt", chromosome_file_content(result.best_chromosome));
        out.write("best_sites_" + tag + ".csv", sites_csv(best, topology));
        out.write("connectivity_" + tag + ".csv", hist_csv);
        out.write("gaussian_fits_" + tag + ".csv", fit_csv);
        if (cfg.snapshot) {
            RngStream rng = stream.derive("snapshot");
            const DynamicsResult dyn = run_dynamics(best, topology, ga.mc, rng);
            out.write("snapshot_" + tag + "_initial.svg", render_snapshot_svg(best, topology));
            out.write("snapshot_" + tag + "_final.svg", render_snapshot_svg(dyn.final_state, topology));
        }

        manifest.summaries.push_back({t, result.best_fitness, validation, analysis.widths});
        summary += format_double(t) + ',' + std::to_string(seed) + ',' + format_double(result.best_fitness) + ',' +
                   format_double(validation) + ',' + format_double(analysis.widths.sigma_blue) + ',' +
                   format_double(analysis.widths.sigma_red) + ',' + (analysis.widths.blue_wider ? "1" : "0") + '\n';
    }
    out.write("summary.csv", summary);
}

inline Chromosome require_chromosome(const ExperimentConfig& cfg, const LatticeTopology& topology) {
    if (!cfg.chromosome_file) throw InputError(std::string(to_string(cfg.mode)) + " mode requires --chromosome FILE");
    Chromosome c = read_chromosome_file(*cfg.chromosome_file);
    if (c.size() != topology.site_count()) {
        throw InputError("chromosome has " + std::to_string(c.size()) + " loci but the lattice has " +
                         std::to_string(topology.site_count()) + " sites");
    }
    return c;
}

// Runs at the first configured temperature.
inline void run_simulate(const ExperimentConfig& cfg, const LatticeTopology& topology, OutputDirectory& out,
                         RunManifest& manifest) {
    const Chromosome chromosome = require_chromosome(cfg, topology);
    const double t = cfg.temperatures.front();
    const std::uint64_t seed = temperature_seed(cfg.seed, t);
    manifest.temperature_seeds.emplace_back(t, seed);

    McParams mc = cfg.ga.mc;
    mc.temperature = t;
    mc.seed = seed;
    RngStream rng = RngStream(seed).derive("simulate");
    const ShopConfiguration initial = chromosome.decode();
    const DynamicsResult dyn = run_dynamics(initial, topology, mc, rng, true);
    out.write("trace.csv", trace_csv(dyn.trace));
    if (cfg.snapshot) {
        const std::string tag = temperature_tag(t);
        out.write("snapshot_" + tag + "_initial.svg", render_snapshot_svg(initial, topology));
        out.write("snapshot_" + tag + "_final.svg", render_snapshot_svg(dyn.final_state, topology));
    }
}

// Initial-configuration analysis, plus one post-dynamics snapshot per temperature when mc_steps > 0.
inline void run_analyze(const ExperimentConfig& cfg, const LatticeTopology& topology, OutputDirectory& out,
                        RunManifest& manifest) {
    const Chromosome chromosome = require_chromosome(cfg, topology);
    const ShopConfiguration initial = chromosome.decode();
    const auto [hist_csv, fit_csv] = connectivity_csvs(analyze_connectivity(initial, topology));
    out.write("connectivity.csv", hist_csv);
    out.write("gaussian_fits.csv", fit_csv);
    if (cfg.ga.mc.steps == 0) return;
    for (double t : cfg.temperatures) {
        const std::string tag = temperature_tag(t);
        const std::uint64_t seed = temperature_seed(cfg.seed, t);
        manifest.temperature_seeds.emplace_back(t, seed);
        McParams mc = cfg.ga.mc;
        mc.temperature = t;
        mc.seed = seed;
        RngStream rng = RngStream(seed).derive("analyze");
        const DynamicsResult dyn = run_dynamics(initial, topology, mc, rng);
        const auto [h, f] = connectivity_csvs(analyze_connectivity(dyn.final_state, topology));
        out.write("connectivity_" + tag + "_final.csv", h);
        out.write("gaussian_fits_" + tag + "_final.csv", f);
        if (cfg.snapshot) out.write("snapshot_" + tag + "_final.svg", render_snapshot_svg(dyn.final_state, topology));
    }
}

} // namespace detail

inline RunManifest run_experiment(const ExperimentConfig& config) {
    validate(config);
    RunManifest manifest;
    manifest.config = config;
    manifest.started_at = utc_timestamp();

    const LatticeTopology topology(config.lattice_size);
    OutputDirectory out(config.output_dir);
    switch (config.mode) {
    case Mode::Evolve: detail::run_evolve(config, topology, out, manifest); break;
    case Mode::Simulate: detail::run_simulate(config, topology, out, manifest); break;
    case Mode::Analyze: detail::run_analyze(config, topology, out, manifest); break;
    }

    manifest.outputs = out.written();
    manifest.outputs.push_back("manifest.txt");
    manifest.finished_at = utc_timestamp();
    out.write("manifest.txt", manifest_text(manifest));
    return manifest;
}

} // namespace market_ising
