#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "market_ising/experiment.hpp"

namespace mi = market_ising;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("market_ising_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
    return n;
}

// Every row has the header's column count; LF only.
void expect_valid_csv(const std::string& csv) {
    ASSERT_FALSE(csv.empty());
    EXPECT_EQ(csv.find('\r'), std::string::npos);
    EXPECT_EQ(csv.back(), '\n');
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    const auto columns = count_of(line, ",");
    while (std::getline(is, line)) EXPECT_EQ(count_of(line, ","), columns) << line;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MARKET_ISING_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

mi::ExperimentConfig tiny(mi::Mode mode, const fs::path& out) {
    auto cfg = mi::parse_config(mode, std::nullopt,
                                {{"generations", "3"}, {"population_size", "6"}, {"mc_steps", "5"}, {"replicas", "3"}});
    cfg.output_dir = out;
    return cfg;
}

} // namespace

TEST(Config, EmptyConfigGivesDefaults) {
    const auto dir = scratch_dir("empty_cfg");
    write_file(dir / "empty.ini", "# nothing here\n\n");
    const auto cfg = mi::parse_config(mi::Mode::Evolve, dir / "empty.ini");
    EXPECT_EQ(cfg.lattice_size, 10u);
    EXPECT_EQ(cfg.ga.population_size, 50u);
    EXPECT_EQ(cfg.ga.mutation_probability, 0.03);
    EXPECT_EQ(cfg.ga.generations, 100u);
    EXPECT_EQ(cfg.ga.mc.steps, 50u);
    EXPECT_EQ(cfg.temperatures, (std::vector<double>{1, 3, 4}));
}

TEST(Config, FlagsOverrideFile) {
    const auto dir = scratch_dir("override");
    write_file(dir / "c.ini", "temperature = 1\ngenerations = 7\n");
    const auto cfg = mi::parse_config(mi::Mode::Evolve, dir / "c.ini", {{"temperature", "3"}});
    EXPECT_EQ(cfg.temperatures, (std::vector<double>{3}));
    EXPECT_EQ(cfg.ga.generations, 7u);

    const auto two = mi::parse_config(mi::Mode::Evolve, dir / "c.ini", {{"temperature", "2"}, {"temperature", "5"}});
    EXPECT_EQ(two.temperatures, (std::vector<double>{2, 5}));
}

TEST(Config, ListValuesInFile) {
    const auto kv = mi::parse_config_text("temperature = 1, 2.5 ,4 ; comment\nshare_average = trajectory\n");
    mi::ExperimentConfig cfg;
    for (const auto& [k, v] : kv) mi::detail::apply_key(cfg, k, v);
    EXPECT_EQ(cfg.temperatures, (std::vector<double>{1, 2.5, 4}));
    EXPECT_EQ(cfg.ga.mc.average, mi::ShareAverage::Trajectory);
}

TEST(Config, ValidationErrorsNameTheField) {
    const auto expect_field = [](const mi::KeyValues& kv, const std::string& field) {
        try {
            mi::parse_config(mi::Mode::Evolve, std::nullopt, kv);
            ADD_FAILURE() << "expected ValidationError for " << field;
        } catch (const mi::ValidationError& e) {
            EXPECT_EQ(e.field(), field);
        }
    };
    expect_field({{"population_size", "1"}}, "population_size");
    expect_field({{"temperature", "0"}}, "temperature");
    expect_field({{"temperature", "-2"}}, "temperature");
    expect_field({{"lattice_size", "5"}}, "lattice_size");
    expect_field({{"lattice_size", "2"}}, "lattice_size");
    expect_field({{"mutation_probability", "1.5"}}, "mutation_probability");
    expect_field({{"generations", "ten"}}, "generations");
    expect_field({{"replicas", "0"}}, "replicas");
}

TEST(Config, MalformedFileReportsLine) {
    try {
        mi::parse_config_text("seed = 4\n\nthis line is wrong\n");
        FAIL();
    } catch (const mi::ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    try {
        mi::parse_config_text("# ok\nbogus_key = 1\n");
        FAIL();
    } catch (const mi::ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}

TEST(Snapshot, CellColours) {
    const auto t = mi::build_lattice(10);
    mi::ShopConfiguration c(100, mi::Company::P);
    auto svg = mi::render_snapshot_svg(c, t);
    EXPECT_EQ(count_of(svg, "<polygon"), 100u);
    EXPECT_EQ(count_of(svg, "fill=\"#1f5fbf\""), 100u);
    EXPECT_EQ(count_of(svg, "fill=\"#d62728\""), 0u);

    for (std::size_t i = 0; i < 50; ++i) c[i] = mi::Company::W;
    svg = mi::render_snapshot_svg(c, t);
    EXPECT_EQ(count_of(svg, "fill=\"#1f5fbf\""), 50u);
    EXPECT_EQ(count_of(svg, "fill=\"#d62728\""), 50u);
}

TEST(Snapshot, DeterministicFiles) {
    const auto dir = scratch_dir("svg");
    const auto t = mi::build_lattice(10);
    mi::RngStream rng(3);
    const auto c = mi::random_chromosome(100, rng).decode();
    mi::render_snapshot(c, t, dir / "a.svg");
    mi::render_snapshot(c, t, dir / "b.svg");
    EXPECT_EQ(slurp(dir / "a.svg"), slurp(dir / "b.svg"));
    EXPECT_THROW(mi::render_snapshot(c, t, dir / "missing" / "x.svg"), mi::IoError);
}

TEST(ChromosomeFile, RoundTrip) {
    const auto dir = scratch_dir("chromosome");
    mi::RngStream rng(8);
    const auto c = mi::random_chromosome(100, rng);
    write_file(dir / "c.txt", mi::chromosome_file_content(c));
    EXPECT_EQ(mi::read_chromosome_file(dir / "c.txt"), c);
    write_file(dir / "bad.txt", "0101x\n");
    EXPECT_THROW(mi::read_chromosome_file(dir / "bad.txt"), mi::InputError);
    EXPECT_THROW(mi::read_chromosome_file(dir / "nope.txt"), mi::InputError);
}

TEST(RunExperiment, SimulateWithZeroStepsTracesInitialShare) {
    const auto dir = scratch_dir("sim0");
    mi::RngStream rng(1);
    write_file(dir / "c.txt", mi::chromosome_file_content(mi::random_chromosome(100, rng)));
    auto cfg = tiny(mi::Mode::Simulate, dir / "out");
    cfg.ga.mc.steps = 0;
    cfg.chromosome_file = dir / "c.txt";
    const auto m = mi::run_experiment(cfg);
    const auto trace = slurp(dir / "out" / "trace.csv");
    EXPECT_EQ(trace, "step,share_P,energy,magnetization\n0,0.5," +
                         std::to_string(mi::total_energy(mi::read_chromosome_file(dir / "c.txt").decode(),
                                                         mi::build_lattice(10))) +
                         ",0\n");
    EXPECT_NE(std::find(m.outputs.begin(), m.outputs.end(), "trace.csv"), m.outputs.end());
}

TEST(RunExperiment, MissingChromosomeIsInputError) {
    const auto dir = scratch_dir("nochrom");
    auto cfg = tiny(mi::Mode::Simulate, dir);
    EXPECT_THROW(mi::run_experiment(cfg), mi::InputError);
    cfg.mode = mi::Mode::Analyze;
    cfg.chromosome_file = dir / "absent.txt";
    EXPECT_THROW(mi::run_experiment(cfg), mi::InputError);
}

TEST(RunExperiment, UnwritableDirectoryIsIoError) {
    const auto dir = scratch_dir("unwritable");
    write_file(dir / "file", "x");
    auto cfg = tiny(mi::Mode::Evolve, dir / "file" / "sub");
    EXPECT_THROW(mi::run_experiment(cfg), mi::IoError);
}

TEST(RunExperiment, EvolveWritesEveryOutput) {
    const auto dir = scratch_dir("evolve");
    auto cfg = tiny(mi::Mode::Evolve, dir);
    cfg.snapshot = true;
    cfg.temperatures = {1.0, 2.5};
    const auto m = mi::run_experiment(cfg);
    for (const std::string tag : {"T1", "T2.5"}) {
        for (const std::string& f : {"fitness_history_" + tag + ".csv", "best_chromosome_" + tag + ".txt",
                                    "connectivity_" + tag + ".csv", "gaussian_fits_" + tag + ".csv",
                                    "snapshot_" + tag + "_initial.svg", "snapshot_" + tag + "_final.svg"}) {
            EXPECT_TRUE(fs::exists(dir / f)) << f;
            EXPECT_NE(std::find(m.outputs.begin(), m.outputs.end(), f), m.outputs.end()) << f;
        }
        const auto history = slurp(dir / ("fitness_history_" + tag + ".csv"));
        expect_valid_csv(history);
        EXPECT_EQ(history.rfind("generation,best,mean,worst,evaluations\n", 0), 0u);
        EXPECT_EQ(count_of(history, "\n"), 5u);
        expect_valid_csv(slurp(dir / ("connectivity_" + tag + ".csv")));
        expect_valid_csv(slurp(dir / ("gaussian_fits_" + tag + ".csv")));
        const auto chromosome = mi::read_chromosome_file(dir / ("best_chromosome_" + tag + ".txt"));
        EXPECT_EQ(chromosome.size(), 100u);
    }
    const auto manifest = slurp(dir / "manifest.txt");
    EXPECT_NE(manifest.find("seed = 1\n"), std::string::npos);
    EXPECT_NE(manifest.find("seed_T2.5 = " + std::to_string(mi::temperature_seed(1, 2.5))), std::string::npos);
    EXPECT_NE(manifest.find("output = summary.csv"), std::string::npos);
    EXPECT_EQ(m.summaries.size(), 2u);
}

TEST(RunExperiment, ByteIdenticalAcrossRunsAndWorkerCounts) {
    const auto a = scratch_dir("det_a");
    const auto b = scratch_dir("det_b");
    auto cfg = tiny(mi::Mode::Evolve, a);
    cfg.workers = 1;
    const auto ma = mi::run_experiment(cfg);
    cfg.output_dir = b;
    cfg.workers = 3;
    mi::run_experiment(cfg);
    for (const auto& f : ma.outputs) {
        if (f == "manifest.txt") continue;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
}

TEST(RunExperiment, AnalyzeWritesInitialAndFinalHistograms) {
    const auto dir = scratch_dir("analyze");
    mi::RngStream rng(2);
    const auto c = mi::random_chromosome(100, rng);
    write_file(dir / "c.txt", mi::chromosome_file_content(c));
    auto cfg = tiny(mi::Mode::Analyze, dir / "out");
    cfg.chromosome_file = dir / "c.txt";
    cfg.temperatures = {3.0};
    mi::run_experiment(cfg);
    const auto hist = slurp(dir / "out" / "connectivity.csv");
    expect_valid_csv(hist);
    EXPECT_EQ(count_of(hist, "\n"), 15u);
    EXPECT_TRUE(fs::exists(dir / "out" / "connectivity_T3_final.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "gaussian_fits_T3_final.csv"));
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch_dir("cli");
    EXPECT_EQ(run_cli("evolve --population 1 --out " + dir.string()), 1);
    EXPECT_EQ(run_cli("evolve --temperature 0 --out " + dir.string()), 1);
    EXPECT_EQ(run_cli("frobnicate"), 1);
    EXPECT_EQ(run_cli("simulate --out " + dir.string()), 2);
    write_file(dir / "bad.ini", "nonsense\n");
    EXPECT_EQ(run_cli("evolve --config " + (dir / "bad.ini").string() + " --out " + dir.string()), 1);
    EXPECT_EQ(run_cli("evolve --generations 1 --population 4 --mc-steps 2 --replicas 2 --temperature 3 --out " +
                      (dir / "ok").string()),
              0);
    EXPECT_TRUE(fs::exists(dir / "ok" / "fitness_history_T3.csv"));
    EXPECT_EQ(run_cli("simulate --chromosome " + (dir / "ok" / "best_chromosome_T3.txt").string() +
                      " --mc-steps 0 --snapshot --out " + (dir / "sim").string()),
              0);
    EXPECT_EQ(slurp(dir / "sim" / "trace.csv").rfind("step,share_P,energy,magnetization\n0,0.5,", 0), 0u);
}
