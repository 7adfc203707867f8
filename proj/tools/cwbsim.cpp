// Command-line runner: presets, config validation and report emission.

#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "cwbsim/config.hpp"
#include "cwbsim/report.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;

int cmd_run(const std::string& preset_name, const std::string& config_path,
            const std::optional<std::uint64_t>& seed, const std::string& out_dir, unsigned threads,
            bool quiet) {
    cwbsim::SimConfig c = config_path.empty() ? cwbsim::preset(preset_name) : cwbsim::parse_config(config_path);
    if (seed)
        c.master_seed = *seed;
    c.validate();
    const auto arms = cwbsim::expand_arms(c);
    std::size_t done = 0;
    auto results = cwbsim::run_experiment(c, threads, [&](const cwbsim::Arm& a) {
        if (!quiet)
            std::fprintf(stderr, "[%zu/%zu] %s: %zu runs x %d steps\n", ++done, arms.size(), a.label.c_str(),
                         c.runs, a.cfg.steps);
    });
    auto files = cwbsim::emit_reports(results, c, out_dir);
    if (!quiet)
        for (const auto& p : files.written)
            std::fprintf(stderr, "wrote %s\n", p.string().c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Community wellbeing simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a preset or a config file and write reports");
    std::string preset_name, config_path, out_dir = "out";
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
    bool quiet = false;
    auto* p_opt = run->add_option("--preset", preset_name, "Preset name (see list-presets)");
    auto* c_opt = run->add_option("--config", config_path, "Config file")->check(CLI::ExistingFile);
    p_opt->excludes(c_opt);
    run->add_option("--seed", seed, "Master seed (overrides the config)");
    run->add_option("--out", out_dir, "Output directory")->capture_default_str();
    run->add_option("--threads", threads, "Worker threads for ensemble runs")
        ->check(CLI::Range(1u, 1024u))
        ->capture_default_str();
    run->add_flag("-q,--quiet", quiet, "No progress output");

    auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
    std::string validate_path;
    validate->add_option("--config", validate_path, "Config file")->required();
    bool print = false;
    validate->add_flag("--print", print, "Print the effective config");

    auto* list = app.add_subcommand("list-presets", "List built-in presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        if (run->parsed()) {
            if (preset_name.empty() && config_path.empty()) {
                std::cerr << "run: one of --preset or --config is required\n";
                return kExitConfig;
            }
            return cmd_run(preset_name, config_path, seed, out_dir, threads, quiet);
        }
        if (validate->parsed()) {
            const auto c = cwbsim::parse_config(validate_path);
            if (print)
                std::cout << cwbsim::echo_config(c);
            else
                std::cout << validate_path << ": ok (" << cwbsim::expand_arms(c).size() << " arms, " << c.runs
                          << " runs each)\n";
            return 0;
        }
        if (list->parsed()) {
            for (const auto& p : cwbsim::presets())
                std::cout << p.name << "\t" << p.description << "\n";
            return 0;
        }
    } catch (const cwbsim::InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cwbsim::NotFound& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
