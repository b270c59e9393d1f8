#include <CLI11.hpp>

#include <iostream>

#include "hypar/errors.hpp"
#include "hypar/run.hpp"
#include "hypar/scenario.hpp"

namespace {

hypar::Scenario load(const std::string& path) {
    // a manifest carries the canonical scenario of the run that wrote it
    if (path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        return hypar::scenario_from_manifest(path);
    }
    return hypar::load_scenario_file(path);
}

void report(const hypar::ConfigError& e) {
    std::cerr << "config error";
    if (e.line() > 0) std::cerr << " at line " << e.line() << ", column " << e.column();
    std::cerr << ": " << e.what() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nonlinear resonator circuit experiments"};
    app.set_version_flag("--version", std::string(hypar::library_version()));
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir;
    int threads = 0;
    bool verbose = false;

    const char* kinds[] = {"simulate", "hb", "slowflow", "sweep", "spectrum", "probe", "coexist"};
    for (const char* k : kinds) {
        auto* sub = app.add_subcommand(k, std::string("run a ") + k + " scenario");
        sub->add_option("--scenario", scenario_path, "scenario YAML or manifest.json")->required();
        sub->add_option("--out", out_dir, "output directory (overrides the scenario)");
        sub->add_option("--threads", threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
        sub->add_flag("--verbose", verbose, "print progress");
    }
    auto* val = app.add_subcommand("validate", "check a scenario without running it");
    val->add_option("--scenario", scenario_path, "scenario YAML or manifest.json")->required();
    val->add_flag("--verbose", verbose, "print the canonical scenario");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : hypar::exit_usage;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    hypar::Scenario scenario;
    try {
        scenario = load(scenario_path);
    } catch (const hypar::ConfigError& e) {
        report(e);
        return hypar::exit_config;
    }

    if (cmd == "validate") {
        if (verbose) std::cout << hypar::serialize(scenario);
        std::cout << "ok: " << hypar::to_string(scenario.kind) << " scenario, sha256 "
                  << hypar::scenario_hash(scenario) << "\n";
        return hypar::exit_ok;
    }
    if (cmd != hypar::to_string(scenario.kind)) {
        std::cerr << "scenario kind is '" << hypar::to_string(scenario.kind) << "', not '" << cmd
                  << "'\n";
        return hypar::exit_usage;
    }

    hypar::RunOptions opts;
    opts.out_dir = out_dir;
    opts.threads = threads;
    if (verbose) opts.log = [](std::string_view m) { std::cerr << m << "\n"; };
    const auto res = hypar::run_scenario(scenario, opts);
    if (res.exit_code != hypar::exit_ok) {
        std::cerr << "error: " << res.message << "\n";
    } else if (verbose) {
        std::cerr << "wrote " << res.files.size() << " files to " << res.out_dir.string() << "\n";
    }
    return res.exit_code;
}
