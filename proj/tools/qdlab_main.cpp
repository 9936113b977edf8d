// qdlab - config-driven laboratory for long-range quasiperiodic lattice
// operators: Green's-function box scans, resolvent-identity barriers,
// Abel-averaged transport exponents and the commutator calculus.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "qdlab/qdlab.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
    CLI::App app{"qdlab - quantum dynamical bounds laboratory"};
    app.set_version_flag("--version", qdlab::version_string());
    app.require_subcommand(1);

    std::string scenario_path, out_dir, scenario_dir = "scenarios";
    std::vector<std::string> overrides;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;

    auto* run = app.add_subcommand("run", "run a scenario and write reports + manifest");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--set", overrides, "override a config value (key.path=value)");
    run->add_option("--out", out_dir, "output directory (default: scenario's output field)");
    run->add_option("--threads", threads, "worker threads for grid sweeps");

    auto* validate = app.add_subcommand("validate", "parse a scenario and check its grids");
    validate->add_option("scenario", scenario_path, "scenario JSON file")->required();
    validate->add_option("--set", overrides, "override a config value (key.path=value)");

    auto* list = app.add_subcommand("list", "list scenario files in a directory");
    list->add_option("--scenario-dir", scenario_dir, "directory to scan (default: scenarios)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (list->parsed()) {
            if (!fs::is_directory(scenario_dir)) {
                std::cerr << "no such directory: " << scenario_dir << "\n";
                return 1;
            }
            std::vector<std::string> names;
            for (auto& entry : fs::directory_iterator(scenario_dir))
                if (entry.path().extension() == ".json") names.push_back(entry.path().string());
            std::sort(names.begin(), names.end());
            for (auto& n : names) {
                try {
                    qdlab::Scenario s = qdlab::load_scenario(n);
                    std::printf("%-40s %s (%zu experiments)\n", n.c_str(), s.name.c_str(),
                                s.experiments.size());
                } catch (const std::exception& e) {
                    std::printf("%-40s INVALID: %s\n", n.c_str(), e.what());
                }
            }
            return 0;
        }

        if (validate->parsed()) {
            qdlab::Scenario s = qdlab::load_scenario(scenario_path, overrides);
            std::printf("ok: %s (%zu experiments, hash %016llx)\n", s.name.c_str(),
                        s.experiments.size(), static_cast<unsigned long long>(s.hash));
            return 0;
        }

        // run
        qdlab::Scenario s = qdlab::load_scenario(scenario_path, overrides);
        qdlab::RunOptions opts;
        opts.threads = threads;
        if (!out_dir.empty()) opts.out_dir = out_dir;
        qdlab::RunManifest manifest = qdlab::run_scenario(s, opts);
        for (auto& e : manifest.experiments)
            std::printf("[%-12s] %-28s %.2fs\n", e.status.c_str(), e.name.c_str(), e.seconds);
        std::printf("manifest: %s/manifest.json\n",
                    (out_dir.empty() ? s.output_dir : out_dir).c_str());
        return manifest.all_ok ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
