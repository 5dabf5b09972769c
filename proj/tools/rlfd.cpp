#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rlfd/config.hpp"
#include "rlfd/experiments.hpp"
#include "rlfd/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::optional<std::string> optional_preset(const std::string& preset) {
    if (preset.empty()) return std::nullopt;
    return preset;
}

template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const rlfd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const rlfd::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularized inverse reinforcement learning from demonstrations"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    std::string preset;
    std::string mdp_out;

    auto* run = app.add_subcommand("run", "Run an experiment and write its artifacts");
    run->add_option("config", config_path, "Experiment config (.toml or .json)")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "Output directory (default: output_dir from the config, else out/<name>)");
    run->add_option("--seed", seed, "Override the base seed");
    run->add_option("--workers", workers, "Worker threads for independent runs")->check(CLI::PositiveNumber);
    run->add_option("--preset", preset, "Named preset merged over the config")->check(CLI::IsMember({"paper", "desk"}));

    auto* validate = app.add_subcommand("validate", "Check a config against the schema");
    validate->add_option("config", config_path, "Experiment config (.toml or .json)")->required()->check(CLI::ExistingFile);
    validate->add_option("--preset", preset, "Named preset merged over the config")->check(CLI::IsMember({"paper", "desk"}));

    auto* export_mdp = app.add_subcommand("export-mdp", "Write the configured environment's MDP as JSON");
    export_mdp->add_option("config", config_path, "Experiment config (.toml or .json)")->required()->check(CLI::ExistingFile);
    export_mdp->add_option("-o,--output", mdp_out, "Destination JSON file")->required();
    export_mdp->add_option("--preset", preset, "Named preset merged over the config")->check(CLI::IsMember({"paper", "desk"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    if (*run) {
        return guarded([&] {
            rlfd::ExperimentConfig cfg = rlfd::load_experiment_config(config_path, optional_preset(preset));
            if (seed) cfg.seed = *seed;
            std::filesystem::path out = out_dir;
            if (out.empty()) out = cfg.output_dir.empty() ? std::filesystem::path("out") / cfg.name : std::filesystem::path(cfg.output_dir);
            const rlfd::ExperimentOutcome res = rlfd::run_experiment(cfg, {out, workers});
            std::cout << "wrote " << res.manifest["files"].size() << " files for " << res.cells << " cell(s) to "
                      << res.out_dir.string() << "\n";
            return kExitOk;
        });
    }
    if (*validate) {
        return guarded([&] {
            const rlfd::ExperimentConfig cfg = rlfd::load_experiment_config(config_path, optional_preset(preset));
            std::cout << config_path << ": ok (kind " << cfg.kind_name << ")\n";
            return kExitOk;
        });
    }
    return guarded([&] {
        const rlfd::ExperimentConfig cfg = rlfd::load_experiment_config(config_path, optional_preset(preset));
        rlfd::write_text_file(mdp_out, rlfd::mdp_to_json_text(rlfd::experiment_mdp(cfg)));
        std::cout << "wrote " << mdp_out << "\n";
        return kExitOk;
    });
}
