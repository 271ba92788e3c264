// Command-line front end for the design toolkit.  Subcommands:
//   run <config.json> [--set key.path=value ...]   execute a task config
//   list-presets                                   print built-in presets
#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "qrdesign/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Model-robust experimental designs for quantile regression"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    CLI::App* run = app.add_subcommand("run", "Run a JSON task configuration");
    run->add_option("config", config_path, "Path to the JSON configuration")->required();
    run->add_option("--set", overrides,
                    "Override a config entry, e.g. --set nu=0.25 --set space.n_points=11");

    CLI::App* list = app.add_subcommand("list-presets", "List built-in presets");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        // CLI11 returns 0 for --help; anything else is a usage error.
        return code == 0 ? 0 : qrdesign::cli::kExitConfigError;
    }

    if (list->parsed()) {
        std::cout << qrdesign::cli::list_presets_text();
        return 0;
    }
    return qrdesign::cli::run_config_file(config_path, overrides, std::cout, std::cerr);
}
