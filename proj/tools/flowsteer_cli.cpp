// SPDX-License-Identifier: Apache-2.0
// Command-line front end: flowsteer <subcommand> [--config PATH] [--preset NAME]... [--set key=value]...

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowsteer/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Scheduled fidelity conditioning for rectified-flow samplers"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> presets;
    std::vector<std::string> overrides;
    for (const auto& name : flowsteer::subcommand_names()) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON experiment config");
        sub->add_option("--preset", presets, "built-in preset applied before the config (desk, paperscale)");
        sub->add_option("--set", overrides, "override a dotted config key, e.g. train.steps=500");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const auto cfg = flowsteer::load_config(config_path, presets, overrides);
        flowsteer::run_subcommand(command, cfg);
    } catch (const std::exception& e) {
        std::cerr << "flowsteer " << command << ": " << e.what() << '\n';
        return flowsteer::exit_code_for(e);
    }
    return 0;
}
