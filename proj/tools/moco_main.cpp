#include "moco/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"moco: cone-beam CT rigid-motion simulation and compensation"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("-o,--out", out_dir, "output directory");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "phantom + motion-free and corrupted stacks");
    CLI::App* train = app.add_subcommand("train", "build a training set and fit the RPE regressor");
    CLI::App* compensate = app.add_subcommand("compensate", "run the configured compensation methods");
    CLI::App* evaluate = app.add_subcommand("evaluate", "metrics table and slice images");
    CLI::App* all = app.add_subcommand("all", "simulate, train (if needed), compensate, evaluate");
    for (CLI::App* cmd : {simulate, train, compensate, evaluate, all}) add_common(cmd);

    CLI11_PARSE(app, argc, argv);

    moco::Config cfg;
    try {
        cfg = moco::load_config(config_path);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (simulate->parsed()) moco::cmd_simulate(cfg, out_dir);
        if (train->parsed()) moco::cmd_train(cfg, out_dir);
        if (compensate->parsed()) moco::cmd_compensate(cfg, out_dir);
        if (evaluate->parsed()) moco::cmd_evaluate(cfg, out_dir);
        if (all->parsed()) moco::cmd_all(cfg, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
