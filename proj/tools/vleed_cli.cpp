#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vleed/cli.hpp"

// Subcommands: synth, train, eval, sweep. One JSON config file drives each
// run; flags carry only paths, the method and the sweep lambda overrides.
int main(int argc, char** argv) {
    CLI::App app{"post-hoc face-embedding disentanglement toolkit"};
    app.require_subcommand(1);

    std::string config_path, store_path, out_path, method = "vleed", artifact;
    std::vector<double> lambdas;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic embedding store");
    synth->add_option("--config", config_path, "run config JSON")->required();
    synth->add_option("--out", out_path, "output store path")->required();

    CLI::App* train = app.add_subcommand("train", "fit a model or baseline on the train split");
    train->add_option("--config", config_path, "run config JSON")->required();
    train->add_option("--store", store_path, "embedding store")->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--method", method, "vleed | pfrnet | inlp | ive");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a released representation");
    eval->add_option("--config", config_path, "run config JSON")->required();
    eval->add_option("--artifact", artifact,
                     "model/projection/ranking file, or 'baseline' for identity")
        ->required();
    eval->add_option("--store", store_path, "embedding store")->required();
    eval->add_option("--out", out_path, "output directory")->required();

    CLI::App* sweep = app.add_subcommand("sweep", "train + eval across lambda_dis values");
    sweep->add_option("--config", config_path, "run config JSON")->required();
    sweep->add_option("--store", store_path, "embedding store")->required();
    sweep->add_option("--out", out_path, "output directory")->required();
    sweep->add_option("--method", method, "vleed | pfrnet");
    sweep->add_option("--lambdas", lambdas, "override the config lambda list");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : vleed::cli::kExitConfig;
    }

    return vleed::cli::run_guarded([&] {
        vleed::cli::RunConfig config = vleed::cli::load_run_config(config_path);
        if (synth->parsed()) {
            vleed::cli::cmd_synth(config, out_path);
        } else if (train->parsed()) {
            vleed::cli::cmd_train(config, method, store_path, out_path);
        } else if (eval->parsed()) {
            vleed::cli::cmd_eval(config, artifact, store_path, out_path);
        } else if (sweep->parsed()) {
            vleed::cli::cmd_sweep(config, lambdas.empty() ? config.sweep_lambdas : lambdas,
                                  method, store_path, out_path);
        }
    });
}
