#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selm/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"SELM time-series forecaster: semantic-enhanced frozen-backbone forecasting"};
    app.require_subcommand(1);

    selm::TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train on a delimiter-separated series file");
    train->add_option("--config", train_args.config_path, "Flat-key config file");
    train->add_option("--data", train_args.data_path, "Input series file")->required();
    train->add_option("--out", train_args.out_dir, "Output directory")->required();

    selm::EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Roll out a checkpoint over test horizons");
    evaluate->add_option("--checkpoint", eval_args.checkpoint_path, "checkpoint.selm path")
        ->required();
    evaluate->add_option("--data", eval_args.data_path, "Input series file")->required();
    evaluate->add_option("--out", eval_args.out_dir, "Output directory")->required();
    evaluate->add_option("--horizons", eval_args.horizons,
                         "Forecast horizons (default: the native training horizon)");
    evaluate->add_flag("--plot", eval_args.plot, "Emit per-channel SVG line charts");

    selm::AblateArgs ablate_args;
    auto* ablate =
        app.add_subcommand("ablate", "Train baseline / +TSCC / +TSCC+Time-Adapter with shared batches");
    ablate->add_option("--config", ablate_args.config_path, "Flat-key config file");
    ablate->add_option("--data", ablate_args.data_path, "Input series file")->required();
    ablate->add_option("--out", ablate_args.out_dir, "Output directory")->required();
    ablate->add_option("--horizons", ablate_args.horizons, "Evaluation horizons");

    selm::GradcheckArgs grad_args;
    auto* gradcheck =
        app.add_subcommand("gradcheck", "Finite-difference audit of the composed model gradients");
    gradcheck->add_option("--config", grad_args.config_path, "Flat-key config file");

    selm::ExportArgs export_args;
    auto* exp = app.add_subcommand("export-embeddings",
                                   "Write GA/GC/correlation/prototype matrices for offline tools");
    exp->add_option("--checkpoint", export_args.checkpoint_path, "checkpoint.selm path")
        ->required();
    exp->add_option("--data", export_args.data_path, "Input series file")->required();
    exp->add_option("--out", export_args.out_dir, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return selm::cmd_train(train_args);
    if (evaluate->parsed()) return selm::cmd_evaluate(eval_args);
    if (ablate->parsed()) return selm::cmd_ablate(ablate_args);
    if (gradcheck->parsed()) return selm::cmd_gradcheck(grad_args);
    if (exp->parsed()) return selm::cmd_export_embeddings(export_args);
    return selm::kExitFailure;
}
