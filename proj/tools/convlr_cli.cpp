#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "convlr/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"convlr: recurrent radial MRI reconstruction experiments"};
    app.require_subcommand(1);

    convlr::CommonOptions common;
    std::string config, out;
    std::uint64_t seed = 0;
    app.add_option("--config", config, "Experiment config (JSON); defaults are used when omitted");
    app.add_option("--out", out, "Output directory");
    auto* seed_opt = app.add_option("--seed", seed, "Seed override (simulate: first training seed; train: loop seed)");
    app.add_option("--threads", common.threads, "Worker threads (default: $CONVLR_THREADS or 1)");

    auto* simulate = app.add_subcommand("simulate", "Generate the synthetic dataset");
    simulate->fallthrough();

    convlr::TrainOptions train;
    std::string train_dataset;
    auto* train_cmd = app.add_subcommand("train", "Train the recurrent network");
    train_cmd->fallthrough();
    train_cmd->add_option("--dataset", train_dataset, "Dataset directory")->required();
    train_cmd->add_flag("--mask-lstm", train.mask_lstm, "Zero the Conv-LSTM contribution (masked ablation)");
    train_cmd->add_flag("--no-discriminator", train.no_discriminator, "Drop the adversarial term");
    train_cmd->add_flag("--no-initializer", train.no_initializer, "Start from zero recurrent states");
    std::size_t steps = 0, spokes = 0;
    auto* steps_opt = train_cmd->add_option("--steps", steps, "Override training.steps");
    auto* spokes_opt = train_cmd->add_option("--spokes", spokes, "Override training.spokes");

    convlr::ReconstructOptions recon;
    std::string recon_dataset, checkpoint;
    auto* recon_cmd = app.add_subcommand("reconstruct", "Reconstruct a dataset split");
    recon_cmd->fallthrough();
    recon_cmd->add_option("--dataset", recon_dataset, "Dataset directory")->required();
    recon_cmd->add_option("--method", recon.method, "convlr | grasp | regrid | truth")
        ->check(CLI::IsMember({"convlr", "grasp", "regrid", "truth"}));
    recon_cmd->add_option("--checkpoint", checkpoint, "Model checkpoint (convlr)");
    recon_cmd->add_option("--spokes", recon.spokes, "Spoke counts to reconstruct");
    recon_cmd->add_option("--frames", recon.frames, "Sequence lengths T to reconstruct");
    recon_cmd->add_option("--split", recon.split, "train | val | test");

    convlr::EvaluateOptions eval;
    std::string eval_dataset;
    std::vector<std::string> recon_dirs;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score reconstructions against ground truth");
    eval_cmd->fallthrough();
    eval_cmd->add_option("--dataset", eval_dataset, "Dataset directory")->required();
    eval_cmd->add_option("recon_dirs", recon_dirs, "Reconstruction directories")->required();

    convlr::GradcheckOptions gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every differentiable block");
    gc_cmd->add_flag("--sabotage", gc.sabotage, "Include a deliberately wrong backward pass");
    gc_cmd->add_option("--tolerance", gc.tolerance, "Maximum relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : convlr::kExitValidation;
    }

    common.config = config;
    common.out = out;
    if (*seed_opt) common.seed = seed;

    if (*simulate) return convlr::cmd_simulate(common, std::cout, std::cerr);
    if (*train_cmd) {
        train.dataset = train_dataset;
        if (*steps_opt) train.steps = steps;
        if (*spokes_opt) train.spokes = spokes;
        return convlr::cmd_train(common, train, std::cout, std::cerr);
    }
    if (*recon_cmd) {
        recon.dataset = recon_dataset;
        recon.checkpoint = checkpoint;
        return convlr::cmd_reconstruct(common, recon, std::cout, std::cerr);
    }
    if (*eval_cmd) {
        eval.dataset = eval_dataset;
        eval.recon_dirs.assign(recon_dirs.begin(), recon_dirs.end());
        return convlr::cmd_evaluate(common, eval, std::cout, std::cerr);
    }
    return convlr::cmd_gradcheck(gc, std::cout, std::cerr);
}
