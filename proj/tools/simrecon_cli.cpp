#include <CLI11.hpp>

#include "simrecon/runconfig.hpp"

// simrecon <patterns|simulate|reconstruct|evaluate|snr-sweep|resolution-sweep>
// Exit codes: 0 success, 1 config error, 2 missing input, 3 numeric failure.

int main(int argc, char** argv) {
    CLI::App app{"training-data-free SIM reconstruction toolkit"};
    app.require_subcommand(1);

    simrecon::cli::CliOptions opt;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opt.config_path, "JSON run configuration");
        cmd->add_option("--seed", opt.seed, "seed override");
        cmd->add_option("--out", opt.out_dir, "output directory");
        cmd->add_flag("--deterministic", opt.deterministic,
                      "record deterministic mode in the manifest");
        cmd->add_flag("--quick", opt.quick, "cap reconstruction at 400 epochs");
    };

    CLI::App* patterns = app.add_subcommand("patterns", "generate illumination patterns");
    add_common(patterns);

    CLI::App* simulate = app.add_subcommand("simulate", "simulate an acquisition");
    add_common(simulate);
    simulate->add_option("--snr", opt.snr, "noise level override (peak / sigma)");

    CLI::App* recon = app.add_subcommand("reconstruct", "reconstruct a simulated run");
    add_common(recon);
    recon->add_option("--run", opt.run_dir, "run directory (default: --out)");
    recon->add_option("--lr", opt.lr, "learning rate override");
    recon->add_option("--epochs", opt.epochs, "epoch budget override");

    CLI::App* eval = app.add_subcommand("evaluate", "compute metrics for a run");
    add_common(eval);
    eval->add_option("--run", opt.run_dir, "run directory (default: --out)");

    CLI::App* snr_sweep = app.add_subcommand("snr-sweep", "simulate+reconstruct+evaluate "
                                                          "over a list of SNRs");
    add_common(snr_sweep);
    snr_sweep->add_option("--snr-list", opt.snr_list,
                          "SNR values (default 20 15 12 10 7.5 5)");
    snr_sweep->add_option("--lr", opt.lr, "learning rate override");
    snr_sweep->add_option("--epochs", opt.epochs, "epoch budget override");

    CLI::App* res_sweep = app.add_subcommand(
        "resolution-sweep", "two-line resolvability over a list of separations");
    add_common(res_sweep);
    res_sweep
        ->add_option("--separations", opt.separation_list,
                     "separations as fractions of the Abbe distance")
        ->required();
    res_sweep->add_option("--lr", opt.lr, "learning rate override");
    res_sweep->add_option("--epochs", opt.epochs, "epoch budget override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    }

    if (patterns->parsed()) return simrecon::cli::cmd_patterns(opt);
    if (simulate->parsed()) return simrecon::cli::cmd_simulate(opt);
    if (recon->parsed()) return simrecon::cli::cmd_reconstruct(opt);
    if (eval->parsed()) return simrecon::cli::cmd_evaluate(opt);
    if (snr_sweep->parsed()) return simrecon::cli::cmd_snr_sweep(opt);
    if (res_sweep->parsed()) return simrecon::cli::cmd_resolution_sweep(opt);
    return 1;
}
