#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "flexsim/cli.hpp"

namespace cli = flexsim::cli;

int main(int argc, char** argv) {
    CLI::App app{"flexN+M shared-exponent tensor simulator"};
    app.require_subcommand(1);

    cli::TrainOptions train_opt;
    std::string train_config_file;
    auto* train = app.add_subcommand("train", "train a model and write learning curves");
    train->add_option("--config", train_config_file, "key=value config file (flags override it)");
    train->add_option("--format", train_opt.format, "flexN+M or 'reference'")
        ->capture_default_str();
    train->add_option("--model", train_opt.model, "mlp or convnet")->capture_default_str();
    train->add_option("--iters", train_opt.iters, "training iterations")->capture_default_str();
    train->add_option("--batch", train_opt.batch, "minibatch size")->capture_default_str();
    train->add_option("--lr", train_opt.lr, "learning rate")->capture_default_str();
    train->add_option("--seed", train_opt.seed, "rng seed (shared across arms)")
        ->capture_default_str();
    train->add_option("--out", train_opt.out, "output directory (required unless set in the config)");
    train->add_flag("--trace", train_opt.trace, "write the exponent trace CSV");
    train->add_option("--data", train_opt.data, "CSV dataset (default: synthetic blobs)");
    train->add_option("--alpha", train_opt.autoflex.alpha, "headroom factor")
        ->capture_default_str();
    train->add_option("--beta", train_opt.autoflex.beta, "std multiplier")
        ->capture_default_str();
    train->add_option("--gamma", train_opt.autoflex.gamma, "additive constant (LSB units)")
        ->capture_default_str();
    train->add_option("--window", train_opt.autoflex.window, "statistics window length")
        ->capture_default_str();

    cli::CompareOptions cmp_opt;
    auto* compare = app.add_subcommand("compare", "compare two run directories");
    compare->add_option("run_a", cmp_opt.run_a, "first run directory")->required();
    compare->add_option("run_b", cmp_opt.run_b, "baseline run directory")->required();
    compare->add_option("--tol", cmp_opt.tol, "final smoothed-loss relative tolerance")
        ->capture_default_str();
    compare->add_option("--smooth", cmp_opt.smooth_window, "trailing-mean window")
        ->capture_default_str();

    cli::ReplayOptions rep_opt;
    auto* replay =
        app.add_subcommand("autoflex-replay", "replay scale management over a recorded stream");
    replay->add_option("stream", rep_opt.stream_file, "file with one max value per line")
        ->required();
    replay->add_option("--format", rep_opt.format, "flexN+M")->capture_default_str();
    replay->add_option("--out", rep_opt.out_csv, "CSV output file (default: stdout)");
    replay->add_option("--alpha", rep_opt.autoflex.alpha, "headroom factor")
        ->capture_default_str();
    replay->add_option("--beta", rep_opt.autoflex.beta, "std multiplier")->capture_default_str();
    replay->add_option("--gamma", rep_opt.autoflex.gamma, "additive constant (LSB units)")
        ->capture_default_str();
    replay->add_option("--window", rep_opt.autoflex.window, "statistics window length")
        ->capture_default_str();

    cli::QuantizeOptions q_opt;
    auto* quantize = app.add_subcommand("quantize", "pick a scale for a vector and dump it");
    quantize->add_option("input", q_opt.input_file, "file of real values")->required();
    quantize->add_option("--format", q_opt.format, "flexN+M")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return cli::kUsageError;
    }

    try {
        if (train->parsed()) {
            if (!train_config_file.empty()) {
                std::set<std::string> given;
                for (const char* name : {"--format", "--model", "--iters", "--batch", "--lr",
                                         "--seed", "--out", "--trace", "--data", "--alpha",
                                         "--beta", "--gamma", "--window"})
                    if (train->count(name) > 0) given.insert(name + 2);  // strip the dashes
                const int rc =
                    cli::apply_train_config(train_config_file, given, train_opt, std::cerr);
                if (rc != cli::kOk) return rc;
            }
            return cli::cmd_train(train_opt, std::cout, std::cerr);
        }
        if (compare->parsed()) return cli::cmd_compare(cmp_opt, std::cout, std::cerr);
        if (replay->parsed()) return cli::cmd_autoflex_replay(rep_opt, std::cout, std::cerr);
        if (quantize->parsed()) return cli::cmd_quantize(q_opt, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kRuntimeError;
    }
    return cli::kUsageError;
}
