#include <iostream>

#include <CLI11.hpp>

#include "autoenv/commands.hpp"

namespace cli = autoenv::cli;

namespace {

void common_flags(CLI::App* sub, cli::CommandOptions& o) {
    sub->add_option("--benchmark", o.benchmark, "voltage-control, load-shedding, economic-dispatch, q-market, max-renewables");
    sub->add_option("--trials", o.trials, "Trial budget of the study");
    sub->add_option("--seeds", o.seeds, "Training seeds per trial");
    sub->add_option("--steps", o.steps, "Training steps per run");
    sub->add_option("--workers", o.workers, "Trials trained concurrently");
    sub->add_option("--seed", o.seed, "Study seed");
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--config", o.config, "Study configuration JSON")->check(CLI::ExistingFile);
    sub->add_flag("--dry-run", o.dry_run, "Validate and print the plan without running");
    sub->add_flag("--quiet", o.quiet, "Only print the summary");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Environment design search for reinforcement learning on optimal power flow"};
    app.require_subcommand(1);
    cli::CommandOptions o;

    auto* study = app.add_subcommand("study", "Run or resume a design search study");
    common_flags(study, o);

    auto* baseline = app.add_subcommand("baseline", "Evaluate the baseline design over penalty weights");
    common_flags(baseline, o);
    baseline->add_option("--weights", o.weights, "Penalty weights of the sweep");

    auto* analyze = app.add_subcommand("analyze", "Significance tests over one or more finished studies");
    common_flags(analyze, o);
    analyze->add_option("studies", o.studies, "Study directories");
    analyze->add_option("--criteria", o.criteria, "pareto, validity, optimization, utopia");
    analyze->add_option("--fraction", o.fraction, "Top fraction for ranked splits");

    auto* verify = app.add_subcommand("verify", "Retrain the extracted and baseline designs and test them");
    common_flags(verify, o);
    verify->add_option("studies", o.studies, "Study directory")->expected(0, 1);
    verify->add_option("--criterion", o.criterion, "Extraction criterion");
    verify->add_option("-k", o.k, "Trials combined into the extracted design");
    verify->add_option("--verify-steps", o.verify_steps, "Training steps (overridden by --steps)");
    verify->add_option("--eval-every", o.eval_every, "Learning curve resolution in steps");
    verify->add_option("--variants", o.variants, "default and/or paper-size");
    verify->add_option("--baseline-weight", o.baseline_weight, "Penalty weight of the baseline design");

    auto* plot = app.add_subcommand("plot", "Write trial tables, the Pareto plot and hypervolume history");
    common_flags(plot, o);
    plot->add_option("studies", o.studies, "Study directories");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kExitOk : cli::kExitConfig;
    }

    return cli::guarded(
        [&] {
            if (study->parsed()) return cli::cmd_study(o, std::cout);
            if (baseline->parsed()) return cli::cmd_baseline(o, std::cout);
            if (analyze->parsed()) return cli::cmd_analyze(o, std::cout);
            if (verify->parsed()) return cli::cmd_verify(o, std::cout);
            return cli::cmd_plot(o, std::cout);
        },
        std::cerr);
}
