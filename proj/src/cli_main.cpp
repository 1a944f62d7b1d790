#include <iostream>

#include <CLI11.hpp>

#include "fgd/cli.hpp"
#include "fgd/errors.hpp"

namespace fgd::cli {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Forward gradient descent experiments for the linear model"};
    app.require_subcommand(1);

    Overrides ov;
    std::string config_path, out_dir, study;
    std::uint64_t seed = 0;
    int reps = 0, threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--reps", reps, "repetitions");
        sub->add_flag("--paper-scale", ov.paper_scale, "use the full-size presets");
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
    };
    CLI::App* run = app.add_subcommand("run", "run a study and write <study>.csv and <study>.meta");
    add_common(run);
    run->add_option("--study", study, "dim_sweep, reps_sweep, rank_sweep or step_trace");
    CLI::App* verify = app.add_subcommand("verify", "Monte-Carlo checks of the moment identities");
    add_common(verify);
    CLI::App* bound = app.add_subcommand("bound", "measured error against the theoretical bound");
    add_common(bound);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    CLI::App* chosen = app.get_subcommands().front();
    if (!config_path.empty())
        ov.config_path = config_path;
    if (!out_dir.empty())
        ov.out_dir = out_dir;
    if (!study.empty())
        ov.study = study;
    if (chosen->count("--seed"))
        ov.seed = seed;
    if (chosen->count("--reps"))
        ov.repetitions = reps;
    if (chosen->count("--threads"))
        ov.threads = threads;

    try {
        const Config config = resolve_config(ov);
        if (chosen == run)
            return cmd_run(config, out);
        if (chosen == verify)
            return cmd_verify(config, out);
        return cmd_bound(config, out);
    } catch (const InadmissibleError& e) {
        err << "inadmissible schedule: " << e.what() << "\n";
        return kExitCheckFailed;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DivergenceError& e) {
        err << "divergence: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace fgd::cli
