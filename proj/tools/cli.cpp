#include "cli.hpp"

#include <string>
#include <vector>

#include "CLI11.hpp"
#include "experiment.hpp"

namespace gradguide {

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"dynamic gradient guidance experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::string seeds;
    std::string out;
    std::vector<std::string> overrides;

    const auto add_run_options = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config file")->required();
        cmd->add_option("--seeds", seeds, "comma-separated seed list (overrides config)");
        cmd->add_option("--out", out, "output root (overrides config and environment)");
        cmd->add_option("overrides", overrides, "dotted key=value config overrides");
    };
    CLI::App* run = app.add_subcommand("run", "train the configured variant once per seed");
    add_run_options(run);
    CLI::App* ablate =
        app.add_subcommand("ablate", "variant grid, guidance toggles and alpha sweep");
    add_run_options(ablate);

    std::string summary_csv;
    std::string plot_out;
    CLI::App* plot = app.add_subcommand("plot", "aggregate a summary CSV into plot data");
    plot->add_option("--summary", summary_csv, "summary CSV from run or ablate")->required();
    plot->add_option("--out", plot_out, "directory for plot data");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    // Flag overrides outrank positional ones, so append them last.
    if (!seeds.empty()) overrides.push_back("seeds=" + seeds);
    if (!out.empty()) overrides.push_back("output_dir=" + out);

    if (run->parsed()) return cmd_run(config_path, overrides);
    if (ablate->parsed()) return cmd_ablate(config_path, overrides);
    if (plot_out.empty()) plot_out = default_output_root() + "/plots";
    return cmd_plot(summary_csv, plot_out);
}

}  // namespace gradguide
