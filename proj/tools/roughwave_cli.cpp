#include "roughwave/commands.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <string>
#include <utility>

int main(int argc, char** argv)
{
    using namespace roughwave;

    CLI::App app{"Stationary profiles and Riemann runs for nonlocal traffic models with a speed-limit jump"};
    app.require_subcommand(1);

    std::string config;
    CommandOptions opt;
    std::string out_dir;
    double dx = 0.0;

    const std::pair<const char*, const char*> commands[] = {
        {"classify", "print the case tag and the four flux-level densities"},
        {"profile", "compute one stationary profile"},
        {"family", "compute a family of profiles at the configured traces"},
        {"simulate", "run the Riemann problem and write snapshots"},
        {"sweep", "run all sixteen cases and write a manifest"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "scenario file (key = value lines)")->required();
        sub->add_option("--out", out_dir, "output directory, overrides output_dir");
        sub->add_option("--dx", dx, "grid spacing, overrides dx")->check(CLI::PositiveNumber);
        sub->add_flag("--quiet", opt.quiet, "suppress reports on stdout");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    if (!out_dir.empty())
        opt.out_dir = out_dir;
    if (dx > 0.0)
        opt.dx = dx;
    opt.workers = default_workers();

    const std::string command = app.get_subcommands().front()->get_name();
    Scenario scenario;
    try {
        scenario = load_scenario(config);
    } catch (const Error& e) {
        std::cerr << error_line(e) << '\n';
        return exit_code_for(e.code());
    }
    return run_command(command, scenario, opt, std::cout, std::cerr);
}
