#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hkprop/experiment.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kNumericalFailure = 3 };

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Herman-Kluk semiclassical propagation experiments"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    unsigned threads = hkprop::default_threads();
    bool deterministic = false;

    auto add = [&](const std::string &name, const std::string &help) {
        CLI::App *sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Flat JSON run configuration")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Directory for CSV and JSON outputs");
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--deterministic", deterministic, "Write zero wall times so tables are byte-identical");
        return sub;
    };
    add("identity", "Resolution-of-identity check (analysis then synthesis)");
    add("propagate", "Run the configured method and compare with the reference");
    add("converge", "eps sweep with a fitted log-log slope");
    add("compare", "hk, fga and tga side by side");
    add("reference", "Spectral reference solutions with a dt-halving self check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        const hkprop::RunConfig cfg = hkprop::load_config(config_path);
        const hkprop::RunContext ctx{out_dir, threads, deterministic};
        const std::string cmd = app.get_subcommands().front()->get_name();
        hkprop::ErrorTable table;
        if (cmd == "identity") table = hkprop::run_identity(cfg, ctx);
        else if (cmd == "propagate") table = hkprop::run_propagate(cfg, ctx);
        else if (cmd == "converge") table = hkprop::run_converge(cfg, ctx);
        else if (cmd == "compare") table = hkprop::run_compare(cfg, ctx);
        else table = hkprop::run_reference(cfg, ctx);
        hkprop::print_table(table, std::cout);
    } catch (const hkprop::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.code() == hkprop::ErrorCode::ConfigError ? kConfigError : kNumericalFailure;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNumericalFailure;
    }
    return kOk;
}
