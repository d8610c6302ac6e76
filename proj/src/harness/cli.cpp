#include "phil/harness/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

#include "phil/harness/export.hpp"
#include "phil/harness/plots.hpp"
#include "phil/harness/scenario.hpp"

namespace phil {

namespace {

struct RunOptions {
    std::string config;
    std::string droop;
    std::string itm;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool realtime = false;
    bool no_plots = false;
};

struct BenchmarkOptions {
    std::string config = "e1-benchmark";
    std::optional<Real> dt;
    std::optional<std::size_t> probes;
    std::optional<std::uint64_t> extra_delay;
};

void summarize(std::ostream& out, const Recording& rec) {
    const std::uint64_t from = rec.step_at(rec.warmup);
    Real nadir = 0.0;
    for (std::size_t k = from; k < rec.f_grid.size(); ++k)
        nadir = std::min(nadir, rec.f_grid[k] - rec.f_grid[from]);
    out << rec.name << ": " << rec.steps << " steps, droop " << (rec.droop_enabled ? "on" : "off") << ", itm "
        << to_string(rec.itm) << ", seed " << rec.seed << "\n";
    out << "  frequency nadir after warm-up: " << nadir * 1e3 << " mHz\n";
    if (!rec.f_grid.empty()) {
        out << "  final f_grid " << rec.f_grid.back() << " Hz, p_pcc " << rec.p_pcc.back() * 1e-3 << " kW, v_rms_pcc "
            << rec.v_rms_pcc.back() << " V\n";
    }
    for (const auto& c : rec.counters)
        out << "  " << c.endpoint << " link: sent " << c.counters.sent << ", dropped " << c.counters.dropped
            << ", missing " << c.counters.missing << ", substituted " << c.substituted << "\n";
}

int run_command(const RunOptions& o) {
    ScenarioConfig cfg = resolve_config(o.config);
    if (!o.droop.empty())
        cfg.droop_enabled = o.droop == "on";
    if (!o.itm.empty())
        cfg.itm = parse_itm_variant(o.itm);
    if (o.seed)
        cfg.transport.rng_seed = *o.seed;
    if (o.realtime)
        cfg.realtime = true;
    cfg.validate();

    const auto rec = run_scenario(cfg);
    const std::filesystem::path out = o.out.empty() ? std::filesystem::path("out") / cfg.name : std::filesystem::path(o.out);
    export_csv(rec, out);
    if (!o.no_plots)
        export_plots(rec, out);
    summarize(std::cout, rec);
    std::cout << "  output written to " << out.string() << "\n";
    return kExitOk;
}

int benchmark_command(const BenchmarkOptions& o) {
    ScenarioConfig cfg = resolve_config(o.config);
    if (o.dt)
        cfg.dt = *o.dt;
    if (o.probes)
        cfg.benchmark_probes = *o.probes;
    if (o.extra_delay)
        cfg.transport.extra_delay_steps = *o.extra_delay;
    if (cfg.transport.mode != TransportMode::udp)
        cfg.transport.mode = TransportMode::loopback;
    print_delay_report(std::cout, run_benchmark(cfg));
    return kExitOk;
}

int validate_command(const std::string& path) {
    const auto cfg = resolve_config(path);
    std::cout << path << ": ok (" << cfg.name << ", " << cfg.total_steps() << " steps, " << cfg.events.size()
              << " events)\n";
    return kExitOk;
}

int list_command() {
    for (const auto& name : bundled_scenarios()) {
        std::string description;
        try {
            description = load_config_file(scenario_dir() / (name + ".yaml")).description;
        } catch (const ConfigError& e) {
            description = std::string("invalid: ") + e.what();
        }
        std::cout << name << "  " << description << "\n";
    }
    return kExitOk;
}

} // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Software PHIL co-simulation of a grid and a microgrid coupled through an ITM interface",
                 "phil-sim"};
    app.require_subcommand(1);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "Run a scenario and write CSV and SVG output");
    run_cmd->add_option("--config", run.config, "Config file or bundled scenario name")->required();
    run_cmd->add_option("--droop", run.droop, "Override droop control")->check(CLI::IsMember({"on", "off"}));
    run_cmd->add_option("--itm", run.itm, "Override the interface variant")->check(CLI::IsMember({"raw", "dp"}));
    run_cmd->add_option("--seed", run.seed, "Transport RNG seed");
    run_cmd->add_option("--out", run.out, "Output directory (default out/<name>)");
    run_cmd->add_flag("--realtime", run.realtime, "Pace both loops to wall-clock time");
    run_cmd->add_flag("--no-plots", run.no_plots, "Skip SVG output");

    BenchmarkOptions bench;
    auto* bench_cmd = app.add_subcommand("benchmark", "Measure the loopback delay of the coupling link");
    bench_cmd->add_option("--config", bench.config, "Config file or bundled scenario name")
        ->default_val("e1-benchmark");
    bench_cmd->add_option("--dt", bench.dt, "Step size in seconds");
    bench_cmd->add_option("--probes", bench.probes, "Number of probes");
    bench_cmd->add_option("--extra-delay", bench.extra_delay, "Extra delay steps per direction");

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate-config", "Check a config file");
    validate_cmd->add_option("config", validate_path, "Config file or bundled scenario name")->required();

    auto* list_cmd = app.add_subcommand("list-scenarios", "List bundled scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run_cmd)
            return run_command(run);
        if (*bench_cmd)
            return benchmark_command(bench);
        if (*validate_cmd)
            return validate_command(validate_path);
        if (*list_cmd)
            return list_command();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const RuntimeError& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}

} // namespace phil
