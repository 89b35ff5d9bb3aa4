#include "loopspace/config.hpp"
#include "loopspace/experiments.hpp"
#include "loopspace/mc.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>

using namespace loopspace;

namespace {

constexpr int kUsage = 2;

struct Overrides {
    std::string config_file;
    std::string manifold;
    std::vector<std::string> settings;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples;
    std::optional<int> workers;
};

void add_common(CLI::App* cmd, Overrides& o)
{
    cmd->add_option("--config", o.config_file, "key = value config file");
    cmd->add_option("--manifold", o.manifold, "sphere or torus")->check(CLI::IsMember({"sphere", "torus"}));
    cmd->add_option("--set", o.settings, "extra key=value setting, repeatable");
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_option("--samples", o.samples, "number of Monte Carlo samples");
    cmd->add_option("--workers", o.workers, "worker threads");
}

ExperimentConfig build_config(const Overrides& o)
{
    ExperimentConfig cfg = o.config_file.empty() ? ExperimentConfig{} : ExperimentConfig::load(o.config_file);
    if (!o.manifold.empty()) cfg.set("manifold", o.manifold);
    for (const auto& kv : o.settings) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.samples) cfg.samples = *o.samples;
    if (o.workers) cfg.workers = *o.workers;
    return cfg;
}

int run(const std::string& name, const Overrides& o, const std::string& out)
{
    const ExperimentConfig cfg = build_config(o);
    const ExperimentReport report = run_experiment(name, cfg);
    const std::filesystem::path dir = 
        out.empty() ? std::filesystem::path("results") / name : std::filesystem::path(out);
    write_report(report, cfg, dir);
    std::cout << name << " on " << report.manifold << " (" << std::fixed << std::setprecision(1)
              << report.runtime_s << " s)\n"
              << std::defaultfloat << std::setprecision(6);
    for (const auto& c : report.checks)
        std::cout << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << " = " << c.measured << '\n';
    std::cout << "results in " << dir.string() << '\n';
    return exit_status(report);
}

int dump_bridge(const Overrides& o, std::size_t count, const std::string& out)
{
    ExperimentConfig cfg = build_config(o);
    cfg.validate();
    const BridgeSampler bs(cfg.bridge());
    std::ofstream file;
    std::ostream& os = out.empty() || out == "-" ? std::cout : (file.open(out), file);
    if (!os) throw ConfigError("cannot open '" + out + "'");
    const int d = bs.config().model.embed_dim();
    os << "sample,s";
    for (int a = 0; a < d; ++a) os << ",p" << a;
    os << '\n' << std::setprecision(12);
    const auto loops = parallel_collect<ManifoldPath>(count, cfg.seed, cfg.workers,
                                                      [&](std::size_t, RngStream& rng) { return bs.sample(rng).path; });
    for (std::size_t i = 0; i < loops.size(); ++i)
        for (int k = 0; k <= loops[i].grid.steps(); ++k) {
            os << i << ',' << loops[i].grid.time(k);
            for (int a = 0; a < d; ++a) os << ',' << loops[i].at(k)(a);
            os << '\n';
        }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Monte Carlo experiments on pinned Brownian loops"};
    app.require_subcommand(1);

    Overrides run_opts;
    std::string experiment, out_dir;
    CLI::App* run_cmd = app.add_subcommand("run", "run one experiment and write results");
    run_cmd->add_option("experiment", experiment, "experiment name (see list)")->required();
    run_cmd->add_option("--out", out_dir, "output directory (default results/<experiment>)");
    add_common(run_cmd, run_opts);

    CLI::App* list_cmd = app.add_subcommand("list", "list experiments and their checks");

    Overrides dump_opts;
    std::size_t count = 1;
    std::string dump_out;
    CLI::App* dump_cmd = app.add_subcommand("sample", "write sampled loops as CSV");
    dump_cmd->add_option("--count", count, "number of loops");
    dump_cmd->add_option("--out", dump_out, "CSV file (default stdout)");
    add_common(dump_cmd, dump_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    try {
        if (*run_cmd) return run(experiment, run_opts, out_dir);
        if (*list_cmd) {
            for (const auto& e : experiment_registry()) {
                std::cout << e.name << "\n    " << e.description << "\n    checks:";
                for (const auto& c : e.checks) std::cout << ' ' << c;
                std::cout << '\n';
            }
            return 0;
        }
        if (*dump_cmd) return dump_bridge(dump_opts, count, dump_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ContractViolation& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kUsage;
}
