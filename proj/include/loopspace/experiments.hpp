#pragma once

#include "loopspace/config.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace loopspace {

struct ResultRow {
    std::string statistic;
    double value = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n = 0;
    std::string flags;
};

// One acceptance threshold with its measured value. lo/hi are the admissible
// interval; one-sided checks use +-infinity on the open side.
struct Check {
    std::string name;
    double measured = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool pass = false;
};

struct ExperimentReport {
    std::string experiment;
    std::string manifold;
    std::vector<ResultRow> rows;
    std::vector<Check> checks;
    std::map<std::string, std::vector<std::pair<double, double>>> plots;
    std::vector<std::string> notes;
    double runtime_s = 0.0;

    bool passed() const;
    const Check* find_check(const std::string& name) const;
    const ResultRow* find_row(const std::string& statistic) const;

    void row(std::string statistic, double value, double ci_lo, double ci_hi, std::size_t n, std::string flags = {});
    void row(const std::string& statistic, const MCStat& st, std::string flags = {});
    // measured <= hi (threshold.<name> overrides hi)
    bool check_max(const ExperimentConfig& cfg, const std::string& name, double measured, double hi);
    // measured >= lo (threshold.<name> overrides lo)
    bool check_min(const ExperimentConfig& cfg, const std::string& name, double measured, double lo);
    // lo <= measured <= hi (threshold.<name>.lo / .hi override)
    bool check_range(const ExperimentConfig& cfg, const std::string& name, double measured, double lo, double hi);
    // pass/fail condition without a tunable bound
    bool check_flag(const std::string& name, bool ok, double measured = 0.0);
};

struct ExperimentInfo {
    std::string name;
    std::string description;
    std::vector<std::string> checks;  // names accepted as threshold.<name>
    std::function<ExperimentReport(const ExperimentConfig&)> run;
};

const std::vector<ExperimentInfo>& experiment_registry();
const ExperimentInfo* find_experiment(const std::string& name);

// Validates the config and the threshold keys against the experiment, runs
// it and stamps the runtime. Throws ConfigError for usage problems.
ExperimentReport run_experiment(const std::string& name, const ExperimentConfig& cfg);

// results.csv, summary.txt and plots/<curve>.dat under dir.
void write_report(const ExperimentReport& report, const ExperimentConfig& cfg, const std::filesystem::path& dir);

// 0 when every check passed, 1 otherwise.
int exit_status(const ExperimentReport& report);

// Individual experiments.
ExperimentReport bridge_marginal_experiment(const ExperimentConfig& cfg);
ExperimentReport ibp_experiment(const ExperimentConfig& cfg);
ExperimentReport divergence_rate_experiment(const ExperimentConfig& cfg);
ExperimentReport antidev_rate_experiment(const ExperimentConfig& cfg);
ExperimentReport fernique_sup_experiment(const ExperimentConfig& cfg);
ExperimentReport fernique_holder_experiment(const ExperimentConfig& cfg);
ExperimentReport div_tail_experiment(const ExperimentConfig& cfg);
ExperimentReport exp_linear_experiment(const ExperimentConfig& cfg);
ExperimentReport driver_flow_experiment(const ExperimentConfig& cfg);
ExperimentReport quasi_invariance_experiment(const ExperimentConfig& cfg);
ExperimentReport gradient_check_experiment(const ExperimentConfig& cfg);
ExperimentReport structural_experiment(const ExperimentConfig& cfg);

// Cumulative distribution of one coordinate of the circle loop at time s,
// tabulated on [0, L) from p_s p_{1-s} / p_1.
class CircleMarginalCdf {
public:
    CircleMarginalCdf(double length, double s, const HeatKernelOptions& opts = {}, int points = 20000);
    double operator()(double y) const;
    // E[g(y)] under the marginal, by the same trapezoid rule
    double expect(const std::function<double(double)>& g) const;

private:
    double length_;
    std::vector<double> grid_, density_, cdf_;
};

// Distribution of cos(theta) of the sphere loop at time s, where theta is
// the distance from the base point.
class SphereMarginalCos {
public:
    SphereMarginalCos(double s, const HeatKernelOptions& opts = {});
    double density(double c) const;  // in c, integrates to 1 over [-1, 1]
    double probability(double a, double b) const;

private:
    double s_;
    HeatKernelEvaluator kernel_;
    double norm_;
};

}  // namespace loopspace
