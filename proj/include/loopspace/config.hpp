#pragma once

#include "loopspace/bridge.hpp"
#include "loopspace/flow.hpp"
#include "loopspace/functionals.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace loopspace {

// Flat key = value settings for one experiment run. Dotted keys name the
// section (grid.N, bridge.eps_splice, flow.dt, ...); threshold.<check> keys
// override an experiment's pass/fail bounds.
struct ExperimentConfig {
    std::string manifold = "sphere";  // sphere | torus
    std::vector<double> torus_lengths{2 * std::numbers::pi, 2 * std::numbers::pi};
    int grid_n = 1024;
    double eps_splice = 0.005;
    std::uint64_t seed = 1;
    std::size_t samples = 0;  // 0: the experiment's own default
    int workers = 1;

    HFamily h;  // default: first Fourier mode on axis 0
    FlowConfig flow{0.01};  // dt; the library default is finer than experiments need
    HolderParams holder{};
    HeatKernelOptions heatkernel{};

    std::vector<double> rate_s{0.5, 0.75, 0.875, 0.9375};
    int rate_mode = 16;
    double lambda_linear = 10.0;
    double fernique_lambda = 0.4;
    int gradient_paths = 100;

    std::map<std::string, double> thresholds;
    std::map<std::string, std::size_t> h_list_lengths;  // as given, checked by validate

    ManifoldModel model() const;
    BridgeConfig bridge() const;
    CameronMartinVector h_vector(const TimeGrid& g) const;
    std::size_t samples_or(std::size_t fallback) const { return samples > 0 ? samples : fallback; }
    double threshold(const std::string& name, double fallback) const;

    // Applies one setting; throws ConfigError on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    // Throws ConfigError when a module invariant does not hold.
    void validate() const;

    static ExperimentConfig parse(const std::string& text);
    static ExperimentConfig load(const std::filesystem::path& file);

    // Every recognised non-threshold key with its current value.
    std::vector<std::pair<std::string, std::string>> entries() const;
};

}  // namespace loopspace
