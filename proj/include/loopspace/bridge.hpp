#pragma once

#include "loopspace/heat_kernel.hpp"
#include "loopspace/mc.hpp"
#include "loopspace/transport.hpp"

#include <cstdint>

namespace loopspace {

struct BridgeConfig {
    ManifoldModel model;
    TimeGrid grid;
    double eps_splice = 0.005;
    std::uint64_t seed = 0;
    Vector m0;
    FramePoint r0;
    HeatKernelOptions kernel{};
    int max_attempts = 100;

    // m0 and r0 default to default_base_point / default_frame.
    static BridgeConfig make(const ManifoldModel& model, int n_steps, double eps_splice = 0.005,
                             std::uint64_t seed = 0);

    // Throws ContractViolation unless 0 < eps <= 0.01, eps >= 4/N and r0 is
    // an orthonormal frame at m0.
    void validate() const;

    // Number of grid steps covered by the endpoint splice.
    int splice_steps() const;
};

struct LoopSample {
    ManifoldPath path;
    FramePath frames;
    EuclideanPath x;
    int rejections = 0;
};

class BridgeSampler {
public:
    explicit BridgeSampler(BridgeConfig cfg);

    const BridgeConfig& config() const noexcept { return cfg_; }
    const HeatKernelEvaluator& kernel() const noexcept { return kernel_; }

    // Pinned Brownian motion from m0 back to m0. The driving noise carries
    // the drift frame^T grad log p_{1-s}(gamma_s, m0); the last splice_steps()
    // steps follow the geodesic from gamma(1 - eps) to m0.
    LoopSample sample(RngStream& rng) const;

    // Unpinned Brownian motion developed from r0.
    LoopSample sample_wiener(RngStream& rng) const;

    // p_s(m0, y) p_{1-s}(y, m0) / p_1(m0, m0)
    double marginal_density(double s, const Vector& y) const;

private:
    bool try_sample(RngStream& rng, LoopSample& out) const;

    BridgeConfig cfg_;
    HeatKernelEvaluator kernel_;
};

LoopSample sample_bridge(const BridgeConfig& cfg, RngStream& rng);
LoopSample sample_wiener(const BridgeConfig& cfg, RngStream& rng);
double bridge_marginal_density(const BridgeConfig& cfg, double s, const Vector& y);

}  // namespace loopspace
