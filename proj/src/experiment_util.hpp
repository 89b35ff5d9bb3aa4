#pragma once

#include "loopspace/experiments.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace loopspace::detail {

inline constexpr double kPi = std::numbers::pi;

// |mean - target| / SE, infinite when the SE vanishes but the mean misses
inline double z_score(const MCStat& st, double target)
{
    const double se = st.se();
    if (se > 0.0) return std::abs(st.mean - target) / se;
    return st.mean == target ? 0.0 : std::numeric_limits<double>::infinity();
}

// |a - b| / sqrt(se_a^2 + se_b^2) for two independent estimates
inline double z_diff(const MCStat& a, const MCStat& b)
{
    const double se = std::hypot(a.se(), b.se());
    if (se > 0.0) return std::abs(a.mean - b.mean) / se;
    return a.mean == b.mean ? 0.0 : std::numeric_limits<double>::infinity();
}

inline std::string fmt(double x, int precision = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, x);
    return buf;
}

BridgeSampler make_sampler(const ExperimentConfig& cfg);

// cfg.h on the grid; throws ConfigError unless it vanishes at s = 1.
CameronMartinVector require_h0(const ExperimentConfig& cfg, const TimeGrid& g, const std::string& experiment);

HFamily family(std::initializer_list<HFamily::Term> terms);

// <h, k>_H from the closed-form rates (Fourier modes are orthonormal).
double family_inner(const HFamily& a, const HFamily& b);

// Second tangent axis when the model has one, else the first.
inline int other_axis(const ManifoldModel& m) { return m.dim() > 1 ? 1 : 0; }

}  // namespace loopspace::detail
