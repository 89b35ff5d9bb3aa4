#pragma once

#include "loopspace/manifold.hpp"

namespace loopspace {

struct HeatKernelOptions {
    double series_tol = 1e-12;
    int max_terms = 10000;
    double t_min = 1e-4;
};

// Heat kernel of the generator Delta/2 on a model manifold.
//
// Torus: product of wrapped Gaussians. Sphere: Legendre series in cos(theta).
// Immutable after construction.
class HeatKernelEvaluator {
public:
    explicit HeatKernelEvaluator(ManifoldModel model, HeatKernelOptions opts = {});

    const ManifoldModel& model() const noexcept { return model_; }
    const HeatKernelOptions& options() const noexcept { return opts_; }

    double heat_kernel(double t, const Vector& p, const Vector& q) const;

    // Gradient in p of log p_t(p, q), tangent at p. Throws PrecisionLoss when
    // the kernel is too far in its tail for the ratio to be resolved.
    Vector grad_log_heat_kernel(double t, const Vector& p, const Vector& q) const;

    // Integral of p_t(x, y) over x in M.
    double normalization_check(double t, const Vector& y) const;
    double normalization_check(double t) const { return normalization_check(t, default_base_point(model_)); }

    // Sphere kernel as a function of c = cos(theta), with its c-derivative.
    struct ZonalValue {
        double value;
        double dvalue;
        double roundoff = 0.0;  // bound on the cancellation error of value
    };
    ZonalValue sphere_zonal(double t, double c) const;

    // One-dimensional wrapped Gaussian of the displacement delta on a circle of
    // length L, with its delta-derivative.
    ZonalValue circle(double t, double delta, double L) const;

private:
    void check_time(double t) const;

    ManifoldModel model_;
    HeatKernelOptions opts_;
};

}  // namespace loopspace
