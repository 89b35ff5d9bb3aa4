#pragma once

#include "loopspace/functionals.hpp"

namespace loopspace {

struct FlowConfig {
    double dt = 1e-3;
    double t_final = 0.25;
    int picard_iters = 2;

    // Throws ContractViolation unless dt > 0, picard_iters >= 0 and
    // |t_final| / dt is an integer.
    void validate() const;
};

// Pulled-back flow state xi_t together with its development.
struct FlowState {
    EuclideanPath xi;
    ManifoldPath path;
    FramePath frames;
    double t = 0.0;
};

FlowState make_flow_state(const ManifoldModel& m, const EuclideanPath& xi, const FramePoint& r0,
                          double t = 0.0);

// q(s) = sum_{t_k < s} Omega_{frame(k+1/2)}(h(t_k + dt/2), dxi_k)
Matrix q_kernel(const ManifoldModel& m, const FlowState& state, const CameronMartinVector& h, int s_index);

// Velocity dxi/dt of the flow as a path (d x (N+1), zero at s = 0).
//
// Each increment of xi is chosen so that the developed nodes move with
// velocity frame_k h_k exactly: a Jacobi field along every geodesic segment
// fixes the increment variation, and the curvature swept by the segment
// updates the frame rotation carried to the next node. For small increments
// this is h(s) + 1/2 int_0^s Ric h - int_0^s q dxi.
Eigen::MatrixXd flow_velocity(const ManifoldModel& m, const FlowState& state, const CameronMartinVector& h);

// The continuum form h(s) + 1/2 sum Ric_k h_k dt + q_sign * sum q_k dxi_k
// evaluated with left-point q; used to cross-check flow_velocity.
Eigen::MatrixXd flow_velocity_continuum(const ManifoldModel& m, const FlowState& state,
                                        const CameronMartinVector& h, double q_sign = -1.0);

// One flow-time step: explicit midpoint predictor, then picard_iters sweeps
// of the implicit midpoint rule, then re-development.
FlowState flow_step(const ManifoldModel& m, const FlowState& state, const CameronMartinVector& h, double dt,
                    int picard_iters = 2);

// xi_t(x): ceil(|t| / dt) equal steps of size t / n.
FlowState flow_integrate(const ManifoldModel& m, const EuclideanPath& x, const FramePoint& r0,
                         const CameronMartinVector& h, double t, const FlowConfig& cfg);

// Phi_t(gamma) = develop(xi_t(antidevelop(gamma)))
ManifoldPath flow_on_loops(const ManifoldModel& m, const ManifoldPath& path, const FramePoint& r0,
                           const CameronMartinVector& h, double t, const FlowConfig& cfg);

// K_t(gamma) = exp(int_0^t delta(h)(Phi_{-s} gamma) ds), trapezoid in s on
// the backward orbit with the flow step.
double radon_nikodym(const ManifoldModel& m, const ManifoldPath& path, const FramePoint& r0,
                     const CameronMartinVector& h, double t, const FlowConfig& cfg);

// Same, starting from an anti-developed path and its frames.
double radon_nikodym_from(const ManifoldModel& m, const FlowState& start, const CameronMartinVector& h,
                          double t, const FlowConfig& cfg);

// sup |xi_s(xi_t(x)) - xi_{s+t}(x)|
double flow_property_check(const ManifoldModel& m, const EuclideanPath& x, const FramePoint& r0,
                           const CameronMartinVector& h, double s, double t, const FlowConfig& cfg);

// max_s |frame_s^T (frame_s(t+dt) - frame_s(t)) / dt - q(s)|, the frame
// evolution against its rotation kernel.
double bismut_defect(const ManifoldModel& m, const FlowState& state, const CameronMartinVector& h, double dt,
                     int picard_iters = 2);

}  // namespace loopspace
