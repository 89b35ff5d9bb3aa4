#include "loopspace/flow.hpp"

#include <cmath>

namespace loopspace {

namespace {

struct SegmentCoefficients {
    double c;      // cos(phi)
    double s;      // sin(phi) / phi
    double c_bar;  // (1 - cos(phi)) / phi^2
};

SegmentCoefficients segment_coefficients(double phi)
{
    if (phi < 1e-4) {
        const double p2 = phi * phi;
        return {1.0 - 0.5 * p2, 1.0 - p2 / 6.0, 0.5 - p2 / 24.0};
    }
    return {std::cos(phi), std::sin(phi) / phi, (1.0 - std::cos(phi)) / (phi * phi)};
}

int step_count(double t, double dt)
{
    require(dt > 0.0, "flow: dt must be positive");
    return static_cast<int>(std::ceil(std::abs(t) / dt - 1e-9));
}

FlowState shifted(const ManifoldModel& m, const FlowState& base, const Eigen::MatrixXd& dv, double scale,
                  double t)
{
    EuclideanPath xi = base.xi;
    xi.values += scale * dv;
    return make_flow_state(m, xi, base.frames[0], t);
}

}  // namespace

void FlowConfig::validate() const
{
    require(dt > 0.0, "flow: dt must be positive");
    require(picard_iters >= 0, "flow: picard_iters must be non-negative");
    const double ratio = std::abs(t_final) / dt;
    require(std::abs(ratio - std::round(ratio)) < 1e-9 * std::max(1.0, ratio), "flow: |t_final| / dt must be an integer");
}

FlowState make_flow_state(const ManifoldModel& m, const EuclideanPath& xi, const FramePoint& r0, double t)
{
    Development dev = develop(m, xi, r0);
    if (!dev.path.points.allFinite()) throw IntegrationError("flow: development produced non-finite points");
    return {xi, std::move(dev.path), std::move(dev.frames), t};
}

Matrix q_kernel(const ManifoldModel& m, const FlowState& state, const CameronMartinVector& h, int s_index)
{
    require(h.grid == state.xi.grid, "q_kernel: mismatched grids");
    require(s_index >= 0 && s_index <= h.grid.steps(), "q_kernel: index out of range");
    const int d = m.dim();
    Matrix q = Matrix::Zero(d, d);
    if (m.is_flat()) return q;
    for (int k = 0; k < s_index; ++k) {
        const Vector dxi = state.xi.increment(k);
        const FramePoint half = parallel_frame_step(m, state.frames[k], 0.5 * dxi);
        const Vector h_mid = 0.5 * (h.at(k) + h.at(k + 1));
        q += curvature_form(m, half, h_mid, dxi);
    }
    return q;
}

Eigen::MatrixXd flow_velocity(const ManifoldModel& m, const FlowState& state, const CameronMartinVector& h)
{
    require(h.grid == state.xi.grid, "flow_velocity: mismatched grids");
    const int n = h.grid.steps();
    const int d = m.dim();
    const double K = m.sectional_curvature();
    const double root_k = std::sqrt(K);

    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, n + 1);
    if (m.is_flat()) {
        v = h.h;
        return v;
    }

    // omega: frame rotation induced at node k, in frame coordinates
    Matrix omega = Matrix::Zero(d, d);
    for (int k = 0; k < n; ++k) {
        const Vector a = state.xi.increment(k);
        const Vector y0 = h.at(k);
        const Vector y1 = h.at(k + 1);
        const double len = a.norm();
        const double phi = root_k * len;
        const SegmentCoefficients sc = segment_coefficients(phi);

        Vector y0_par = Vector::Zero(d), y1_par = Vector::Zero(d);
        Vector u = Vector::Zero(d);
        if (len > 0.0) {
            u = a / len;
            y0_par = u.dot(y0) * u;
            y1_par = u.dot(y1) * u;
        }
        const Vector y0_perp = y0 - y0_par;
        const Vector y1_perp = y1 - y1_par;

        // Jacobi field J(tau) along the segment: J(1) = y1 determines J'(0)
        const Vector dj_par = y1_par - y0_par;
        const Vector dj_perp = (y1_perp - sc.c * y0_perp) / sc.s;
        const Vector dj = dj_par + dj_perp;

        v.col(k + 1) = v.col(k) + dj - omega * a;

        // mean of J over the segment
        const Vector j_bar = y0_par + 0.5 * dj_par + sc.s * y0_perp + sc.c_bar * dj_perp;
        omega += curvature_form(m, state.frames[k], j_bar, a);
    }
    return v;
}

Eigen::MatrixXd flow_velocity_continuum(const ManifoldModel& m, const FlowState& state, const CameronMartinVector& h,
                                        double q_sign)
{
    require(h.grid == state.xi.grid, "flow_velocity_continuum: mismatched grids");
    const int n = h.grid.steps();
    const int d = m.dim();
    const double dt = h.grid.dt();
    Eigen::MatrixXd v(d, n + 1);
    Vector ric_acc = Vector::Zero(d);
    Vector q_acc = Vector::Zero(d);
    Matrix q = Matrix::Zero(d, d);
    v.col(0) = h.at(0);
    for (int k = 0; k < n; ++k) {
        const Vector dxi = state.xi.increment(k);
        ric_acc += 0.5 * ricci(m, state.frames[k]) * h.at(k) * dt;
        q_acc += q * dxi;
        const Vector h_mid = 0.5 * (h.at(k) + h.at(k + 1));
        q += curvature_form(m, state.frames[k], h_mid, dxi);
        v.col(k + 1) = h.at(k + 1) + ric_acc + q_sign * q_acc;
    }
    return v;
}

FlowState flow_step(const ManifoldModel& m, const FlowState& state, const CameronMartinVector& h, double dt,
                    int picard_iters)
{
    require(picard_iters >= 0, "flow_step: picard_iters must be non-negative");
    const Eigen::MatrixXd v0 = flow_velocity(m, state, h);
    const FlowState mid = shifted(m, state, v0, 0.5 * dt, state.t + 0.5 * dt);
    Eigen::MatrixXd incr = dt * flow_velocity(m, mid, h);

    for (int it = 0; it < picard_iters; ++it) {
        const FlowState mid_it = shifted(m, state, incr, 0.5, state.t + 0.5 * dt);
        incr = dt * flow_velocity(m, mid_it, h);
    }
    FlowState out = shifted(m, state, incr, 1.0, state.t + dt);
    if (!out.xi.values.allFinite()) throw IntegrationError("flow_step: non-finite state");
    return out;
}

FlowState flow_integrate(const ManifoldModel& m, const EuclideanPath& x, const FramePoint& r0,
                         const CameronMartinVector& h, double t, const FlowConfig& cfg)
{
    FlowState state = make_flow_state(m, x, r0);
    const int n = step_count(t, cfg.dt);
    if (n == 0) return state;
    if (m.is_flat()) {
        // the vector field does not depend on the state, so every step is exact
        state.xi.values += t * h.h;
        return make_flow_state(m, state.xi, r0, t);
    }
    const double step = t / n;
    for (int i = 0; i < n; ++i) state = flow_step(m, state, h, step, cfg.picard_iters);
    state.t = t;
    return state;
}

ManifoldPath flow_on_loops(const ManifoldModel& m, const ManifoldPath& path, const FramePoint& r0,
                           const CameronMartinVector& h, double t, const FlowConfig& cfg)
{
    const EuclideanPath x = antidevelop(m, path, r0);
    return flow_integrate(m, x, r0, h, t, cfg).path;
}

double radon_nikodym_from(const ManifoldModel& m, const FlowState& start, const CameronMartinVector& h, double t,
                          const FlowConfig& cfg)
{
    const int n = step_count(t, cfg.dt);
    if (n == 0) return 1.0;
    const double step = t / n;

    FlowState state = start;
    double prev = divergence(m, h, state.xi, state.frames);
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
        if (m.is_flat()) {
            state.xi.values -= step * h.h;
            state = make_flow_state(m, state.xi, start.frames[0], state.t - step);
        } else {
            state = flow_step(m, state, h, -step, cfg.picard_iters);
        }
        const double cur = divergence(m, h, state.xi, state.frames);
        integral += 0.5 * step * (prev + cur);
        prev = cur;
    }
    return std::exp(integral);
}

double radon_nikodym(const ManifoldModel& m, const ManifoldPath& path, const FramePoint& r0,
                     const CameronMartinVector& h, double t, const FlowConfig& cfg)
{
    const EuclideanPath x = antidevelop(m, path, r0);
    return radon_nikodym_from(m, make_flow_state(m, x, r0), h, t, cfg);
}

double flow_property_check(const ManifoldModel& m, const EuclideanPath& x, const FramePoint& r0,
                           const CameronMartinVector& h, double s, double t, const FlowConfig& cfg)
{
    const FlowState first = flow_integrate(m, x, r0, h, t, cfg);
    const FlowState composed = flow_integrate(m, first.xi, r0, h, s, cfg);
    const FlowState direct = flow_integrate(m, x, r0, h, s + t, cfg);
    return (composed.xi.values - direct.xi.values).cwiseAbs().maxCoeff();
}

double bismut_defect(const ManifoldModel& m, const FlowState& state, const CameronMartinVector& h, double dt,
                     int picard_iters)
{
    const FlowState next = flow_step(m, state, h, dt, picard_iters);
    const int n = h.grid.steps();
    const int d = m.dim();
    double worst = 0.0;
    Matrix q = Matrix::Zero(d, d);
    for (int k = 0; k <= n; ++k) {
        const Matrix& f0 = state.frames[k].frame;
        const Matrix& f1 = next.frames[k].frame;
        const Matrix rate = f0.transpose() * (f1 - f0) / dt;
        worst = std::max(worst, (rate - q).cwiseAbs().maxCoeff());
        if (k < n) {
            const Vector dxi = state.xi.increment(k);
            const Vector h_mid = 0.5 * (h.at(k) + h.at(k + 1));
            q += curvature_form(m, parallel_frame_step(m, state.frames[k], 0.5 * dxi), h_mid, dxi);
        }
    }
    return worst;
}

}  // namespace loopspace
