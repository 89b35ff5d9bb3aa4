#include <doctest.h>

#include "helpers.hpp"
#include "loopspace/bridge.hpp"
#include "loopspace/flow.hpp"

#include <cmath>
#include <vector>

using namespace loopspace;
using namespace testing_helpers;

namespace {

// h with two Fourier components, in H0
CameronMartinVector two_mode_h(const TimeGrid& g)
{
    HFamily fam;
    fam.terms = {{0, 1, 0.8}, {1, 2, -0.5}};
    return CameronMartinVector::from_family(g, 2, fam);
}

EuclideanPath brownian(std::uint64_t seed, const TimeGrid& g, int d = 2)
{
    std::mt19937_64 gen(seed);
    return wiener_path(gen, g, d);
}

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("config validation")
{
    FlowConfig c;
    CHECK_NOTHROW(c.validate());
    c.t_final = 0.2505;
    CHECK_THROWS_AS(c.validate(), ContractViolation);
    c = FlowConfig{};
    c.dt = 0.0;
    CHECK_THROWS_AS(c.validate(), ContractViolation);
    c = FlowConfig{};
    c.picard_iters = -1;
    CHECK_THROWS_AS(c.validate(), ContractViolation);
}

TEST_CASE("q kernel")
{
    const auto s = ManifoldModel::unit_sphere2();
    const auto t = ManifoldModel::flat_torus({2 * kPi, 2 * kPi});
    const TimeGrid g(512);
    const CameronMartinVector h = two_mode_h(g);
    const EuclideanPath x = brownian(1, g);

    const FlowState st = make_flow_state(s, x, default_frame(s, default_base_point(s)));
    const FlowState ft = make_flow_state(t, x, default_frame(t, default_base_point(t)));
    for (int k = 0; k <= g.steps(); k += 32) {
        const Matrix q = q_kernel(s, st, h, k);
        CHECK(max_abs(q + q.transpose()) == 0.0);
        CHECK(q_kernel(t, ft, h, k).isZero(0.0));
        CHECK(q_kernel(s, st, CameronMartinVector::zero(g, 2), k).isZero(0.0));
    }
    CHECK(q_kernel(s, st, h, g.steps()).norm() > 0.0);
}

TEST_CASE("flow velocity moves the developed nodes by frame h")
{
    // d/de develop(xi + e v)(s_k) = frame_k h_k, checked by central differences
    const auto s = ManifoldModel::unit_sphere2();
    const FramePoint r0 = default_frame(s, default_base_point(s));
    for (int n : {64, 256}) {
        const TimeGrid g(n);
        const CameronMartinVector h = two_mode_h(g);
        const FlowState st = make_flow_state(s, brownian(2, g), r0);
        const Eigen::MatrixXd v = flow_velocity(s, st, h);
        const double e = 1e-5;
        EuclideanPath xp = st.xi, xm = st.xi;
        xp.values += e * v;
        xm.values -= e * v;
        const Development dp = develop(s, xp, r0), dm = develop(s, xm, r0);
        double worst = 0.0;
        for (int k = 0; k <= n; ++k) {
            const Vector fd = (dp.path.at(k) - dm.path.at(k)) / (2 * e);
            const Vector want = st.frames[k].frame * h.at(k);
            worst = std::max(worst, (fd - want).norm());
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("continuum velocity converges to the exact one with the minus sign")
{
    const auto s = ManifoldModel::unit_sphere2();
    const FramePoint r0 = default_frame(s, default_base_point(s));
    std::vector<double> err_minus, err_plus;
    constexpr int kFine = 8192;
    const EuclideanPath fine = brownian(3, TimeGrid(kFine));
    for (int n : {256, 1024, 4096}) {
        const TimeGrid g(n);
        const EuclideanPath x{g, every(fine.values, kFine / n)};
        const CameronMartinVector h = two_mode_h(g);
        const FlowState st = make_flow_state(s, x, r0);
        const Eigen::MatrixXd exact = flow_velocity(s, st, h);
        err_minus.push_back(max_abs(flow_velocity_continuum(s, st, h, -1.0) - exact));
        err_plus.push_back(max_abs(flow_velocity_continuum(s, st, h, +1.0) - exact));
    }
    MESSAGE("q_sign -1 errors " << err_minus[0] << " " << err_minus[1] << " " << err_minus[2]);
    MESSAGE("q_sign +1 errors " << err_plus[0] << " " << err_plus[1] << " " << err_plus[2]);
    CHECK(err_minus[2] < err_minus[0] / 2);
    CHECK(err_minus[2] < 0.2 * err_plus[2]);
    CHECK(err_plus[2] > 0.5 * err_plus[0]);  // the wrong sign does not converge
}

TEST_CASE("flat torus flow is exact")
{
    const auto t = ManifoldModel::flat_torus({2 * kPi, 3.0});
    const FramePoint r0 = default_frame(t, default_base_point(t));
    const TimeGrid g(512);
    const CameronMartinVector h = two_mode_h(g);
    const EuclideanPath x = brownian(4, g);
    for (double dt : {1e-3, 1e-2, 0.05}) {
        FlowConfig cfg;
        cfg.dt = dt;
        for (double tt : {0.25, -0.4, 1.0}) {
            const FlowState out = flow_integrate(t, x, r0, h, tt, cfg);
            CHECK(max_abs(out.xi.values - (x.values + tt * h.h)) < 1e-14);
        }
    }
    // a single step of the general integrator is exact too
    const FlowState st = make_flow_state(t, x, r0);
    const FlowState one = flow_step(t, st, h, 0.1);
    CHECK(max_abs(one.xi.values - (x.values + 0.1 * h.h)) < 1e-14);
    CHECK(flow_property_check(t, x, r0, h, 0.1, 0.1, FlowConfig{}) < 1e-14);
    CHECK(flow_property_check(t, x, r0, h, 0.2, -0.1, FlowConfig{}) < 1e-14);

    // loops: wrap(gamma + t h)
    const BridgeSampler bs(BridgeConfig::make(t, 512, 0.01, 5));
    RngStream rng = RngStream::substream(5, 0);
    const LoopSample ls = bs.sample(rng);
    const ManifoldPath moved = flow_on_loops(t, ls.path, r0, h, 0.3, FlowConfig{});
    for (int k = 0; k <= g.steps(); ++k) {
        const Vector want = wrap_point(t, ls.path.at(k) + 0.3 * h.at(k));
        CHECK(dist(t, moved.at(k), want) < 1e-12);
    }
}

TEST_CASE("zero time and zero direction")
{
    const auto s = ManifoldModel::unit_sphere2();
    const FramePoint r0 = default_frame(s, default_base_point(s));
    const TimeGrid g(256);
    const EuclideanPath x = brownian(6, g);
    const CameronMartinVector h = two_mode_h(g);
    CHECK(flow_integrate(s, x, r0, h, 0.0, FlowConfig{}).xi.values == x.values);
    CHECK(max_abs(flow_integrate(s, x, r0, CameronMartinVector::zero(g, 2), 0.05, FlowConfig{}).xi.values - x.values) ==
          0.0);
    CHECK(flow_property_check(s, x, r0, h, 0.0, 0.05, FlowConfig{}) == 0.0);
    CHECK(flow_property_check(s, x, r0, h, 0.05, 0.0, FlowConfig{}) == 0.0);

    const Development dev = develop(s, x, r0);
    const ManifoldPath same = flow_on_loops(s, dev.path, r0, CameronMartinVector::zero(g, 2), 0.1, FlowConfig{});
    CHECK(max_abs(same.points - dev.path.points) < 1e-12);
}

TEST_CASE("sphere flow is reversible")
{
    const auto s = ManifoldModel::unit_sphere2();
    const FramePoint r0 = default_frame(s, default_base_point(s));
    const TimeGrid g(512);
    const CameronMartinVector h = two_mode_h(g);
    const EuclideanPath x = brownian(7, g);
    FlowConfig cfg;
    cfg.dt = 1e-3;
    const FlowState fwd = flow_integrate(s, x, r0, h, 0.2, cfg);
    CHECK(max_abs(fwd.xi.values - x.values) > 0.05);
    const FlowState back = flow_integrate(s, fwd.xi, r0, h, -0.2, cfg);
    const double err = max_abs(back.xi.values - x.values);
    MESSAGE("reversibility error " << err);
    CHECK(err < 1e-6);
}

TEST_CASE("sphere flow property")
{
    const auto s = ManifoldModel::unit_sphere2();
    const FramePoint r0 = default_frame(s, default_base_point(s));
    const TimeGrid g(256);
    const CameronMartinVector h = two_mode_h(g);
    const EuclideanPath x = brownian(8, g);

    FlowConfig cfg;
    cfg.dt = 1e-3;
    CHECK(flow_property_check(s, x, r0, h, 0.1, 0.1, cfg) < 1e-5);

    // With commensurate times both routes take identical steps, and a
    // backward leg is undone by the following forward steps up to the
    // integrator's asymmetry. t = -0.0707 forces unequal step sizes.
    std::vector<double> dts{4e-3, 2e-3, 1e-3}, defects;
    for (double dt : dts) {
        cfg.dt = dt;
        defects.push_back(flow_property_check(s, x, r0, h, 0.2, -0.0707, cfg));
    }
    const RateFit fit = fit_rate(dts, defects);
    MESSAGE("group defects " << defects[0] << " " << defects[1] << " " << defects[2] << " slope " << fit.slope);
    CHECK(fit.slope >= 1.8);
}

TEST_CASE("frames evolve by the rotation kernel")
{
    const auto s = ManifoldModel::unit_sphere2();
    const FramePoint r0 = default_frame(s, default_base_point(s));
    // the grid leaves an O(1/N) floor, so N is large and dt moderate
    const TimeGrid g(1024);
    const CameronMartinVector h = two_mode_h(g);
    const FlowState st = make_flow_state(s, brownian(9, g), r0);
    const double d1 = bismut_defect(s, st, h, 2e-2);
    const double d2 = bismut_defect(s, st, h, 1e-2);
    MESSAGE("Bismut defects " << d1 << " " << d2);
    CHECK(d2 < 0.6 * d1);
    CHECK(d2 < 0.01);
}

TEST_CASE("loops stay pinned and move at most t |h|")
{
    const auto s = ManifoldModel::unit_sphere2();
    const BridgeSampler bs(BridgeConfig::make(s, 512, 0.01, 10));
    const FramePoint& r0 = bs.config().r0;
    const TimeGrid g(512);
    const CameronMartinVector h = two_mode_h(g);
    FlowConfig cfg;
    cfg.dt = 1e-3;
    for (int i = 0; i < 10; ++i) {
        RngStream rng = RngStream::substream(10, i);
        const LoopSample ls = bs.sample(rng);
        for (double t : {0.25, -0.25}) {
            const ManifoldPath out = flow_on_loops(s, ls.path, r0, h, t, cfg);
            CHECK(dist(s, out.at(g.steps()), bs.config().m0) < 1e-3);
            double worst = -1.0;
            for (int k = 0; k <= g.steps(); ++k)
                worst = std::max(worst, dist(s, out.at(k), ls.path.at(k)) - std::abs(t) * h.at(k).norm());
            CHECK(worst <= 1e-4);
        }
    }
}

TEST_CASE("Radon-Nikodym density")
{
    const auto t = ManifoldModel::flat_torus({2 * kPi, 2 * kPi});
    const FramePoint r0 = default_frame(t, default_base_point(t));
    const TimeGrid g(512);
    const CameronMartinVector h = two_mode_h(g);
    const BridgeSampler bs(BridgeConfig::make(t, 512, 0.01, 11));
    FlowConfig cfg;
    cfg.dt = 1e-2;
    const double e2 = cm_norm(h) * cm_norm(h);
    for (int i = 0; i < 20; ++i) {
        RngStream rng = RngStream::substream(11, i);
        const LoopSample ls = bs.sample(rng);
        const double div = divergence(t, h, ls.x, ls.frames);
        for (double tt : {0.25, -0.5, 1.0}) {
            const double k = radon_nikodym(t, ls.path, r0, h, tt, cfg);
            const double want = std::exp(tt * div - 0.5 * tt * tt * e2);
            CHECK(std::abs(k / want - 1.0) < 1e-6);
        }
        CHECK(radon_nikodym(t, ls.path, r0, h, 0.0, cfg) == 1.0);
        CHECK(radon_nikodym(t, ls.path, r0, CameronMartinVector::zero(g, 2), 0.5, cfg) == 1.0);
    }

    const auto s = ManifoldModel::unit_sphere2();
    const BridgeSampler sb(BridgeConfig::make(s, 512, 0.01, 12));
    RngStream rng = RngStream::substream(12, 0);
    const LoopSample ls = sb.sample(rng);
    CHECK(radon_nikodym(s, ls.path, sb.config().r0, CameronMartinVector::zero(g, 2), 0.25, cfg) == 1.0);
    const double k = radon_nikodym(s, ls.path, sb.config().r0, h, 0.25, cfg);
    CHECK(k > 0.0);
    CHECK(std::isfinite(k));
}
