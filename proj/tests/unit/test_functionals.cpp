#include <doctest.h>

#include "helpers.hpp"
#include "loopspace/bridge.hpp"
#include "loopspace/flow.hpp"
#include "loopspace/functionals.hpp"

#include <cmath>
#include <vector>

using namespace loopspace;
using namespace testing_helpers;

namespace {

CameronMartinVector cos_h(const TimeGrid& g, int d = 1, int mode = 1, int component = 0)
{
    return CameronMartinVector::from_family(g, d, HFamily::fourier(mode, component));
}

EuclideanPath line(const TimeGrid& g, int d)
{
    EuclideanPath x = EuclideanPath::zero(g, d);
    for (int k = 0; k <= g.steps(); ++k) x.values(0, k) = g.time(k);
    return x;
}

double delta_hat(const ManifoldModel& m, const CameronMartinVector& h, const EuclideanPath& x, const FramePoint& r0)
{
    return divergence(m, h, x, develop(m, x, r0).frames);
}

}  // namespace

TEST_CASE("Cameron-Martin vectors")
{
    const TimeGrid g(1024);
    const CameronMartinVector h = cos_h(g);
    CHECK(std::abs(cm_norm(h) - 1.0) < 1e-10);
    CHECK(h.in_H0);
    CHECK(std::abs(h.h(0, g.steps())) < 1e-12);
    CHECK(h.h(0, 0) == 0.0);
    CHECK(cm_norm(CameronMartinVector::zero(g, 2)) == 0.0);
    CHECK(cm_norm(scaled(-3.0, h)) == doctest::Approx(3.0 * cm_norm(h)).epsilon(1e-14));

    // h is the cumulative integral of the midpoint rates
    double acc = 0.0;
    for (int k = 0; k < g.steps(); ++k) acc += h.hdot(0, k) * g.dt();
    CHECK(std::abs(acc - h.h(0, g.steps())) < 1e-15);

    // grid h agrees with the closed form sqrt(2) sin(pi s) / pi
    for (int k = 0; k <= g.steps(); k += 64)
        CHECK(std::abs(h.h(0, k) - std::sqrt(2.0) * std::sin(kPi * g.time(k)) / kPi) < 1e-6);

    // Fourier modes are orthonormal in H
    const CameronMartinVector h2 = cos_h(g, 1, 2);
    CHECK(std::abs(cm_inner(h, h2)) < 1e-10);

    HFamily poly;
    poly.kind = HFamily::Kind::Polynomial;
    poly.terms = {{0, 1, 1.0}};
    const CameronMartinVector p = CameronMartinVector::from_family(g, 1, poly);
    CHECK_FALSE(p.in_H0);
    CHECK(std::abs(p.h(0, g.steps()) - 0.5) < 1e-6);
    CHECK(std::abs(poly.energy_after(0.5, 1) - (1.0 - 0.125) / 3.0) < 1e-14);
    CHECK(std::abs(HFamily::fourier(1).energy_after(0.0, 1) - 1.0) < 1e-14);
}

TEST_CASE("divergence on fixed paths")
{
    const TimeGrid g(1024);
    const auto t = ManifoldModel::flat_torus({2 * kPi});
    const FramePoint r0 = default_frame(t, default_base_point(t));
    const CameronMartinVector h = cos_h(g);
    const EuclideanPath x = line(g, 1);
    const FramePath frames = develop(t, x, r0).frames;

    CHECK(divergence(t, CameronMartinVector::zero(g, 1), x, frames) == 0.0);
    for (double s : {0.25, 0.5, 0.75, 1.0}) {
        const double want = std::sqrt(2.0) * std::sin(kPi * s) / kPi;
        CHECK(std::abs(divergence_trunc(t, h, x, frames, s) - want) < 1e-6);
    }
    CHECK(divergence_trunc(t, h, x, frames, 1.0) == divergence(t, h, x, frames));
    CHECK_THROWS_AS(divergence(t, cos_h(TimeGrid(512)), x, frames), ContractViolation);
    CHECK_THROWS_AS(divergence_trunc(t, h, x, frames, 0.3), ContractViolation);

    // left-point sums on the sphere: Ric = I there, so the integrand is hdot + h/2
    const auto s = ManifoldModel::unit_sphere2();
    std::mt19937_64 gen(1);
    const EuclideanPath w = wiener_path(gen, g, 2);
    const FramePath sf = develop(s, w, default_frame(s, default_base_point(s))).frames;
    const CameronMartinVector h2 = cos_h(g, 2, 3, 1);
    double want = 0.0;
    for (int k = 0; k < g.steps(); ++k) want += (h2.rate(k) + 0.5 * h2.at(k)).dot(w.increment(k));
    CHECK(std::abs(divergence(s, h2, w, sf) - want) < 1e-12);
}

TEST_CASE("divergence is linear in h")
{
    const TimeGrid g(512);
    const auto s = ManifoldModel::unit_sphere2();
    std::mt19937_64 gen(2);
    const EuclideanPath w = wiener_path(gen, g, 2);
    const FramePath fr = develop(s, w, default_frame(s, default_base_point(s))).frames;
    const CameronMartinVector h1 = cos_h(g, 2, 1, 0), h2 = cos_h(g, 2, 4, 1);
    for (double a : {0.3, -2.0}) {
        for (double b : {1.7, 0.0}) {
            const double lhs = divergence(s, combine(a, h1, b, h2), w, fr);
            const double rhs = a * divergence(s, h1, w, fr) + b * divergence(s, h2, w, fr);
            CHECK(std::abs(lhs - rhs) < 1e-13 * (1 + std::abs(rhs)));
            const std::vector<double> pl = divergence_profile(s, combine(a, h1, b, h2), w, fr);
            const std::vector<double> p1 = divergence_profile(s, h1, w, fr), p2 = divergence_profile(s, h2, w, fr);
            for (int k = 0; k <= g.steps(); k += 64) CHECK(std::abs(pl[k] - (a * p1[k] + b * p2[k])) < 1e-13);
        }
    }
}

TEST_CASE("flat divergence under the bridge law is standard normal")
{
    const auto c = ManifoldModel::flat_torus({2 * kPi});
    const BridgeSampler bs(BridgeConfig::make(c, 512, 0.01, 21));
    const CameronMartinVector h = cos_h(bs.config().grid);
    const std::vector<double> div = parallel_collect<double>(100000, 21, 1, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        return divergence(c, h, ls.x, ls.frames);
    });
    const MCStat st = summarize(div);
    MESSAGE("mean " << st.mean << " var " << st.variance);
    CHECK(std::abs(st.mean) < 3 * st.se());
    CHECK(std::abs(st.variance - 1.0) < 3 * std::sqrt(2.0 / st.n));
    const TestResult ad = anderson_darling_normal(div);
    MESSAGE("AD p " << ad.p_value);
    CHECK(ad.p_value > 0.01);
}

TEST_CASE("time-change quadratic variation bound holds per sample")
{
    const auto s = ManifoldModel::unit_sphere2();
    const BridgeSampler bs(BridgeConfig::make(s, 512, 0.01, 22));
    HFamily fam;
    fam.terms = {{0, 1, 0.6}, {1, 2, 0.8}};
    const CameronMartinVector h = CameronMartinVector::from_family(bs.config().grid, 2, fam);
    const double bound = time_change_bound(s, h);
    CHECK(bound == doctest::Approx(2.25 * cm_norm(h) * cm_norm(h)).epsilon(1e-12));
    for (int i = 0; i < 200; ++i) {
        RngStream rng = RngStream::substream(22, i);
        const LoopSample ls = bs.sample(rng);
        CHECK(time_change_qv(s, h, ls.frames) <= bound + 1e-8);
    }
    const auto t = ManifoldModel::flat_torus({1.0, 1.0});
    CHECK(time_change_bound(t, h) == doctest::Approx(cm_norm(h) * cm_norm(h)).epsilon(1e-14));
}

TEST_CASE("cylindrical functionals")
{
    const TimeGrid g(512);
    SUBCASE("built-in gradients match finite differences")
    {
        const auto s = ManifoldModel::unit_sphere2();
        const auto t = ManifoldModel::flat_torus({2 * kPi, 3.0});
        std::mt19937_64 gen(3);
        const std::vector<CylindricalFunctional> sphere_fs{
            cyl_sphere_coordinate(g, 0.5, 2), cyl_sphere_quadratic(g, 0.25, 0, 1), cyl_sphere_quadratic(g, 0.25, 2, 2),
            cyl_product(cyl_sphere_coordinate(g, 0.33, 2), cyl_sphere_coordinate(g, 0.67, 0))};
        for (const auto& F : sphere_fs) {
            std::vector<Vector> args;
            for (std::size_t i = 0; i < F.times.size(); ++i) args.push_back(random_unit(gen));
            const std::vector<Vector> gr = F.grad(args);
            REQUIRE(gr.size() == args.size());
            for (std::size_t i = 0; i < args.size(); ++i) {
                CHECK(is_tangent(s, args[i], gr[i]));
                const FramePoint fr = default_frame(s, args[i]);
                for (int j = 0; j < 2; ++j) {
                    const double e = 1e-6;
                    std::vector<Vector> ap = args, am = args;
                    ap[i] = exp_map(s, args[i], e * fr.frame.col(j));
                    am[i] = exp_map(s, args[i], -e * fr.frame.col(j));
                    const double fd = (F.f(ap) - F.f(am)) / (2 * e);
                    CHECK(std::abs(fd - gr[i].dot(fr.frame.col(j))) < 1e-6);
                }
            }
        }
        const CylindricalFunctional wave = cyl_torus_wave(t, g, 0.5, 1, 2, 0.3);
        const std::vector<Vector> args{vec({1.0, 2.2})};
        const double e = 1e-6;
        const double fd = (wave.f({vec({1.0, 2.2 + e})}) - wave.f({vec({1.0, 2.2 - e})})) / (2 * e);
        CHECK(std::abs(fd - wave.grad(args)[0](1)) < 1e-6);
        CHECK(wave.grad(args)[0](0) == 0.0);
    }
    SUBCASE("constant functional has no derivative")
    {
        const auto s = ManifoldModel::unit_sphere2();
        std::mt19937_64 gen(4);
        const Development dev = develop(s, wiener_path(gen, g, 2), default_frame(s, default_base_point(s)));
        const CameronMartinVector h = cos_h(g, 2);
        CHECK(evaluate(cyl_constant(2.5), dev.path) == 2.5);
        CHECK(dh_cylindrical(s, cyl_constant(2.5), h, dev.path, dev.frames) == 0.0);
    }
    SUBCASE("torus closed form")
    {
        const auto c = ManifoldModel::flat_torus({2 * kPi});
        const BridgeSampler bs(BridgeConfig::make(c, 512, 0.01, 5));
        const CameronMartinVector h = cos_h(g);
        const CylindricalFunctional F = cyl_torus_wave(c, g, 0.5, 0, 1, 0.0);
        for (int i = 0; i < 50; ++i) {
            RngStream rng = RngStream::substream(5, i);
            const LoopSample ls = bs.sample(rng);
            const double y = ls.path.at(256)(0);
            CHECK(evaluate(F, ls.path) == std::cos(y));
            CHECK(std::abs(dh_cylindrical(c, F, h, ls.path, ls.frames) - (-std::sin(y) * h.h(0, 256))) < 1e-15);
        }
    }
    SUBCASE("directional derivative is the derivative along the flow")
    {
        const double e = 1e-4;
        FlowConfig cfg;
        cfg.dt = e;
        for (const auto& m : {ManifoldModel::unit_sphere2(), ManifoldModel::flat_torus({2 * kPi, 2 * kPi})}) {
            const BridgeSampler bs(BridgeConfig::make(m, 512, 0.01, 6));
            HFamily fam;
            fam.terms = {{0, 1, 0.7}, {1, 3, 0.4}};
            const CameronMartinVector h = CameronMartinVector::from_family(g, 2, fam);
            const CylindricalFunctional F =
                m.is_sphere() ? cyl_product(cyl_sphere_coordinate(g, 0.33, 2), cyl_sphere_quadratic(g, 0.67, 0, 2))
                              : cyl_product(cyl_torus_wave(m, g, 0.33, 0, 1, 0.2), cyl_torus_wave(m, g, 0.67, 1, 2, 0.0));
            for (int i = 0; i < 20; ++i) {
                RngStream rng = RngStream::substream(6, i);
                const LoopSample ls = bs.sample(rng);
                const double dh = dh_cylindrical(m, F, h, ls.path, ls.frames);
                const double fp = evaluate(F, flow_on_loops(m, ls.path, bs.config().r0, h, e, cfg));
                const double fm = evaluate(F, flow_on_loops(m, ls.path, bs.config().r0, h, -e, cfg));
                const double fd = (fp - fm) / (2 * e);
                CHECK(std::abs(fd - dh) <= 1e-5 * std::max(1.0, std::abs(dh)));
            }
        }
    }
}

TEST_CASE("Malliavin derivative of the divergence")
{
    const TimeGrid g(512);
    HFamily fh, fk;
    fh.terms = {{0, 1, 1.0}, {1, 2, 0.5}};
    fk.terms = {{0, 3, 0.8}, {1, 1, -0.6}};
    const CameronMartinVector h = CameronMartinVector::from_family(g, 2, fh);
    const CameronMartinVector k = CameronMartinVector::from_family(g, 2, fk);

    const auto t = ManifoldModel::flat_torus({2 * kPi, 2 * kPi});
    std::mt19937_64 gen(7);
    const EuclideanPath xt = wiener_path(gen, g, 2);
    const FramePath ft = develop(t, xt, default_frame(t, default_base_point(t))).frames;
    CHECK(std::abs(malliavin_deriv_div(t, h, k, xt, ft) - cm_inner(h, k)) < 1e-14);
    CHECK(malliavin_deriv_div(t, h, CameronMartinVector::zero(g, 2), xt, ft) == 0.0);

    const auto s = ManifoldModel::unit_sphere2();
    const FramePoint r0 = default_frame(s, default_base_point(s));
    CHECK(malliavin_deriv_div(s, h, CameronMartinVector::zero(g, 2), xt, develop(s, xt, r0).frames) == 0.0);
    const double e = 1e-4;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const EuclideanPath x = wiener_path(gen, g, 2);
        const FramePath fr = develop(s, x, r0).frames;
        const double an = malliavin_deriv_div(s, h, k, x, fr);
        EuclideanPath xp = x, xm = x;
        xp.values += e * k.h;
        xm.values -= e * k.h;
        const double fd = (delta_hat(s, h, xp, r0) - delta_hat(s, h, xm, r0)) / (2 * e);
        worst = std::max(worst, std::abs(an - fd) / std::max(std::abs(fd), 1e-3));
    }
    MESSAGE("worst relative error " << worst);
    CHECK(worst < 1e-3);
}

TEST_CASE("Holder norm")
{
    HolderParams quarter{2, 0.25};
    const TimeGrid g(1024);
    CHECK(holder_norm(EuclideanPath::zero(g, 2), quarter) == 0.0);
    const double want = std::pow(1.0 / 6.0, 0.25);
    CHECK(std::abs(holder_norm(line(g, 1), quarter) - want) < 1e-3);
    CHECK(std::abs(want - 0.63894) < 1e-5);

    std::mt19937_64 gen(8);
    const EuclideanPath x = wiener_path(gen, TimeGrid(256), 2);
    EuclideanPath cx = x;
    cx.values *= -2.5;
    const HolderParams p{};
    CHECK(holder_norm(cx, p) == doctest::Approx(2.5 * holder_norm(x, p)).epsilon(1e-13));

    // refinement on a smooth path: successive differences shrink
    double prev_value = 0.0, prev_gap = 1e300;
    for (int n : {64, 128, 256, 512, 1024}) {
        const TimeGrid gn(n);
        EuclideanPath sm = EuclideanPath::zero(gn, 1);
        for (int k = 0; k <= n; ++k) sm.values(0, k) = std::sin(2 * kPi * gn.time(k)) + gn.time(k) * gn.time(k);
        const double v = holder_norm(sm, p);
        if (n > 64) {
            const double gap = std::abs(v - prev_value);
            CHECK(gap < prev_gap);
            prev_gap = gap;
        }
        prev_value = v;
    }

    // subsampling keeps the grid values
    const EuclideanPath sub = subsample(x, 64);
    CHECK(sub.grid.steps() == 64);
    CHECK(sub.values.col(64) == x.values.col(256));
    CHECK_THROWS_AS(subsample(x, 512), ContractViolation);
}

TEST_CASE("Holder parameters")
{
    CHECK_NOTHROW(HolderParams{}.validate());
    CHECK_NOTHROW((HolderParams{3, 0.2}.validate()));
    CHECK_THROWS_AS((HolderParams{1, 0.3}.validate()), ContractViolation);
    CHECK_THROWS_AS((HolderParams{2, 0.25}.validate()), ContractViolation);
    CHECK_THROWS_AS((HolderParams{2, 0.5}.validate()), ContractViolation);
    CHECK_THROWS_AS(holder_norm(EuclideanPath::zero(TimeGrid(8), 1), HolderParams{0, 0.3}), ContractViolation);
}

TEST_CASE("Holder rate constant")
{
    const HolderParams p{};
    const TimeGrid g256(256), g512(512);
    const HolderRateResult a = holder_rate_constant(p, g256, 1, 16, 1);
    const HolderRateResult b = holder_rate_constant(p, g256, 1, 16, 99);
    CHECK(a.converged);
    CHECK(a.start_values.size() == 16);
    CHECK(std::abs(a.value - b.value) < 1e-6);
    for (double v : a.start_values) CHECK(v >= a.value - 1e-12);

    const HolderRateResult twice = holder_rate_constant(p, g256, 1, 16, 1, 5000, 1e-12, 2.0);
    CHECK(twice.value == doctest::Approx(4.0 * a.value).epsilon(1e-12));

    const HolderRateResult fine = holder_rate_constant(p, g512, 1, 4, 1);
    CHECK(a.value >= fine.value - 1e-3);

    CHECK(a.value > 0.0);
    CHECK_THROWS_AS(holder_rate_constant(HolderParams{2, 0.2}, g256), ContractViolation);
}
