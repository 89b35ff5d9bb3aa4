#include "experiment_util.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>

namespace loopspace {

using detail::kPi;

ExperimentReport driver_flow_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const BridgeSampler bs = detail::make_sampler(cfg);
    const ManifoldModel& m = bs.config().model;
    const TimeGrid& g = bs.config().grid;
    const FramePoint& r0 = bs.config().r0;
    const CameronMartinVector h = detail::require_h0(cfg, g, "driver-flow");
    const double t = cfg.flow.t_final;
    const std::size_t n = cfg.samples_or(1000);
    const int N = g.steps();

    struct Probe {
        double endpoint, excess, flat_err;
    };
    const auto probes = parallel_collect<Probe>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        const FlowState st = flow_integrate(m, ls.x, r0, h, t, cfg.flow);
        Probe p{dist(m, st.path.at(N), bs.config().m0), -std::numeric_limits<double>::infinity(), 0.0};
        for (int k = 0; k <= N; ++k)
            p.excess = std::max(p.excess, dist(m, st.path.at(k), ls.path.at(k)) - std::abs(t) * h.at(k).norm());
        if (m.is_flat()) p.flat_err = (st.xi.values - (ls.x.values + t * h.h)).cwiseAbs().maxCoeff();
        return p;
    });
    double endpoint = 0.0, excess = -std::numeric_limits<double>::infinity(), flat_err = 0.0;
    for (const auto& p : probes) {
        endpoint = std::max(endpoint, p.endpoint);
        excess = std::max(excess, p.excess);
        flat_err = std::max(flat_err, p.flat_err);
    }
    rep.row("endpoint_max", endpoint, endpoint, endpoint, n);
    rep.row("distance_excess_max", excess, excess, excess, n);
    if (m.is_flat()) {
        rep.row("flat_error_max", flat_err, flat_err, flat_err, n);
        rep.check_max(cfg, "flat_exactness", flat_err, 1e-12);
    } else {
        // group property: the second leg runs backwards with a step size that
        // does not divide the first, so the two routes take different steps
        constexpr double kS = 0.2, kT = -0.0707;
        constexpr int kPaths = 4;
        const std::vector<double> dts{4e-3, 2e-3, 1e-3};
        std::vector<double> defects(dts.size(), 0.0);
        for (int i = 0; i < kPaths; ++i) {
            RngStream rng = RngStream::substream(cfg.seed ^ 0x7f4a7c15ULL, i);
            const LoopSample ls = bs.sample(rng);
            for (std::size_t j = 0; j < dts.size(); ++j) {
                FlowConfig fc = cfg.flow;
                fc.dt = dts[j];
                defects[j] += flow_property_check(m, ls.x, r0, h, kS, kT, fc) / kPaths;
            }
        }
        for (std::size_t j = 0; j < dts.size(); ++j) {
            rep.row("group_defect_dt" + detail::fmt(dts[j]), defects[j], defects[j], defects[j], kPaths);
            rep.plots["group_defect"].emplace_back(dts[j], defects[j]);
        }
        const RateFit fit = fit_rate(dts, defects);
        rep.row("group_slope", fit.slope, fit.slope, fit.slope, kPaths, "r2=" + detail::fmt(fit.r2));
        rep.check_min(cfg, "group_slope", fit.slope, 1.8);

        RngStream rng = RngStream::substream(cfg.seed ^ 0x7f4a7c15ULL, kPaths);
        const LoopSample ls = bs.sample(rng);
        const FlowState st = make_flow_state(m, ls.x, r0);
        for (double dt : {0.02, 0.01}) {
            const double b = bismut_defect(m, st, h, dt, cfg.flow.picard_iters);
            rep.row("bismut_defect_dt" + detail::fmt(dt), b, b, b, 1);
        }
    }
    rep.check_max(cfg, "endpoint_max", endpoint, 1e-3);
    rep.check_max(cfg, "distance_excess", excess, 1e-4);
    return rep;
}

ExperimentReport quasi_invariance_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const BridgeSampler bs = detail::make_sampler(cfg);
    const ManifoldModel& m = bs.config().model;
    const TimeGrid& g = bs.config().grid;
    const FramePoint& r0 = bs.config().r0;
    const CameronMartinVector h = detail::require_h0(cfg, g, "quasi-invariance");
    const double t = cfg.flow.t_final;
    const double hn2 = cm_norm(h) * cm_norm(h);
    const std::size_t n = cfg.samples_or(m.is_flat() ? 100000 : 10000);
    const CylindricalFunctional f =
        m.is_flat() ? cyl_torus_wave(m, g, 0.5, 0, 1, 0.7) : cyl_sphere_coordinate(g, 0.5, 2);
    rep.notes.push_back(std::string("f = ") + (m.is_flat() ? "cos(2 pi y0(1/2) / L0 + 0.7)" : "z(1/2)"));

    struct Probe {
        double a, b, k, div, rel;
    };
    const auto probes = parallel_collect<Probe>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        const FlowState start = make_flow_state(m, ls.x, r0);
        const double K = radon_nikodym_from(m, start, h, t, cfg.flow);
        const FlowState moved = flow_integrate(m, ls.x, r0, h, t, cfg.flow);
        const double div = divergence(m, h, ls.x, ls.frames);
        // B on the re-developed loop so that both sides share one discretisation
        Probe p{evaluate(f, moved.path), evaluate(f, start.path) * K, K, div, 0.0};
        if (m.is_flat()) {
            const double closed = std::exp(t * div - 0.5 * t * t * hn2);
            p.rel = std::abs(K - closed) / closed;
        }
        return p;
    });

    std::vector<double> a(n), b(n), diff(n), k(n), excess(n);
    double rel = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = probes[i].a;
        b[i] = probes[i].b;
        diff[i] = a[i] - b[i];
        k[i] = probes[i].k;
        excess[i] = k[i] * k[i] - std::exp(4.0 * std::abs(t) * std::abs(probes[i].div));
        rel = std::max(rel, probes[i].rel);
    }
    const MCStat sa = summarize(a), sb = summarize(b), sd = summarize(diff), sk = summarize(k), se = summarize(excess);
    rep.row("A_f_of_flow", sa);
    rep.row("B_f_times_K", sb);
    rep.row("A_minus_B", sd);
    rep.row("mean_K", sk);
    rep.row("K_sq_minus_exp_4t_abs_div", se);
    if (m.is_flat()) {
        rep.row("closed_form_rel_max", rel, rel, rel, n);
        rep.check_max(cfg, "closed_form_rel", rel, 1e-6);
    }
    rep.check_max(cfg, "paired_z", detail::z_score(sd, 0.0), 3.0);
    rep.check_max(cfg, "mean_k_z", detail::z_score(sk, 1.0), 3.0);
    // one-sided: E[K^2] may sit anywhere below E[exp(4t|div|)]
    const double z_excess = se.se() > 0.0 ? se.mean / se.se() : (se.mean > 0.0 ? INFINITY : 0.0);
    rep.check_max(cfg, "k_l2_excess_z", z_excess, 3.0);

    std::vector<double> sorted = k;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 200))
        rep.plots["K_quantiles"].emplace_back(static_cast<double>(i) / n, sorted[i]);
    return rep;
}

ExperimentReport gradient_check_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const BridgeSampler bs = detail::make_sampler(cfg);
    const ManifoldModel& m = bs.config().model;
    const TimeGrid& g = bs.config().grid;
    const FramePoint& r0 = bs.config().r0;
    const CameronMartinVector h = cfg.h_vector(g);
    const HFamily kf = detail::family({{0, 1, 0.6}, {detail::other_axis(m), 2, 0.8}, {0, 3, -0.5}});
    const CameronMartinVector k = CameronMartinVector::from_family(g, m.dim(), kf);
    const auto n = static_cast<std::size_t>(cfg.gradient_paths);
    constexpr double kEps = 1e-4;

    struct Probe {
        double analytic, fd;
    };
    const auto probes = parallel_collect<Probe>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        EuclideanPath xp = ls.x, xm = ls.x;
        xp.values += kEps * k.h;
        xm.values -= kEps * k.h;
        const double dp = divergence(m, h, xp, develop(m, xp, r0).frames);
        const double dm = divergence(m, h, xm, develop(m, xm, r0).frames);
        return Probe{malliavin_deriv_div(m, h, k, ls.x, ls.frames), (dp - dm) / (2 * kEps)};
    });
    double worst = 0.0;
    for (const auto& p : probes) {
        const double scale = std::max({std::abs(p.analytic), std::abs(p.fd), 1e-300});
        worst = std::max(worst, std::abs(p.analytic - p.fd) / scale);
        rep.plots["analytic_vs_fd"].emplace_back(p.fd, p.analytic);
    }
    rep.row("relative_error_max", worst, worst, worst, n);
    rep.check_max(cfg, "relative_error", worst, 1e-3);

    if (m.is_flat()) {
        const double exact = detail::family_inner(cfg.h, kf);
        double err = 0.0;
        for (const auto& p : probes) err = std::max(err, std::abs(p.analytic - exact));
        rep.row("inner_product_exact", exact, exact, exact, 0);
        rep.row("inner_product_grid", cm_inner(h, k), 0, 0, 0);
        rep.check_max(cfg, "flat_inner_error", err, 1e-8);
    }
    return rep;
}

namespace {

// Point at polar angle theta and azimuth phi around the pole x.
Vector around(const Vector& x, double theta, double phi)
{
    Vector e1 = Vector::Zero(3);
    e1(std::abs(x(0)) < 0.9 ? 0 : 1) = 1.0;
    e1 -= e1.dot(x) * x;
    e1.normalize();
    const Vector e2 = Eigen::Vector3d(x).cross(Eigen::Vector3d(e1));
    return std::cos(theta) * x + std::sin(theta) * (std::cos(phi) * e1 + std::sin(phi) * e2);
}

double chapman_kolmogorov_defect(const ManifoldModel& m, const HeatKernelOptions& opts)
{
    const HeatKernelEvaluator hk(m, opts);
    const std::vector<std::pair<double, double>> times{{0.1, 0.25}, {0.25, 0.5}, {0.5, 0.1}};
    double worst = 0.0;
    if (m.is_sphere()) {
        const Vector x = default_base_point(m);
        const Vector y = around(x, 1.1, 0.3);
        constexpr int kPhi = 256;
        for (const auto& [s, t] : times) {
            auto ring = [&](double c) {
                const double theta = std::acos(std::clamp(c, -1.0, 1.0));
                double acc = 0.0;
                for (int j = 0; j < kPhi; ++j) acc += hk.heat_kernel(t, around(x, theta, 2 * kPi * j / kPhi), y);
                return hk.sphere_zonal(s, c).value * acc * (2 * kPi / kPhi);
            };
            const double integral =
                boost::math::quadrature::gauss_kronrod<double, 31>::integrate(ring, -1.0, 1.0, 12, 1e-13);
            worst = std::max(worst, std::abs(integral - hk.heat_kernel(s + t, x, y)));
        }
        return worst;
    }
    // periodic trapezoid over the torus, spectrally accurate for smooth kernels
    const int d = m.dim();
    const int per_axis = d == 1 ? 2048 : (d == 2 ? 192 : 48);
    Vector x(d), y(d);
    for (int a = 0; a < d; ++a) {
        x(a) = 0.13 * m.lengths()(a);
        y(a) = 0.61 * m.lengths()(a);
    }
    double cell = 1.0;
    for (int a = 0; a < d; ++a) cell *= m.lengths()(a) / per_axis;
    long total = 1;
    for (int a = 0; a < d; ++a) total *= per_axis;
    for (const auto& [s, t] : times) {
        double acc = 0.0;
        Vector z(d);
        for (long i = 0; i < total; ++i) {
            long r = i;
            for (int a = 0; a < d; ++a) {
                z(a) = (r % per_axis) * m.lengths()(a) / per_axis;
                r /= per_axis;
            }
            acc += hk.heat_kernel(s, x, z) * hk.heat_kernel(t, z, y);
        }
        worst = std::max(worst, std::abs(acc * cell - hk.heat_kernel(s + t, x, y)));
    }
    return worst;
}

EuclideanPath wiener(RngStream& rng, const TimeGrid& g, int d)
{
    EuclideanPath x = EuclideanPath::zero(g, d);
    const double sdt = std::sqrt(g.dt());
    for (int k = 0; k < g.steps(); ++k)
        for (int a = 0; a < d; ++a) x.values(a, k + 1) = x.values(a, k) + sdt * rng.normal();
    return x;
}

Eigen::MatrixXd every(const Eigen::MatrixXd& m, int stride)
{
    Eigen::MatrixXd out(m.rows(), (m.cols() - 1) / stride + 1);
    for (Eigen::Index j = 0; j < out.cols(); ++j) out.col(j) = m.col(j * stride);
    return out;
}

}  // namespace

ExperimentReport structural_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const ManifoldModel m = cfg.model();
    const int d = m.dim();
    const FramePoint r0 = default_frame(m, default_base_point(m));
    RngStream rng(cfg.seed);

    // frames over 16384 steps
    {
        const TimeGrid g(16384);
        const Development dev = develop(m, wiener(rng, g, d), r0);
        double worst = 0.0;
        for (const FramePoint& r : dev.frames.frames) worst = std::max(worst, frame_defect(m, r));
        rep.row("frame_drift", worst, worst, worst, g.steps());
        rep.check_max(cfg, "frame_drift", worst, 1e-8);
    }

    // rotation kernel along Brownian states
    {
        const TimeGrid g(512);
        const CameronMartinVector h = CameronMartinVector::from_family(
            g, d, detail::family({{0, 1, 1.0}, {detail::other_axis(m), 2, -0.7}}));
        double worst = 0.0;
        for (int i = 0; i < 8; ++i) {
            const FlowState st = make_flow_state(m, wiener(rng, g, d), r0);
            for (int k = 0; k <= g.steps(); k += 16) {
                const Matrix q = q_kernel(m, st, h, k);
                const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
                worst = std::max(worst, (q + q.transpose()).cwiseAbs().maxCoeff() / scale);
            }
        }
        rep.row("q_skew", worst, worst, worst, 8);
        rep.check_max(cfg, "q_skew", worst, 1e-14);
    }

    const double ck = chapman_kolmogorov_defect(m, cfg.heatkernel);
    rep.row("chapman_kolmogorov", ck, ck, ck, 3);
    rep.check_max(cfg, "chapman_kolmogorov", ck, 1e-8);

    // observe a fine development on coarse grids and anti-develop there
    {
        constexpr int kFine = 8192, kPaths = 24;
        const TimeGrid fine(kFine);
        const std::vector<int> levels{128, 256, 512, 1024};
        std::vector<double> err(levels.size(), 0.0);
        for (int i = 0; i < kPaths; ++i) {
            const EuclideanPath x = wiener(rng, fine, d);
            const Development dev = develop(m, x, r0);
            for (std::size_t j = 0; j < levels.size(); ++j) {
                const int stride = kFine / levels[j];
                const ManifoldPath coarse{TimeGrid(levels[j]), every(dev.path.points, stride)};
                const EuclideanPath xc = antidevelop(m, coarse, r0);
                err[j] += (xc.values - every(x.values, stride)).cwiseAbs().maxCoeff() / kPaths;
            }
        }
        for (std::size_t j = 0; j < levels.size(); ++j) {
            rep.row("roundtrip_error_N" + std::to_string(levels[j]), err[j], err[j], err[j], kPaths);
            rep.plots["roundtrip_error"].emplace_back(levels[j], err[j]);
        }
        if (m.is_flat()) {
            // translations commute with sampling: the coarse anti-development is exact
            const double worst = *std::max_element(err.begin(), err.end());
            rep.check_max(cfg, "roundtrip_error", worst, 1e-12);
        } else {
            const std::vector<double> ns(levels.begin(), levels.end());
            const RateFit fit = fit_rate(ns, err);
            rep.row("roundtrip_order", -fit.slope, -fit.slope, -fit.slope, kPaths, "r2=" + detail::fmt(fit.r2));
            rep.check_min(cfg, "roundtrip_order", -fit.slope, 0.4);
        }
    }
    return rep;
}

}  // namespace loopspace
