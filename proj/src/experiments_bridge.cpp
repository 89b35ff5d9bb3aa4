#include "experiment_util.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>

namespace loopspace {

using detail::kPi;

CircleMarginalCdf::CircleMarginalCdf(double length, double s, const HeatKernelOptions& opts, int points)
    : length_(length), grid_(points + 1), density_(points + 1), cdf_(points + 1)
{
    require(s > 0.0 && s < 1.0, "CircleMarginalCdf: s must lie in (0, 1)");
    require(points >= 16, "CircleMarginalCdf: too few points");
    const HeatKernelEvaluator hk(ManifoldModel::flat_torus({length}), opts);
    const Vector o = Vector::Zero(1);
    const double z = hk.heat_kernel(1.0, o, o);
    const double step = length / points;
    for (int i = 0; i <= points; ++i) {
        Vector y(1);
        y(0) = i * step;
        grid_[i] = y(0);
        density_[i] = hk.heat_kernel(s, o, y) * hk.heat_kernel(1.0 - s, y, o) / z;
        cdf_[i] = i == 0 ? 0.0 : cdf_[i - 1] + 0.5 * step * (density_[i - 1] + density_[i]);
    }
}

double CircleMarginalCdf::operator()(double y) const
{
    y -= length_ * std::floor(y / length_);
    const double u = y / length_ * (grid_.size() - 1);
    const int i = std::clamp(static_cast<int>(u), 0, static_cast<int>(grid_.size()) - 2);
    const double w = u - i;
    return (1 - w) * cdf_[i] + w * cdf_[i + 1];
}

double CircleMarginalCdf::expect(const std::function<double(double)>& g) const
{
    // periodic trapezoid: the end points coincide
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < grid_.size(); ++i) acc += g(grid_[i]) * density_[i];
    return acc * length_ / (grid_.size() - 1);
}

SphereMarginalCos::SphereMarginalCos(double s, const HeatKernelOptions& opts)
    : s_(s), kernel_(ManifoldModel::unit_sphere2(), opts)
{
    require(s > 0.0 && s < 1.0, "SphereMarginalCos: s must lie in (0, 1)");
    norm_ = kernel_.sphere_zonal(1.0, 1.0).value;
}

double SphereMarginalCos::density(double c) const
{
    return 2 * kPi * kernel_.sphere_zonal(s_, c).value * kernel_.sphere_zonal(1.0 - s_, c).value / norm_;
}

double SphereMarginalCos::probability(double a, double b) const
{
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate([&](double c) { return density(c); }, a, b,
                                                                        10, 1e-12);
}

namespace {

constexpr std::array<double, 3> kProbeTimes{0.25, 0.5, 0.75};
constexpr double kKolmogorovSd = 0.2603;  // null sd of sqrt(n) D

struct Probe {
    std::array<double, 9> p{};
    int rejections = 0;
};

struct GofTest {
    std::string name;
    TestResult result;
    double scaled_stat;  // in units where the null sd is noise_sd
    double noise_sd;
};

struct MarginalRun {
    std::vector<Probe> probes;
    std::vector<GofTest> tests;
    long rejections = 0;
};

// Cos-angle histogram against 32 equal bins on [-1, 1]; sparse bins at the
// antipodal end are merged until the expectation reaches 5.
TestResult sphere_cos_chi_square(const std::vector<double>& cs, const SphereMarginalCos& law)
{
    constexpr int kBins = 32;
    std::vector<double> count(kBins, 0.0);
    for (double c : cs) count[std::clamp(static_cast<int>((c + 1.0) / 2.0 * kBins), 0, kBins - 1)] += 1.0;
    std::vector<double> obs, expct;
    double acc_o = 0.0, acc_e = 0.0;
    for (int b = 0; b < kBins; ++b) {
        const double lo = -1.0 + 2.0 * b / kBins;
        acc_o += count[b];
        acc_e += law.probability(lo, lo + 2.0 / kBins) * cs.size();
        if (acc_e >= 5.0) {
            obs.push_back(acc_o);
            expct.push_back(acc_e);
            acc_o = acc_e = 0.0;
        }
    }
    if (acc_e > 0.0 && !obs.empty()) {
        obs.back() += acc_o;
        expct.back() += acc_e;
    }
    return chi_square_test(obs, expct);
}

MarginalRun run_marginals(const ExperimentConfig& cfg, std::size_t n)
{
    const BridgeSampler bs = detail::make_sampler(cfg);
    const ManifoldModel& m = bs.config().model;
    const TimeGrid& g = bs.config().grid;
    const int l = m.embed_dim();
    std::array<int, 3> idx{};
    for (int j = 0; j < 3; ++j) idx[j] = g.index_of(kProbeTimes[j]);

    MarginalRun run;
    run.probes = parallel_collect<Probe>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        Probe pr;
        for (int j = 0; j < 3; ++j)
            for (int c = 0; c < l; ++c) pr.p[3 * j + c] = ls.path.points(c, idx[j]);
        pr.rejections = ls.rejections;
        return pr;
    });
    for (const auto& pr : run.probes) run.rejections += pr.rejections;

    const double rn = std::sqrt(static_cast<double>(n));
    std::vector<double> vals(n);
    for (int j = 0; j < 3; ++j) {
        const double s = kProbeTimes[j];
        const std::string tag = "s" + detail::fmt(s, 3);
        if (m.is_flat()) {
            for (int a = 0; a < m.dim(); ++a) {
                for (std::size_t i = 0; i < n; ++i) vals[i] = run.probes[i].p[3 * j + a];
                const CircleMarginalCdf cdf(m.lengths()(a), s, cfg.heatkernel);
                const TestResult r = ks_test(vals, [&](double y) { return cdf(y); });
                run.tests.push_back({"ks_" + tag + "_axis" + std::to_string(a), r, rn * r.statistic, kKolmogorovSd});
            }
        } else {
            const Vector m0 = bs.config().m0;
            const Matrix f0 = bs.config().r0.frame;
            std::vector<double> az(n);
            for (std::size_t i = 0; i < n; ++i) {
                Vector p(3);
                for (int c = 0; c < 3; ++c) p(c) = run.probes[i].p[3 * j + c];
                vals[i] = std::clamp(p.dot(m0), -1.0, 1.0);
                az[i] = (std::atan2(p.dot(f0.col(1)), p.dot(f0.col(0))) + kPi) / (2 * kPi);
            }
            const SphereMarginalCos law(s, cfg.heatkernel);
            const TestResult chi = sphere_cos_chi_square(vals, law);
            run.tests.push_back({"chi2_cos_" + tag, chi, chi.statistic, std::sqrt(2.0 * chi.dof)});
            const TestResult ks = ks_test(az, [](double u) { return std::clamp(u, 0.0, 1.0); });
            run.tests.push_back({"ks_azimuth_" + tag, ks, rn * ks.statistic, kKolmogorovSd});
        }
    }
    return run;
}

}  // namespace

ExperimentReport bridge_marginal_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const std::size_t n = cfg.samples_or(100000);
    const MarginalRun main = run_marginals(cfg, n);

    double min_p = 1.0;
    for (const auto& t : main.tests) {
        rep.row(t.name + "_p", t.result.p_value, t.result.p_value, t.result.p_value, n,
                "stat=" + detail::fmt(t.result.statistic));
        min_p = std::min(min_p, t.result.p_value);
    }
    const double m_tests = static_cast<double>(main.tests.size());
    rep.row("tests", m_tests, m_tests, m_tests, n);
    rep.check_min(cfg, "bonferroni_min_p", std::min(1.0, min_p * m_tests), 0.01);
    rep.row("rejection_rate", static_cast<double>(main.rejections) / n, 0, 0, n, "monitored");

    // splice sensitivity: eps against eps/2, or 2 eps against eps when the
    // half step would not be resolved by the grid
    ExperimentConfig other_cfg = cfg;
    other_cfg.seed = cfg.seed ^ 0x5bd1e9955bd1e995ULL;
    if (cfg.eps_splice / 2 >= 4.0 / cfg.grid_n) {
        other_cfg.eps_splice = cfg.eps_splice / 2;
    } else {
        other_cfg.eps_splice = 2 * cfg.eps_splice;
        if (other_cfg.eps_splice > 0.01)
            throw ConfigError("bridge-marginal: neither eps/2 nor 2 eps is admissible; raise grid.N");
    }
    const MarginalRun other = run_marginals(other_cfg, n);
    double worst = 0.0;
    for (std::size_t i = 0; i < main.tests.size(); ++i) {
        const double z =
            std::abs(main.tests[i].scaled_stat - other.tests[i].scaled_stat) / (std::sqrt(2.0) * main.tests[i].noise_sd);
        rep.row(main.tests[i].name + "_eps_z", z, z, z, n);
        worst = std::max(worst, z);
    }
    rep.notes.push_back("splice comparison: eps " + detail::fmt(cfg.eps_splice) + " vs " +
                        detail::fmt(other_cfg.eps_splice) + " on an independent seed");
    rep.check_max(cfg, "eps_halving_z", worst, 3.0);

    // marginal at s = 1/2: first coordinate (torus) or cos angle (sphere)
    const ManifoldModel m = cfg.model();
    constexpr int kBins = 40;
    const double lo = m.is_flat() ? 0.0 : -1.0;
    const double hi = m.is_flat() ? m.lengths()(0) : 1.0;
    const double w = (hi - lo) / kBins;
    std::vector<double> hist(kBins, 0.0);
    const Vector m0 = default_base_point(m);
    for (const auto& pr : main.probes) {
        double v = pr.p[3];
        if (!m.is_flat()) v = pr.p[3] * m0(0) + pr.p[4] * m0(1) + pr.p[5] * m0(2);
        hist[std::clamp(static_cast<int>((v - lo) / w), 0, kBins - 1)] += 1.0 / (n * w);
    }
    auto& emp = rep.plots["marginal_s0.5_empirical"];
    auto& th = rep.plots["marginal_s0.5_theory"];
    if (m.is_flat()) {
        const HeatKernelEvaluator hk(ManifoldModel::flat_torus({hi}), cfg.heatkernel);
        const Vector o = Vector::Zero(1);
        const double z = hk.heat_kernel(1.0, o, o);
        for (int b = 0; b < kBins; ++b) {
            Vector y(1);
            y(0) = lo + (b + 0.5) * w;
            emp.emplace_back(y(0), hist[b]);
            th.emplace_back(y(0), hk.heat_kernel(0.5, o, y) * hk.heat_kernel(0.5, y, o) / z);
        }
    } else {
        const SphereMarginalCos law(0.5, cfg.heatkernel);
        for (int b = 0; b < kBins; ++b) {
            const double c = lo + (b + 0.5) * w;
            emp.emplace_back(c, hist[b]);
            th.emplace_back(c, law.density(c));
        }
    }
    return rep;
}

namespace {

struct Triple {
    std::string name;
    CylindricalFunctional F, G;
    CameronMartinVector h;
};

std::vector<Triple> ibp_triples(const ExperimentConfig& cfg, const ManifoldModel& m, const TimeGrid& g)
{
    using detail::family;
    const CameronMartinVector h1 = detail::require_h0(cfg, g, "ibp");
    const int d = m.dim();
    const int b = detail::other_axis(m);
    auto cm = [&](std::initializer_list<HFamily::Term> t) { return CameronMartinVector::from_family(g, d, family(t)); };
    const CameronMartinVector h3 = cm({{0, 1, 0.7}, {b, 2, 0.5}});
    const CameronMartinVector h4 = cm({{0, 2, 1.0}, {b, 1, -0.4}});
    const CameronMartinVector h5 = cm({{b, 3, 0.6}, {0, 1, 0.8}});
    if (m.is_flat()) {
        return {
            {"F=1,G=1", cyl_constant(1.0), cyl_constant(1.0), h1},
            {"F=cos(y0(1/2)+0.7),G=1", cyl_torus_wave(m, g, 0.5, 0, 1, 0.7), cyl_constant(1.0), h1},
            {"F=cos(y0(1/4)),G=cos(2y1(3/4)+0.3)", cyl_torus_wave(m, g, 0.25, 0, 1, 0.0),
             cyl_torus_wave(m, g, 0.75, b, 2, 0.3), h3},
            {"F=cos(y0(1/3)+0.2)cos(y1(2/3)),G=cos(2y0(1/2)+1)",
             cyl_product(cyl_torus_wave(m, g, 1.0 / 3, 0, 1, 0.2), cyl_torus_wave(m, g, 2.0 / 3, b, 1, 0.0)),
             cyl_torus_wave(m, g, 0.5, 0, 2, 1.0), h4},
            {"F=cos(y1(0.4)+0.5),G=cos(y0(0.6))cos(y0(0.8)+0.9)", cyl_torus_wave(m, g, 0.4, b, 1, 0.5),
             cyl_product(cyl_torus_wave(m, g, 0.6, 0, 1, 0.0), cyl_torus_wave(m, g, 0.8, 0, 1, 0.9)), h5},
        };
    }
    return {
        {"F=1,G=1", cyl_constant(1.0), cyl_constant(1.0), h1},
        {"F=z(1/3),G=z(2/3)", cyl_sphere_coordinate(g, 1.0 / 3, 2), cyl_sphere_coordinate(g, 2.0 / 3, 2), h1},
        {"F=x(1/2)y(1/2),G=1", cyl_sphere_quadratic(g, 0.5, 0, 1), cyl_constant(1.0), h3},
        {"F=x(1/4),G=z(3/4)^2", cyl_sphere_coordinate(g, 0.25, 0), cyl_sphere_quadratic(g, 0.75, 2, 2), h4},
        {"F=z(1/3)y(2/3),G=x(1/2)",
         cyl_product(cyl_sphere_coordinate(g, 1.0 / 3, 2), cyl_sphere_coordinate(g, 2.0 / 3, 1)),
         cyl_sphere_coordinate(g, 0.5, 0), h5},
    };
}

}  // namespace

ExperimentReport ibp_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const BridgeSampler bs = detail::make_sampler(cfg);
    const ManifoldModel& m = bs.config().model;
    const TimeGrid& g = bs.config().grid;
    const std::size_t n = cfg.samples_or(m.is_flat() ? 100000 : 10000);
    const std::vector<Triple> triples = ibp_triples(cfg, m, g);
    const std::size_t nt = triples.size();

    // per sample: lhs and rhs of each triple
    const auto vals = parallel_collect<std::vector<double>>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        std::vector<double> out(2 * nt);
        for (std::size_t i = 0; i < nt; ++i) {
            const Triple& t = triples[i];
            const double f = evaluate(t.F, ls.path), gv = evaluate(t.G, ls.path);
            const double dF = dh_cylindrical(m, t.F, t.h, ls.path, ls.frames);
            const double dG = dh_cylindrical(m, t.G, t.h, ls.path, ls.frames);
            const double div = divergence(m, t.h, ls.x, ls.frames);
            out[2 * i] = dF * gv;
            out[2 * i + 1] = f * (-dG + div * gv);
        }
        return out;
    });

    std::vector<double> lhs(n), rhs(n), diff(n);
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t k = 0; k < n; ++k) {
            lhs[k] = vals[k][2 * i];
            rhs[k] = vals[k][2 * i + 1];
            diff[k] = lhs[k] - rhs[k];
        }
        const MCStat sl = summarize(lhs), sr = summarize(rhs), sd = summarize(diff);
        const std::string tag = "triple" + std::to_string(i + 1);
        rep.notes.push_back(tag + ": " + triples[i].name);
        rep.row(tag + "_lhs", sl);
        rep.row(tag + "_rhs", sr);
        rep.row(tag + "_diff", sd);
        rep.check_max(cfg, tag + "_z", detail::z_score(sd, 0.0), 3.0);

        if (m.is_flat() && i == 1) {
            // E[D_h F] = -w h(1/2) E[sin(w y + phase)] = -w h(1/2) sin(phase) E[cos(w y)]
            const double L = m.lengths()(0);
            const double w = 2 * kPi / L;
            const CircleMarginalCdf law(L, 0.5, cfg.heatkernel);
            const double ecos = law.expect([&](double y) { return std::cos(w * y); });
            const double closed = -w * triples[i].h.h(0, g.index_of(0.5)) * std::sin(0.7) * ecos;
            rep.row("closed_form_value", closed, closed, closed, 0);
            rep.check_max(cfg, "closed_form_lhs_z", detail::z_score(sl, closed), 3.0);
            rep.check_max(cfg, "closed_form_rhs_z", detail::z_score(sr, closed), 3.0);
        }
    }
    return rep;
}

}  // namespace loopspace
