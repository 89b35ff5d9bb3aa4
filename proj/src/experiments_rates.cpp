#include "experiment_util.hpp"

#include <algorithm>

namespace loopspace {

namespace {

std::vector<int> probe_indices(const TimeGrid& g, const std::vector<double>& times)
{
    std::vector<int> idx;
    for (double s : times) {
        try {
            idx.push_back(g.index_of(s));
        } catch (const ContractViolation&) {
            throw ConfigError("rate.s_values: " + detail::fmt(s) + " is not a grid time");
        }
    }
    return idx;
}

// L2 norm sqrt(E Y) of the variable whose squares are Y, with a delta-method SE.
struct L2Estimate {
    double norm, se;
};

L2Estimate l2_from_squares(const std::vector<double>& squares)
{
    const MCStat st = summarize(squares);
    const double norm = std::sqrt(st.mean);
    return {norm, norm > 0.0 ? st.se() / (2 * norm) : 0.0};
}

void l2_row(ExperimentReport& rep, const std::string& name, const L2Estimate& e, std::size_t n)
{
    rep.row(name, e.norm, e.norm - kZ99 * e.se, e.norm + kZ99 * e.se, n);
}

CameronMartinVector unit_h(const ExperimentConfig& cfg, const TimeGrid& g)
{
    const CameronMartinVector h = cfg.h_vector(g);
    const double norm = cm_norm(h);
    if (!(norm > 0.0)) throw ConfigError("h must be nonzero");
    return scaled(1.0 / norm, h);
}

std::vector<double> collect_divergence(const ExperimentConfig& cfg, const BridgeSampler& bs,
                                       const CameronMartinVector& h, std::size_t n)
{
    const ManifoldModel& m = bs.config().model;
    return parallel_collect<double>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        return divergence(m, h, ls.x, ls.frames);
    });
}

}  // namespace

ExperimentReport divergence_rate_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const BridgeSampler bs = detail::make_sampler(cfg);
    const ManifoldModel& m = bs.config().model;
    const TimeGrid& g = bs.config().grid;
    const int d = m.dim();
    const std::size_t n = cfg.samples_or(100000);
    const HFamily fam = HFamily::fourier(cfg.rate_mode, 0, 1.0);
    const CameronMartinVector h = CameronMartinVector::from_family(g, d, fam);
    const std::vector<int> idx = probe_indices(g, cfg.rate_s);
    const std::size_t ns = idx.size();

    const auto sq = parallel_collect<std::vector<double>>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        const std::vector<double> prof = divergence_profile(m, h, ls.x, ls.frames);
        std::vector<double> out(ns);
        for (std::size_t j = 0; j < ns; ++j) {
            const double r = prof[idx[j]] - prof.back();
            out[j] = r * r;
        }
        return out;
    });

    std::vector<double> abscissa, norms, col(n);
    double worst_z = 0.0;
    for (std::size_t j = 0; j < ns; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = sq[i][j];
        const L2Estimate e = l2_from_squares(col);
        const double s = cfg.rate_s[j];
        const double energy = fam.energy_after(s, d);
        const std::string tag = "s" + detail::fmt(s);
        l2_row(rep, "l2_" + tag, e, n);
        abscissa.push_back(std::sqrt(energy));
        norms.push_back(e.norm);
        rep.plots["l2_vs_energy"].emplace_back(abscissa.back(), e.norm);
        if (m.is_flat()) {
            const double closed = std::sqrt(std::max(0.0, energy - fam.h(s, d).squaredNorm()));
            const double z = std::abs(e.norm - closed) / e.se;
            rep.row("closed_form_" + tag, closed, closed, closed, 0, "z=" + detail::fmt(z));
            rep.plots["closed_form"].emplace_back(abscissa.back(), closed);
            worst_z = std::max(worst_z, z);
        }
    }
    const RateFit fit = fit_rate(abscissa, norms);
    rep.row("rate_slope", fit.slope, fit.slope, fit.slope, n, "r2=" + detail::fmt(fit.r2));
    if (m.is_flat()) {
        rep.check_max(cfg, "closed_form_z", worst_z, 3.0);
        rep.check_range(cfg, "rate_slope", fit.slope, 0.9, 1.1);
    } else {
        rep.check_range(cfg, "rate_slope", fit.slope, 0.8, 1.2);
    }
    rep.notes.push_back("h: Fourier mode " + std::to_string(cfg.rate_mode) + " on axis 0, |h|_H = 1");
    return rep;
}

ExperimentReport antidev_rate_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const BridgeSampler bs = detail::make_sampler(cfg);
    const ManifoldModel& m = bs.config().model;
    const TimeGrid& g = bs.config().grid;
    const std::size_t n = cfg.samples_or(100000);
    const std::vector<int> idx = probe_indices(g, cfg.rate_s);
    const std::size_t ns = idx.size();

    const auto sq = parallel_collect<std::vector<double>>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        std::vector<double> out(ns);
        for (std::size_t j = 0; j < ns; ++j)
            out[j] = (ls.x.values.col(idx[j]) - ls.x.values.col(g.steps())).squaredNorm();
        return out;
    });

    std::vector<double> gaps, norms, reference, col(n);
    for (std::size_t j = 0; j < ns; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = sq[i][j];
        const L2Estimate e = l2_from_squares(col);
        const double s = cfg.rate_s[j];
        l2_row(rep, "l2_s" + detail::fmt(s), e, n);
        gaps.push_back(1.0 - s);
        norms.push_back(e.norm);
        // Euclidean Brownian bridge in R^d: E|x(s) - x(1)|^2 = d s (1 - s)
        reference.push_back(std::sqrt(m.dim() * s * (1.0 - s)));
        rep.plots["l2_vs_gap"].emplace_back(1.0 - s, e.norm);
        rep.plots["bridge_reference"].emplace_back(1.0 - s, reference.back());
    }
    const RateFit fit = fit_rate(gaps, norms);
    const RateFit ref = fit_rate(gaps, reference);
    rep.row("rate_slope", fit.slope, fit.slope, fit.slope, n, "r2=" + detail::fmt(fit.r2));
    rep.row("bridge_reference_slope", ref.slope, ref.slope, ref.slope, 0);
    rep.check_range(cfg, "rate_slope", fit.slope, 0.4, 0.6);
    return rep;
}

ExperimentReport fernique_sup_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const BridgeSampler bs = detail::make_sampler(cfg);
    const ManifoldModel& m = bs.config().model;
    const TimeGrid& g = bs.config().grid;
    const int d = m.dim();
    const std::size_t n = cfg.samples_or(100000);
    const double lambda = cfg.fernique_lambda;

    const std::vector<double> sups = parallel_collect<double>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        return ls.x.values.colwise().norm().maxCoeff();
    });
    const MCStat em = exp_moment(sups, lambda, true);
    rep.row("exp_moment_sup_sq", em);
    rep.row("top_sample_share", em.top_sample_share, em.top_sample_share, em.top_sample_share, n);
    rep.row("tail_index", em.tail_index, em.tail_index, em.tail_index, n);
    rep.check_flag("exp_moment_stable", em.stability == Stability::Stable, em.top_sample_share);

    if (m.is_flat()) {
        // Exact Euclidean bridges to a lattice endpoint: the winding W_a in
        // L_a Z has weight exp(-W_a^2 / 2), then a discrete Brownian bridge
        // from 0 to W on the same grid.
        std::vector<std::vector<double>> winding_cdf(d);
        std::vector<int> kmax(d);
        for (int a = 0; a < d; ++a) {
            const double L = m.lengths()(a);
            kmax[a] = static_cast<int>(std::ceil(12.0 / L)) + 1;
            double total = 0.0;
            for (int k = -kmax[a]; k <= kmax[a]; ++k) {
                total += std::exp(-0.5 * (k * L) * (k * L));
                winding_cdf[a].push_back(total);
            }
            for (double& c : winding_cdf[a]) c /= total;
        }
        const int N = g.steps();
        const double sdt = std::sqrt(g.dt());
        const std::vector<double> oracle =
            parallel_collect<double>(n, cfg.seed ^ 0x2545f4914f6cdd1dULL, cfg.workers, [&](std::size_t, RngStream& rng) {
                Eigen::MatrixXd walk = Eigen::MatrixXd::Zero(d, N + 1);
                for (int k = 0; k < N; ++k)
                    for (int a = 0; a < d; ++a) walk(a, k + 1) = walk(a, k) + sdt * rng.normal();
                double best = 0.0;
                Vector w(d);
                for (int a = 0; a < d; ++a) {
                    const double u = rng.uniform();
                    const auto it = std::lower_bound(winding_cdf[a].begin(), winding_cdf[a].end(), u);
                    const int k = static_cast<int>(it - winding_cdf[a].begin()) - kmax[a];
                    w(a) = k * m.lengths()(a);
                }
                for (int k = 0; k <= N; ++k) {
                    const double t = g.time(k);
                    const Vector b = walk.col(k) - t * walk.col(N) + t * w;
                    best = std::max(best, b.norm());
                }
                return best;
            });
        const MCStat eo = exp_moment(oracle, lambda, true);
        rep.row("oracle_exp_moment_sup_sq", eo);
        rep.check_max(cfg, "oracle_z", detail::z_diff(em, eo), 3.0);
    }

    std::vector<double> sorted = sups;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 200))
        rep.plots["sup_sq_survival"].emplace_back(sorted[i] * sorted[i], 1.0 - static_cast<double>(i) / n);
    rep.notes.push_back("lambda = " + detail::fmt(lambda));
    return rep;
}

ExperimentReport fernique_holder_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    try {
        cfg.holder.validate();
    } catch (const ContractViolation& e) {
        throw ConfigError(std::string("fernique-holder: ") + e.what());
    }
    const BridgeSampler bs = detail::make_sampler(cfg);
    const TimeGrid& g = bs.config().grid;
    const std::size_t n = cfg.samples_or(100000);

    // linear path x(t) = t with 2m = 4, alpha = 1/4: (1/6)^(1/4)
    EuclideanPath line = EuclideanPath::zero(g, 1);
    for (int k = 0; k <= g.steps(); ++k) line.values(0, k) = g.time(k);
    const double exact = std::pow(1.0 / 6.0, 0.25);
    const double lin = holder_norm(line, HolderParams{2, 0.25});
    rep.row("linear_path_norm", lin, exact, exact, 0);
    rep.check_max(cfg, "linear_path_error", std::abs(lin - exact), 1e-3);

    const HolderRateResult rate = holder_rate_constant(cfg.holder, g, 1, 16, cfg.seed);
    const double lambda = 0.5 * rate.value;
    rep.row("rate_constant", rate.value, rate.value, rate.value, 0, rate.converged ? "converged" : "not-converged");
    rep.row("lambda", lambda, lambda, lambda, 0);

    const std::vector<double> norms = parallel_collect<double>(n, cfg.seed, cfg.workers, [&](std::size_t, RngStream& rng) {
        const LoopSample ls = bs.sample(rng);
        return holder_norm(ls.x, cfg.holder);
    });
    const MCStat em = exp_moment(norms, lambda, true);
    rep.row("exp_moment_holder_sq", em);
    rep.row("top_sample_share", em.top_sample_share, em.top_sample_share, em.top_sample_share, n);
    rep.row("tail_index", em.tail_index, em.tail_index, em.tail_index, n);
    rep.check_flag("exp_moment_stable", em.stability == Stability::Stable, em.top_sample_share);
    std::vector<double> sorted = norms;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 200))
        rep.plots["holder_sq_survival"].emplace_back(sorted[i] * sorted[i], 1.0 - static_cast<double>(i) / n);
    return rep;
}

ExperimentReport div_tail_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const BridgeSampler bs = detail::make_sampler(cfg);
    const ManifoldModel& m = bs.config().model;
    const std::size_t n = cfg.samples_or(1000000);
    const CameronMartinVector h = unit_h(cfg, bs.config().grid);
    const double lambda0 = 1.0 / ((2.0 + ricci_sup_norm(m)) * cm_norm(h));
    rep.row("lambda0", lambda0, lambda0, lambda0, 0);

    const std::vector<double> div = collect_divergence(cfg, bs, h, n);
    const MCStat st = summarize(div);
    rep.row("divergence", st);
    rep.row("divergence_variance", st.variance, st.variance, st.variance, n);

    const TailFit tf = tail_exponent(div, 0.99, 0.9999, 200, cfg.seed);
    const double margin = 0.5 * (tf.ci_hi - tf.ci_lo);
    rep.row("tail_slope", tf.slope, tf.ci_lo, tf.ci_hi, tf.n_tail);
    rep.check_max(cfg, "tail_slope", tf.slope, -lambda0 + margin);
    for (const auto& pt : tf.curve) rep.plots["tail_curve"].push_back(pt);
    if (!tf.curve.empty()) {
        const auto [x0, y0] = tf.curve.front();
        for (const auto& [x, y] : tf.curve) rep.plots["lambda0_reference"].emplace_back(x, y0 - lambda0 * (x - x0));
    }

    const MCStat em = exp_moment(div, 0.3 * lambda0, true);
    rep.row("exp_moment_0.3lambda0", em);
    rep.check_flag("exp_moment_stable", em.stability == Stability::Stable, em.top_sample_share);
    return rep;
}

ExperimentReport exp_linear_experiment(const ExperimentConfig& cfg)
{
    ExperimentReport rep;
    const BridgeSampler bs = detail::make_sampler(cfg);
    const std::size_t n = cfg.samples_or(100000);
    const CameronMartinVector h = unit_h(cfg, bs.config().grid);
    const std::vector<double> div = collect_divergence(cfg, bs, h, n);
    for (double lam : {1.0, 2.0, 5.0}) {
        const MCStat em = exp_moment(div, lam, false);
        rep.row("exp_moment_lambda" + detail::fmt(lam), em);
        rep.plots["top_share_vs_lambda"].emplace_back(lam, em.top_sample_share);
    }
    const double lam = cfg.lambda_linear;
    const MCStat em = exp_moment(div, lam, false);
    rep.row("exp_moment_lambda" + detail::fmt(lam), em);
    rep.row("top_sample_share", em.top_sample_share, em.top_sample_share, em.top_sample_share, n);
    rep.row("tail_index", em.tail_index, em.tail_index, em.tail_index, n);
    rep.plots["top_share_vs_lambda"].emplace_back(lam, em.top_sample_share);
    rep.check_flag("exp_moment_stable", em.stability == Stability::Stable, em.top_sample_share);
    return rep;
}

}  // namespace loopspace
