#include "loopspace/mc.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <numbers>

namespace loopspace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double pairwise_sum(std::span<const double> xs)
{
    if (xs.size() <= 8) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

std::string to_string(Stability s)
{
    switch (s) {
    case Stability::Stable: return "STABLE";
    case Stability::Unstable: return "UNSTABLE";
    case Stability::InfiniteSuspect: return "INFINITE-SUSPECT";
    }
    return "?";
}

MCStat summarize(std::span<const double> xs)
{
    require(xs.size() >= 2, "summarize: need at least two samples");
    MCStat st;
    st.n = xs.size();
    const double n = static_cast<double>(st.n);
    st.mean = pairwise_sum(xs) / n;

    std::vector<double> buf(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) buf[i] = (xs[i] - st.mean) * (xs[i] - st.mean);
    st.variance = pairwise_sum(buf) / (n - 1.0);
    st.ci_half_width = kZ99 * std::sqrt(st.variance / n);

    double top = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        buf[i] = std::abs(xs[i]);
        top = std::max(top, buf[i]);
    }
    const double total = pairwise_sum(buf);
    st.top_sample_share = total > 0.0 ? top / total : 0.0;
    if (!std::isfinite(st.mean) || !std::isfinite(st.variance))
        st.stability = Stability::InfiniteSuspect;
    else if (st.top_sample_share > 0.5)
        st.stability = Stability::Unstable;
    return st;
}

MCStat estimate(const std::function<double(RngStream&)>& sampler, std::size_t n, std::uint64_t seed, int workers)
{
    require(n >= 2, "estimate: need n >= 2");
    const auto xs = parallel_collect<double>(n, seed, workers, [&](std::size_t, RngStream& rng) { return sampler(rng); });
    return summarize(xs);
}

double lp_norm(std::span<const double> xs, double p)
{
    require(p >= 1.0, "lp_norm: p must be at least 1");
    require(!xs.empty(), "lp_norm: no samples");
    std::vector<double> buf(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) buf[i] = std::pow(std::abs(xs[i]), p);
    return std::pow(pairwise_sum(buf) / static_cast<double>(xs.size()), 1.0 / p);
}

RateFit fit_rate(std::span<const double> xs, std::span<const double> ys)
{
    require(xs.size() == ys.size(), "fit_rate: abscissa and ordinate sizes differ");
    require(xs.size() >= 3, "fit_rate: need at least three points");
    RateFit fit;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) throw DomainError("fit_rate: coordinates must be positive");
        fit.points.emplace_back(std::log(xs[i]), std::log(ys[i]));
    }
    const double n = static_cast<double>(fit.points.size());
    double mx = 0.0, my = 0.0;
    for (auto [x, y] : fit.points) {
        mx += x;
        my += y;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (auto [x, y] : fit.points) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    require(sxx > 0.0, "fit_rate: abscissae are all equal");
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (auto [x, y] : fit.points) {
        const double r = y - (fit.intercept + fit.slope * x);
        ss_res += r * r;
    }
    fit.r2 = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return fit;
}

namespace {

// Least-squares coefficient of t^2 in log S = a t^2 + b log t + c.
double tail_regression(const std::vector<double>& t, const std::vector<double>& log_s)
{
    const auto m = static_cast<Eigen::Index>(t.size());
    Eigen::MatrixXd design(m, 3);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        design(i, 0) = t[i] * t[i];
        design(i, 1) = std::log(t[i]);
        design(i, 2) = 1.0;
        rhs(i) = log_s[i];
    }
    return design.colPivHouseholderQr().solve(rhs)(0);
}

}  // namespace

TailFit tail_exponent(std::span<const double> samples, double q_lo, double q_hi, int n_boot, std::uint64_t seed)
{
    require(q_lo >= 0.9 && q_hi <= 0.9999 && q_lo < q_hi, "tail_exponent: quantile window must lie in [0.9, 0.9999]");
    require(n_boot >= 10, "tail_exponent: need at least 10 bootstrap resamples");
    const std::size_t n = samples.size();
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = std::abs(samples[i]);
    std::sort(a.begin(), a.end());

    const double nd = static_cast<double>(n);
    if (nd * (1.0 - q_hi) < 10.0 || nd * (1.0 - q_lo) < 100.0)
        throw InsufficientData("tail_exponent: too few samples beyond the quantile window");

    // thresholds at quantile levels spaced geometrically in 1 - q
    constexpr int kLevels = 40;
    std::vector<std::size_t> pos;  // first index with a[idx] > threshold
    std::vector<double> thr;
    for (int j = 0; j < kLevels; ++j) {
        const double u = (1.0 - q_lo) * std::pow((1.0 - q_hi) / (1.0 - q_lo), j / (kLevels - 1.0));
        const auto idx = static_cast<std::size_t>(std::floor(nd * (1.0 - u)));
        const double t = a[std::min(idx, n - 1)];
        if (!(t > 0.0) || (!thr.empty() && t <= thr.back())) continue;
        thr.push_back(t);
        pos.push_back(static_cast<std::size_t>(std::upper_bound(a.begin(), a.end(), t) - a.begin()));
    }
    if (thr.size() < 5) throw InsufficientData("tail_exponent: too few distinct thresholds");

    TailFit fit;
    std::vector<double> log_s(thr.size());
    for (std::size_t j = 0; j < thr.size(); ++j) {
        log_s[j] = std::log(static_cast<double>(n - pos[j]) / nd);
        fit.curve.emplace_back(thr[j] * thr[j], log_s[j]);
    }
    fit.slope = tail_regression(thr, log_s);

    // Bootstrap: the number of resampled points from the tail pool is
    // binomial; which pool members they are is uniform.
    const std::size_t base = pos.front();
    const std::size_t pool = n - base;
    fit.n_tail = pool;
    RngStream rng(seed);
    std::binomial_distribution<std::size_t> draw_count(n, static_cast<double>(pool) / nd);
    std::uniform_int_distribution<std::size_t> draw_member(0, pool - 1);
    std::vector<double> slopes;
    std::vector<std::size_t> hist(pool);
    for (int b = 0; b < n_boot; ++b) {
        std::fill(hist.begin(), hist.end(), 0);
        const std::size_t k = draw_count(rng.engine());
        for (std::size_t i = 0; i < k; ++i) ++hist[draw_member(rng.engine())];
        // counts above each threshold from the cumulative histogram
        std::vector<double> tb, lb;
        std::size_t above = 0;
        std::size_t cursor = pool;
        for (std::size_t jj = thr.size(); jj-- > 0;) {
            const std::size_t start = pos[jj] - base;
            while (cursor > start) above += hist[--cursor];
            if (above == 0) continue;
            tb.push_back(thr[jj]);
            lb.push_back(std::log(static_cast<double>(above) / nd));
        }
        if (tb.size() < 5) continue;
        slopes.push_back(tail_regression(tb, lb));
    }
    if (slopes.size() < 10) throw InsufficientData("tail_exponent: bootstrap degenerate");
    std::sort(slopes.begin(), slopes.end());
    auto pct = [&](double q) {
        const double x = q * (slopes.size() - 1);
        const auto i = static_cast<std::size_t>(std::floor(x));
        const double f = x - i;
        return i + 1 < slopes.size() ? (1 - f) * slopes[i] + f * slopes[i + 1] : slopes.back();
    };
    fit.ci_lo = pct(0.005);
    fit.ci_hi = pct(0.995);
    return fit;
}

MCStat exp_moment(std::span<const double> samples, double lambda, bool square)
{
    require(lambda > 0.0, "exp_moment: lambda must be positive");
    require(samples.size() >= 2, "exp_moment: need at least two samples");
    const std::size_t n = samples.size();
    const double nd = static_cast<double>(n);

    std::vector<double> e(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z = samples[i];
        e[i] = square ? lambda * z * z : lambda * std::abs(z);
    }
    const double top = *std::max_element(e.begin(), e.end());

    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(e[i] - top);
    const double scaled_sum = pairwise_sum(w);
    const double scaled_mean = scaled_sum / nd;
    for (std::size_t i = 0; i < n; ++i) w[i] = (w[i] - scaled_mean) * (w[i] - scaled_mean);
    const double scaled_var = pairwise_sum(w) / (nd - 1.0);

    MCStat st;
    st.n = n;
    st.mean = std::exp(top) * scaled_mean;
    st.variance = std::exp(2.0 * top) * scaled_var;
    st.ci_half_width = kZ99 * std::sqrt(st.variance / nd);
    st.top_sample_share = 1.0 / scaled_sum;

    // Hill estimate of the tail index of exp(e), from the top order statistics
    const std::size_t k = std::clamp<std::size_t>(n / 100, 10, 1000);
    if (k < n) {
        std::nth_element(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(k), e.end(), std::greater<>());
        const double ek = e[k];
        double acc = 0.0;
        for (std::size_t i = 0; i < k; ++i) acc += e[i] - ek;
        st.tail_index = acc > 0.0 ? static_cast<double>(k) / acc : std::numeric_limits<double>::infinity();
    }

    if (top > std::log(std::numeric_limits<double>::max()) || !std::isfinite(st.mean))
        st.stability = Stability::InfiniteSuspect;
    else if (st.top_sample_share > 0.5 || st.tail_index < 1.0)
        st.stability = Stability::Unstable;
    return st;
}

double kolmogorov_tail(double x)
{
    if (x <= 0.0) return 1.0;
    if (x < 1.0) {
        // 1 - sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2))
        const double pi2 = std::numbers::pi * std::numbers::pi;
        double s = 0.0;
        for (int k = 1; k < 100; ++k) {
            const double term = std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * pi2 / (8.0 * x * x));
            s += term;
            if (term < 1e-18) break;
        }
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / x * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k < 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf)
{
    require(samples.size() >= 2, "ks_test: need at least two samples");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    const double rn = std::sqrt(n);
    return {d, kolmogorov_tail((rn + 0.12 + 0.11 / rn) * d), 0};
}

TestResult chi_square_test(std::span<const double> observed, std::span<const double> expected, int fitted_params)
{
    require(observed.size() == expected.size(), "chi_square_test: size mismatch");
    const int dof = static_cast<int>(observed.size()) - 1 - fitted_params;
    require(dof >= 1, "chi_square_test: no degrees of freedom");
    double stat = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        require(expected[i] > 0.0, "chi_square_test: expected counts must be positive");
        const double r = observed[i] - expected[i];
        stat += r * r / expected[i];
    }
    const boost::math::chi_squared dist(dof);
    return {stat, boost::math::cdf(boost::math::complement(dist, stat)), dof};
}

TestResult anderson_darling_normal(std::vector<double> samples)
{
    require(samples.size() >= 8, "anderson_darling_normal: need at least 8 samples");
    std::sort(samples.begin(), samples.end());
    const auto st = summarize(samples);
    const double sd = std::sqrt(st.variance);
    require(sd > 0.0, "anderson_darling_normal: degenerate sample");
    const std::size_t n = samples.size();
    const double nd = static_cast<double>(n);

    // floored so far outliers give a large finite statistic
    static constexpr double kTiny = std::numeric_limits<double>::min();
    auto log_cdf = [](double z) { return std::log(std::max(0.5 * std::erfc(-z / std::numbers::sqrt2), kTiny)); };
    auto log_sf = [](double z) { return std::log(std::max(0.5 * std::erfc(z / std::numbers::sqrt2), kTiny)); };
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double zi = (samples[i] - st.mean) / sd;
        const double zr = (samples[n - 1 - i] - st.mean) / sd;
        s += (2.0 * i + 1.0) * (log_cdf(zi) + log_sf(zr));
    }
    const double a2 = -nd - s / nd;
    const double a = a2 * (1.0 + 0.75 / nd + 2.25 / (nd * nd));
    double p;
    if (a >= 0.6)
        p = std::exp(1.2937 - 5.709 * std::min(a, 150.0) + 0.0186 * std::min(a, 150.0) * std::min(a, 150.0));
    else if (a >= 0.34)
        p = std::exp(0.9177 - 4.279 * a - 1.38 * a * a);
    else if (a >= 0.2)
        p = 1.0 - std::exp(-8.318 + 42.796 * a - 59.938 * a * a);
    else
        p = 1.0 - std::exp(-13.436 + 101.14 * a - 223.73 * a * a);
    return {a, std::clamp(p, 0.0, 1.0), 0};
}

}  // namespace loopspace
