#pragma once

#include "loopspace/types.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace loopspace {

std::uint64_t splitmix64(std::uint64_t x);

// Independent random stream; substream(seed, i) is a pure function of
// (seed, i), so sample i is the same whichever worker produces it.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : gen_(splitmix64(seed)) {}
    static RngStream substream(std::uint64_t seed, std::uint64_t index)
    {
        return RngStream(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
    }

    double normal() { return normal_(gen_); }
    double uniform() { return uniform_(gen_); }
    std::uint64_t next() { return gen_(); }
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_;
    std::uniform_real_distribution<double> uniform_;
};

// Runs fn(i, rng_i) for i in [0, n) on `workers` threads and returns the
// results in index order.
template <class T, class F>
std::vector<T> parallel_collect(std::size_t n, std::uint64_t seed, int workers, F&& fn)
{
    std::vector<T> out(n);
    auto run_one = [&](std::size_t i) {
        RngStream rng = RngStream::substream(seed, i);
        out[i] = fn(i, rng);
    };
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) run_one(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t start = next.fetch_add(64);
            if (start >= n) return;
            const std::size_t stop = std::min(n, start + 64);
            try {
                for (std::size_t i = start; i < stop; ++i) run_one(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next = n;
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

// Sum with a fixed pairwise tree, independent of how the values were produced.
double pairwise_sum(std::span<const double> xs);

enum class Stability { Stable, Unstable, InfiniteSuspect };

std::string to_string(Stability s);

struct MCStat {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;
    double ci_half_width = 0.0;  // 99%, 2.576 sqrt(variance / n)
    double top_sample_share = 0.0;
    double tail_index = std::numeric_limits<double>::infinity();
    Stability stability = Stability::Stable;

    double se() const { return n > 0 ? std::sqrt(variance / static_cast<double>(n)) : 0.0; }
    double ci_lo() const { return mean - ci_half_width; }
    double ci_hi() const { return mean + ci_half_width; }
};

inline constexpr double kZ99 = 2.576;

MCStat summarize(std::span<const double> xs);

// Draws n values from sampler(rng) on seed-derived substreams.
MCStat estimate(const std::function<double(RngStream&)>& sampler, std::size_t n, std::uint64_t seed,
                int workers = 1);

double lp_norm(std::span<const double> xs, double p);

struct RateFit {
    std::vector<std::pair<double, double>> points;  // (log x, log y)
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

RateFit fit_rate(std::span<const double> xs, std::span<const double> ys);

struct TailFit {
    double slope = 0.0;  // coefficient of t^2 in log P(|Z| > t)
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t n_tail = 0;
    std::vector<std::pair<double, double>> curve;  // (t^2, log survival)
};

// Regression of log P(|Z| > t) on (t^2, log t, 1) over the quantile window
// (q_lo, q_hi) with a percentile bootstrap CI at 99%.
TailFit tail_exponent(std::span<const double> samples, double q_lo = 0.99, double q_hi = 0.9999,
                      int n_boot = 200, std::uint64_t seed = 1);

// Mean of exp(lambda Z^2) (or exp(lambda |Z|)), computed in log space, with
// stability flags.
MCStat exp_moment(std::span<const double> samples, double lambda, bool square);

struct TestResult {
    double statistic = 0.0;
    double p_value = 0.0;
    int dof = 0;
};

// One-sample Kolmogorov-Smirnov test against a continuous CDF.
TestResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf);

// Pearson chi-square of observed counts against expected counts.
TestResult chi_square_test(std::span<const double> observed, std::span<const double> expected,
                           int fitted_params = 0);

// Anderson-Darling normality test with estimated mean and variance.
TestResult anderson_darling_normal(std::vector<double> samples);

// Kolmogorov distribution tail P(K > x).
double kolmogorov_tail(double x);

}  // namespace loopspace
