#include "loopspace/bridge.hpp"

#include <cmath>

namespace loopspace {

BridgeConfig BridgeConfig::make(const ManifoldModel& model, int n_steps, double eps_splice, std::uint64_t seed)
{
    const Vector m0 = default_base_point(model);
    return BridgeConfig{model, TimeGrid(n_steps), eps_splice, seed, m0, default_frame(model, m0)};
}

void BridgeConfig::validate() const
{
    require(eps_splice > 0.0 && eps_splice <= 0.01, "bridge: eps_splice must lie in (0, 0.01]");
    require(eps_splice * grid.steps() >= 4.0 - 1e-9, "bridge: grid does not resolve eps_splice (need eps >= 4/N)");
    require(m0.size() == model.embed_dim(), "bridge: m0 has wrong dimension");
    require(r0.base.size() == model.embed_dim() && r0.frame.rows() == model.embed_dim() &&
                r0.frame.cols() == model.dim(),
            "bridge: r0 has wrong shape");
    require((r0.base - m0).norm() < 1e-12, "bridge: r0 is not based at m0");
    require(frame_defect(model, r0) < 1e-10, "bridge: r0 is not orthonormal");
    require(1.0 - eps_splice >= kernel.t_min, "bridge: splice cutoff below heat kernel t_min");
    require(max_attempts >= 1, "bridge: max_attempts must be positive");
}

int BridgeConfig::splice_steps() const
{
    return std::max(1, static_cast<int>(std::lround(eps_splice * grid.steps())));
}

BridgeSampler::BridgeSampler(BridgeConfig cfg) : cfg_(std::move(cfg)), kernel_(cfg_.model, cfg_.kernel)
{
    cfg_.validate();
}

bool BridgeSampler::try_sample(RngStream& rng, LoopSample& out) const
{
    const ManifoldModel& m = cfg_.model;
    const int n = cfg_.grid.steps();
    const int d = m.dim();
    const int n_splice = cfg_.splice_steps();
    const int k_splice = n - n_splice;
    const double ds = cfg_.grid.dt();
    const double sqrt_ds = std::sqrt(ds);

    out.path = {cfg_.grid, Eigen::MatrixXd(m.embed_dim(), n + 1)};
    out.frames = {cfg_.grid, {}};
    out.frames.frames.reserve(n + 1);
    out.x = EuclideanPath::zero(cfg_.grid, d);

    FramePoint r = cfg_.r0;
    out.path.points.col(0) = r.base;
    out.frames.frames.push_back(r);
    Vector db(d);
    for (int k = 0; k < n; ++k) {
        if (k < k_splice) {
            const double remaining = 1.0 - cfg_.grid.time(k);
            Vector grad;
            try {
                grad = kernel_.grad_log_heat_kernel(remaining, r.base, cfg_.m0);
            } catch (const PrecisionLoss&) {
                return false;
            }
            if (!grad.allFinite()) return false;
            const Vector drift = r.frame.transpose() * grad;
            // Noise scaled by sqrt(1 - ds/(1-s)): the one-step conditional
            // variance of a bridge; makes the flat case an exact bridge.
            const double scale = std::sqrt(1.0 - ds / remaining);
            for (int i = 0; i < d; ++i) db(i) = scale * sqrt_ds * rng.normal() + drift(i) * ds;
        } else if (k == k_splice) {
            Vector v;
            try {
                v = log_map(m, r.base, cfg_.m0);
            } catch (const StepTooLarge&) {
                return false;
            }
            db = r.frame.transpose() * v / static_cast<double>(n_splice);
        }
        r = parallel_frame_step(m, r, db);
        if (k == n - 1) {
            r.base = cfg_.m0;
            r.frame = orthonormalize_frame(m, r.base, r.frame);
        }
        out.x.values.col(k + 1) = out.x.values.col(k) + db;
        out.path.points.col(k + 1) = r.base;
        out.frames.frames.push_back(r);
    }
    return true;
}

LoopSample BridgeSampler::sample(RngStream& rng) const
{
    LoopSample out;
    for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
        if (try_sample(rng, out)) {
            out.rejections = attempt;
            return out;
        }
    }
    throw ResampleError("bridge: no valid sample within the attempt budget");
}

LoopSample BridgeSampler::sample_wiener(RngStream& rng) const
{
    const int n = cfg_.grid.steps();
    const int d = cfg_.model.dim();
    const double sqrt_ds = std::sqrt(cfg_.grid.dt());
    LoopSample out;
    out.x = EuclideanPath::zero(cfg_.grid, d);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < d; ++i) out.x.values(i, k + 1) = out.x.values(i, k) + sqrt_ds * rng.normal();
    Development dev = develop(cfg_.model, out.x, cfg_.r0);
    out.path = std::move(dev.path);
    out.frames = std::move(dev.frames);
    return out;
}

double BridgeSampler::marginal_density(double s, const Vector& y) const
{
    const double t_min = cfg_.kernel.t_min;
    if (!(s >= t_min && s <= 1.0 - t_min)) throw DomainError("bridge_marginal_density: s outside [t_min, 1 - t_min]");
    return kernel_.heat_kernel(s, cfg_.m0, y) * kernel_.heat_kernel(1.0 - s, y, cfg_.m0) /
           kernel_.heat_kernel(1.0, cfg_.m0, cfg_.m0);
}

LoopSample sample_bridge(const BridgeConfig& cfg, RngStream& rng)
{
    return BridgeSampler(cfg).sample(rng);
}

LoopSample sample_wiener(const BridgeConfig& cfg, RngStream& rng)
{
    return BridgeSampler(cfg).sample_wiener(rng);
}

double bridge_marginal_density(const BridgeConfig& cfg, double s, const Vector& y)
{
    return BridgeSampler(cfg).marginal_density(s, y);
}

}  // namespace loopspace
