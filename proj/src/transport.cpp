#include "loopspace/transport.hpp"

#include <cmath>

namespace loopspace {

TimeGrid::TimeGrid(int n_steps) : n_(n_steps)
{
    require(n_steps >= 1 && (n_steps & (n_steps - 1)) == 0, "TimeGrid: step count must be a power of two");
}

int TimeGrid::index_of(double s) const
{
    const double k = s * n_;
    const double r = std::round(k);
    if (!(std::abs(k - r) <= 1e-9 * n_) || r < 0 || r > n_) throw ContractViolation("time is not on the grid");
    return static_cast<int>(r);
}

int TimeGrid::nearest_index(double s) const
{
    const double r = std::round(s * n_);
    if (r < 0) return 0;
    if (r > n_) return n_;
    return static_cast<int>(r);
}

EuclideanPath EuclideanPath::zero(const TimeGrid& g, int d)
{
    return {g, Eigen::MatrixXd::Zero(d, g.steps() + 1)};
}

Development develop(const ManifoldModel& m, const EuclideanPath& x, const FramePoint& r0)
{
    require(x.dim() == m.dim(), "develop: path dimension differs from the manifold");
    const int n = x.grid.steps();
    Development out{{x.grid, Eigen::MatrixXd(m.embed_dim(), n + 1)}, {x.grid, {}}};
    out.frames.frames.reserve(n + 1);

    if (m.is_flat()) {
        // flat development is translation; computed directly to avoid
        // accumulating rounding in the increments
        for (int k = 0; k <= n; ++k) {
            const Vector p = wrap_point(m, r0.base + r0.frame * x.at(k));
            out.path.points.col(k) = p;
            out.frames.frames.push_back({p, r0.frame});
        }
        return out;
    }

    FramePoint r = r0;
    out.path.points.col(0) = r.base;
    out.frames.frames.push_back(r);
    for (int k = 0; k < n; ++k) {
        r = parallel_frame_step(m, r, x.increment(k));
        out.path.points.col(k + 1) = r.base;
        out.frames.frames.push_back(r);
    }
    return out;
}

Development antidevelop_with_frames(const ManifoldModel& m, const ManifoldPath& path,
                                    const FramePoint& r0, EuclideanPath& x)
{
    require(path.points.rows() == m.embed_dim(), "antidevelop: path has wrong ambient dimension");
    const int n = path.grid.steps();
    const int d = m.dim();
    x = EuclideanPath::zero(path.grid, d);
    Development out{path, {path.grid, {}}};
    out.frames.frames.reserve(n + 1);

    FramePoint r{path.at(0), r0.frame};
    out.frames.frames.push_back(r);
    for (int k = 0; k < n; ++k) {
        const Vector q = path.at(k + 1);
        const Vector v = log_map(m, r.base, q);
        const Vector dx = r.frame.transpose() * v;
        x.values.col(k + 1) = x.values.col(k) + dx;
        if (m.is_sphere()) {
            FramePoint next = parallel_frame_step(m, r, dx);
            r = {q, orthonormalize_frame(m, q, next.frame)};
        } else {
            r.base = q;
        }
        out.frames.frames.push_back(r);
    }
    return out;
}

EuclideanPath antidevelop(const ManifoldModel& m, const ManifoldPath& path, const FramePoint& r0)
{
    EuclideanPath x = EuclideanPath::zero(path.grid, m.dim());
    antidevelop_with_frames(m, path, r0, x);
    return x;
}

Matrix parallel_transport(const FramePath& fp, int s_index)
{
    require(s_index >= 0 && s_index < static_cast<int>(fp.frames.size()), "parallel_transport: index out of range");
    return fp.frames[s_index].frame * fp.frames[0].frame.transpose();
}

Vector transport_vector(const FramePath& fp, int s_index, const Vector& a)
{
    require(s_index >= 0 && s_index < static_cast<int>(fp.frames.size()), "transport_vector: index out of range");
    return fp.frames[s_index].frame * a;
}

}  // namespace loopspace
