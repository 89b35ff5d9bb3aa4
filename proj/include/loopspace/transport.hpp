#pragma once

#include "loopspace/manifold.hpp"

#include <vector>

namespace loopspace {

// Uniform grid 0 = t_0 < ... < t_N = 1 with N a power of two.
class TimeGrid {
public:
    TimeGrid() = default;
    explicit TimeGrid(int n_steps);

    int steps() const noexcept { return n_; }
    double dt() const noexcept { return 1.0 / n_; }
    double time(int k) const noexcept { return static_cast<double>(k) / n_; }

    // Index of a grid time; throws ContractViolation if s is not on the grid.
    int index_of(double s) const;
    // Index of the closest grid time, clamped to [0, N].
    int nearest_index(double s) const;

    bool operator==(const TimeGrid& o) const noexcept { return n_ == o.n_; }

private:
    int n_ = 1;
};

// R^d valued path, one column per grid time, starting at the origin.
struct EuclideanPath {
    TimeGrid grid;
    Eigen::MatrixXd values;  // d x (N+1)

    static EuclideanPath zero(const TimeGrid& g, int d);

    int dim() const noexcept { return static_cast<int>(values.rows()); }
    Vector at(int k) const { return values.col(k); }
    Vector increment(int k) const { return values.col(k + 1) - values.col(k); }
};

// Path on the manifold, one ambient point per grid time.
struct ManifoldPath {
    TimeGrid grid;
    Eigen::MatrixXd points;  // l x (N+1)

    Vector at(int k) const { return points.col(k); }
};

// Horizontal lift: one orthonormal frame per grid time.
struct FramePath {
    TimeGrid grid;
    std::vector<FramePoint> frames;

    const FramePoint& operator[](int k) const { return frames[k]; }
};

struct Development {
    ManifoldPath path;
    FramePath frames;
};

// Rolls the manifold along x starting from the frame r0, one geodesic step
// per grid increment.
Development develop(const ManifoldModel& m, const EuclideanPath& x, const FramePoint& r0);

// Inverse of develop: increments frame_k^T log_{p_k}(p_{k+1}) summed up.
// Throws StepTooLarge if two consecutive points hit the injectivity guard.
EuclideanPath antidevelop(const ManifoldModel& m, const ManifoldPath& path, const FramePoint& r0);

// Same as antidevelop but also returns the frames carried along the path.
Development antidevelop_with_frames(const ManifoldModel& m, const ManifoldPath& path,
                                    const FramePoint& r0, EuclideanPath& x);

// U_s = frame_s frame_0^T, the l x l isometry T_{m0}M -> T_{gamma(s)}M.
Matrix parallel_transport(const FramePath& fp, int s_index);

// U_s applied to r0 a for a in R^d, i.e. frame_s a.
Vector transport_vector(const FramePath& fp, int s_index, const Vector& a);

}  // namespace loopspace
