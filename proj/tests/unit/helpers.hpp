#pragma once

#include "loopspace/manifold.hpp"
#include "loopspace/transport.hpp"

#include <initializer_list>
#include <numbers>
#include <random>

namespace testing_helpers {

using namespace loopspace;

constexpr double kPi = std::numbers::pi;

inline Vector vec(std::initializer_list<double> xs)
{
    Vector v(static_cast<int>(xs.size()));
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

inline Vector random_unit(std::mt19937_64& gen)
{
    std::normal_distribution<double> nd;
    Vector p(3);
    p << nd(gen), nd(gen), nd(gen);
    return p / p.norm();
}

// Standard Wiener path on the grid.
inline EuclideanPath wiener_path(std::mt19937_64& gen, const TimeGrid& g, int d)
{
    std::normal_distribution<double> nd;
    EuclideanPath x = EuclideanPath::zero(g, d);
    const double sd = std::sqrt(g.dt());
    for (int k = 0; k < g.steps(); ++k)
        for (int i = 0; i < d; ++i) x.values(i, k + 1) = x.values(i, k) + sd * nd(gen);
    return x;
}

// Every `stride`-th column of a d x (N+1) array.
inline Eigen::MatrixXd every(const Eigen::MatrixXd& a, int stride)
{
    const int n = static_cast<int>(a.cols() - 1) / stride;
    Eigen::MatrixXd out(a.rows(), n + 1);
    for (int k = 0; k <= n; ++k) out.col(k) = a.col(k * stride);
    return out;
}

}  // namespace testing_helpers
