#pragma once

#include "loopspace/transport.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace loopspace {

// Closed-form description of a Cameron-Martin direction as a sum of terms
// coeff * phi(s) * e_component.
//
// Fourier:    phi'(s) = sqrt(2) cos(k pi s)   (k = mode >= 1, all in H0)
// Polynomial: phi'(s) = s^k                  (k = mode >= 0)
struct HFamily {
    enum class Kind { Fourier, Polynomial };
    struct Term {
        int component = 0;
        int mode = 1;
        double coeff = 1.0;
    };

    Kind kind = Kind::Fourier;
    std::vector<Term> terms{Term{}};

    static HFamily fourier(int mode, int component = 0, double coeff = 1.0);

    Vector hdot(double s, int d) const;
    Vector h(double s, int d) const;
    // int_s^1 |hdot|^2 by Gauss-Kronrod quadrature
    double energy_after(double s, int d) const;
};

// Grid-sampled Cameron-Martin vector: hdot on step midpoints, h its
// cumulative integral with h(0) = 0.
struct CameronMartinVector {
    TimeGrid grid;
    Eigen::MatrixXd hdot;  // d x N
    Eigen::MatrixXd h;     // d x (N+1)
    bool in_H0 = false;

    static CameronMartinVector from_hdot(const TimeGrid& g, const Eigen::MatrixXd& hdot);
    static CameronMartinVector from_family(const TimeGrid& g, int d, const HFamily& fam);
    static CameronMartinVector zero(const TimeGrid& g, int d);

    int dim() const noexcept { return static_cast<int>(hdot.rows()); }
    Vector at(int k) const { return h.col(k); }
    Vector rate(int k) const { return hdot.col(k); }
};

// a h1 + b h2 on a common grid
CameronMartinVector combine(double a, const CameronMartinVector& h1, double b, const CameronMartinVector& h2);
CameronMartinVector scaled(double c, const CameronMartinVector& h);

double cm_norm(const CameronMartinVector& h);
double cm_inner(const CameronMartinVector& h, const CameronMartinVector& k);

// sum_{t_k < s} <hdot_k + 1/2 Ric_k h_k, dx_k>
double divergence_trunc(const ManifoldModel& m, const CameronMartinVector& h, const EuclideanPath& x,
                        const FramePath& frames, double s);
double divergence(const ManifoldModel& m, const CameronMartinVector& h, const EuclideanPath& x,
                  const FramePath& frames);
// delta_{t_k}(h) for k = 0..N
std::vector<double> divergence_profile(const ManifoldModel& m, const CameronMartinVector& h,
                                       const EuclideanPath& x, const FramePath& frames);

// sum |hdot_k + 1/2 Ric_k h_k|^2 dt, the quadratic variation of delta(h)
double time_change_qv(const ManifoldModel& m, const CameronMartinVector& h, const FramePath& frames);
// ((1 + |Ric|_inf / 2) |h|_H)^2
double time_change_bound(const ManifoldModel& m, const CameronMartinVector& h);

// F(gamma) = f(gamma(s_1), ..., gamma(s_k)) with a closed-form gradient.
// Argument times must lie on the grid of the evaluated path; gradients are
// ambient vectors tangent at the corresponding points. A time may repeat
// (products of functionals at the same time).
struct CylindricalFunctional {
    std::vector<double> times;
    std::function<double(const std::vector<Vector>&)> f;
    std::function<std::vector<Vector>(const std::vector<Vector>&)> grad;
    std::string name;
};

double evaluate(const CylindricalFunctional& F, const ManifoldPath& path);
double dh_cylindrical(const ManifoldModel& m, const CylindricalFunctional& F, const CameronMartinVector& h,
                      const ManifoldPath& path, const FramePath& frames);

// Built-in families. Times are snapped to the given grid.
CylindricalFunctional cyl_constant(double c);
// cos(2 pi n y_axis / L_axis + phase) on the torus
CylindricalFunctional cyl_torus_wave(const ManifoldModel& m, const TimeGrid& g, double s, int axis, int n,
                                     double phase);
// <gamma(s), e_axis> on the sphere
CylindricalFunctional cyl_sphere_coordinate(const TimeGrid& g, double s, int axis);
// <gamma(s), e_i> <gamma(s), e_j> on the sphere
CylindricalFunctional cyl_sphere_quadratic(const TimeGrid& g, double s, int i, int j);
CylindricalFunctional cyl_product(const CylindricalFunctional& a, const CylindricalFunctional& b);

// d/de delta(h)(x + e k) = int <hdot + J h, kdot> + sum <(d_k J) h, dx>,
// with d_k J by central differences of re-developed frames.
double malliavin_deriv_div(const ManifoldModel& m, const CameronMartinVector& h, const CameronMartinVector& k,
                           const EuclideanPath& x, const FramePath& frames, double fd_eps = 1e-5);

struct HolderParams {
    int m = 2;
    double alpha = 0.3;
    void validate() const;
};

// (double trapezoid of |x(t)-x(s)|^{2m} / |t-s|^{1+2m alpha}, diagonal excluded)^{1/2m}
double holder_norm(const EuclideanPath& x, const HolderParams& p);

// Restriction of x to a coarser power-of-two grid.
EuclideanPath subsample(const EuclideanPath& x, int n_steps);

struct HolderRateResult {
    double value = 0.0;       // 1/2 inf |w|_H^2 subject to |w|_{2m,alpha} = level
    bool converged = false;
    int iterations = 0;       // for the best start
    std::vector<double> start_values;
};

// Multi-start ascent of |w|_{2m,alpha} on the unit sphere of H (the power
// iteration w <- grad / |grad|_H in the H metric).
HolderRateResult holder_rate_constant(const HolderParams& p, const TimeGrid& g, int d = 1, int n_starts = 16,
                                      std::uint64_t seed = 1, int max_iter = 5000, double tol = 1e-12,
                                      double level = 1.0);

}  // namespace loopspace
