#include "loopspace/heat_kernel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace loopspace {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

HeatKernelEvaluator::HeatKernelEvaluator(ManifoldModel model, HeatKernelOptions opts)
    : model_(std::move(model)), opts_(opts)
{
    require(opts_.series_tol > 0.0, "series_tol must be positive");
    require(opts_.max_terms >= 1, "max_terms must be at least 1");
    require(opts_.t_min > 0.0, "t_min must be positive");
}

void HeatKernelEvaluator::check_time(double t) const
{
    if (!(t >= opts_.t_min)) throw DomainError("heat kernel time below t_min");
}

HeatKernelEvaluator::ZonalValue HeatKernelEvaluator::sphere_zonal(double t, double c) const
{
    check_time(t);
    c = std::clamp(c, -1.0, 1.0);

    // term_l = (2l+1)/(4 pi) exp(-l(l+1)t/2) P_l(c); exp factor updated by
    // the ratio exp(-(l+1)t), which itself is a power of exp(-t).
    const double q = std::exp(-t);
    double decay = 1.0;  // exp(-l(l+1)t/2)
    double ratio = q;    // exp(-(l+1)t)
    double p_prev = 1.0, p_cur = c;     // P_{l-1}, P_l at l = 1
    double dp_prev = 0.0, dp_cur = 1.0;  // derivatives

    double value = 1.0 / (4.0 * kPi);
    double dvalue = 0.0;
    double magnitude = value;
    double last_bound = std::numeric_limits<double>::infinity();
    for (int l = 1; l < opts_.max_terms; ++l) {
        decay *= ratio;
        ratio *= q;
        const double w = (2.0 * l + 1.0) / (4.0 * kPi) * decay;
        value += w * p_cur;
        dvalue += w * dp_cur;
        magnitude += w * std::abs(p_cur);

        // next term bound, covering |P_l| <= 1 and |P_l'| <= l(l+1)/2
        const double ln = l + 1.0;
        const double bound = (2.0 * ln + 1.0) / (4.0 * kPi) * decay * ratio * std::max(1.0, 0.5 * ln * (ln + 1.0));
        if (bound < opts_.series_tol && bound < last_bound) break;
        last_bound = bound;

        const double p_next = ((2.0 * l + 1.0) * c * p_cur - l * p_prev) / (l + 1.0);
        const double dp_next = dp_prev + (2.0 * l + 1.0) * p_cur;
        p_prev = p_cur;
        p_cur = p_next;
        dp_prev = dp_cur;
        dp_cur = dp_next;
    }
    return {value, dvalue, 16.0 * std::numeric_limits<double>::epsilon() * magnitude};
}

HeatKernelEvaluator::ZonalValue HeatKernelEvaluator::circle(double t, double delta, double L) const
{
    check_time(t);
    const double d = std::remainder(delta, L);
    const double norm = 1.0 / std::sqrt(2.0 * kPi * t);
    double value = norm * std::exp(-d * d / (2.0 * t));
    double dvalue = -d / t * value;
    for (int k = 1; k < opts_.max_terms; ++k) {
        // pairs are added as a unit so that p_t(x, y) = p_t(y, x) bitwise
        const double ym = d - k * L;
        const double yp = d + k * L;
        const double gm = norm * std::exp(-ym * ym / (2.0 * t));
        const double gp = norm * std::exp(-yp * yp / (2.0 * t));
        value += gm + gp;
        dvalue += -(ym * gm + yp * gp) / t;
        // every image beyond k is at distance >= (k + 1/2) L
        const double r = (k + 0.5) * L;
        const double tail = norm * std::exp(-r * r / (2.0 * t)) * std::max(1.0, (r + L) / t);
        if (tail < opts_.series_tol) break;
    }
    return {value, dvalue};
}

double HeatKernelEvaluator::heat_kernel(double t, const Vector& p, const Vector& q) const
{
    check_time(t);
    require(p.size() == model_.embed_dim() && q.size() == model_.embed_dim(), "heat_kernel: bad point dimension");
    if (model_.is_sphere()) {
        const double c = p.dot(q) / (p.norm() * q.norm());
        return std::max(0.0, sphere_zonal(t, c).value);
    }
    double value = 1.0;
    for (int i = 0; i < p.size(); ++i) value *= circle(t, q(i) - p(i), model_.lengths()(i)).value;
    return value;
}

Vector HeatKernelEvaluator::grad_log_heat_kernel(double t, const Vector& p, const Vector& q) const
{
    check_time(t);
    require(p.size() == model_.embed_dim() && q.size() == model_.embed_dim(), "grad_log_heat_kernel: bad point dimension");
    if (model_.is_sphere()) {
        const double c = std::clamp(p.dot(q), -1.0, 1.0);
        const ZonalValue z = sphere_zonal(t, c);
        if (!(z.value > 1e4 * z.roundoff)) throw PrecisionLoss("grad_log_heat_kernel: kernel below series roundoff");
        return (z.dvalue / z.value) * (q - c * p);
    }
    Vector g(p.size());
    for (int i = 0; i < p.size(); ++i) {
        // d/dp = -d/d(delta) with delta = q - p
        const ZonalValue z = circle(t, q(i) - p(i), model_.lengths()(i));
        if (!(z.value > 0.0)) throw PrecisionLoss("grad_log_heat_kernel: kernel underflows");
        g(i) = -z.dvalue / z.value;
    }
    return g;
}

double HeatKernelEvaluator::normalization_check(double t, const Vector& y) const
{
    check_time(t);
    if (model_.is_sphere()) {
        // the kernel is zonal, so the integral over the sphere reduces to 2 pi
        // times an integral in c = cos(theta)
        auto f = [&](double c) { return sphere_zonal(t, c).value; };
        const double inner = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -1.0, 1.0, 20, 1e-14);
        return 2.0 * kPi * inner;
    }
    constexpr int kPoints = 2048;
    double total = 1.0;
    for (int i = 0; i < y.size(); ++i) {
        const double L = model_.lengths()(i);
        const double h = L / kPoints;
        double s = 0.0;
        for (int j = 0; j < kPoints; ++j) s += circle(t, j * h - y(i), L).value;
        total *= s * h;
    }
    return total;
}

}  // namespace loopspace
