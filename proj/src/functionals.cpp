#include "loopspace/functionals.hpp"

#include "loopspace/mc.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

namespace loopspace {

namespace {

constexpr double kPi = std::numbers::pi;

void check_grids(const TimeGrid& a, const TimeGrid& b)
{
    if (!(a == b)) throw ContractViolation("mismatched time grids");
}

Matrix half_ricci(const ManifoldModel& m, const FramePoint& r)
{
    return 0.5 * ricci(m, r);
}

}  // namespace

HFamily HFamily::fourier(int mode, int component, double coeff)
{
    HFamily fam;
    fam.kind = Kind::Fourier;
    fam.terms = {Term{component, mode, coeff}};
    return fam;
}

Vector HFamily::hdot(double s, int d) const
{
    Vector out = Vector::Zero(d);
    for (const Term& t : terms) {
        require(t.component >= 0 && t.component < d, "HFamily: component out of range");
        if (kind == Kind::Fourier)
            out(t.component) += t.coeff * std::numbers::sqrt2 * std::cos(t.mode * kPi * s);
        else
            out(t.component) += t.coeff * std::pow(s, t.mode);
    }
    return out;
}

Vector HFamily::h(double s, int d) const
{
    Vector out = Vector::Zero(d);
    for (const Term& t : terms) {
        require(t.component >= 0 && t.component < d, "HFamily: component out of range");
        if (kind == Kind::Fourier)
            out(t.component) += t.coeff * std::numbers::sqrt2 * std::sin(t.mode * kPi * s) / (t.mode * kPi);
        else
            out(t.component) += t.coeff * std::pow(s, t.mode + 1) / (t.mode + 1.0);
    }
    return out;
}

double HFamily::energy_after(double s, int d) const
{
    auto f = [&](double u) { return hdot(u, d).squaredNorm(); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, s, 1.0, 20, 1e-14);
}

CameronMartinVector CameronMartinVector::from_hdot(const TimeGrid& g, const Eigen::MatrixXd& hdot)
{
    require(hdot.cols() == g.steps(), "CameronMartinVector: hdot must have N columns");
    CameronMartinVector out{g, hdot, Eigen::MatrixXd::Zero(hdot.rows(), g.steps() + 1), false};
    const double dt = g.dt();
    for (int k = 0; k < g.steps(); ++k) out.h.col(k + 1) = out.h.col(k) + dt * hdot.col(k);
    out.in_H0 = out.h.col(g.steps()).cwiseAbs().maxCoeff() < 1e-12;
    return out;
}

CameronMartinVector CameronMartinVector::from_family(const TimeGrid& g, int d, const HFamily& fam)
{
    Eigen::MatrixXd hdot(d, g.steps());
    for (int k = 0; k < g.steps(); ++k) hdot.col(k) = fam.hdot((k + 0.5) * g.dt(), d);
    return from_hdot(g, hdot);
}

CameronMartinVector CameronMartinVector::zero(const TimeGrid& g, int d)
{
    return from_hdot(g, Eigen::MatrixXd::Zero(d, g.steps()));
}

CameronMartinVector combine(double a, const CameronMartinVector& h1, double b, const CameronMartinVector& h2)
{
    check_grids(h1.grid, h2.grid);
    require(h1.dim() == h2.dim(), "combine: dimension mismatch");
    return CameronMartinVector::from_hdot(h1.grid, a * h1.hdot + b * h2.hdot);
}

CameronMartinVector scaled(double c, const CameronMartinVector& h)
{
    CameronMartinVector out = h;
    out.hdot *= c;
    out.h *= c;
    return out;
}

double cm_norm(const CameronMartinVector& h)
{
    return std::sqrt(h.hdot.squaredNorm() * h.grid.dt());
}

double cm_inner(const CameronMartinVector& h, const CameronMartinVector& k)
{
    check_grids(h.grid, k.grid);
    return (h.hdot.array() * k.hdot.array()).sum() * h.grid.dt();
}

std::vector<double> divergence_profile(const ManifoldModel& m, const CameronMartinVector& h,
                                       const EuclideanPath& x, const FramePath& frames)
{
    check_grids(h.grid, x.grid);
    check_grids(h.grid, frames.grid);
    require(h.dim() == m.dim() && x.dim() == m.dim(), "divergence: dimension mismatch");
    const int n = h.grid.steps();
    std::vector<double> out(n + 1, 0.0);
    for (int k = 0; k < n; ++k) {
        Vector integrand = h.rate(k);
        if (!m.is_flat()) integrand += half_ricci(m, frames[k]) * h.at(k);
        out[k + 1] = out[k] + integrand.dot(x.increment(k));
    }
    return out;
}

double divergence_trunc(const ManifoldModel& m, const CameronMartinVector& h, const EuclideanPath& x,
                        const FramePath& frames, double s)
{
    const int idx = h.grid.index_of(s);
    return divergence_profile(m, h, x, frames)[idx];
}

double divergence(const ManifoldModel& m, const CameronMartinVector& h, const EuclideanPath& x,
                  const FramePath& frames)
{
    return divergence_profile(m, h, x, frames).back();
}

double time_change_qv(const ManifoldModel& m, const CameronMartinVector& h, const FramePath& frames)
{
    check_grids(h.grid, frames.grid);
    double qv = 0.0;
    for (int k = 0; k < h.grid.steps(); ++k) {
        Vector integrand = h.rate(k);
        if (!m.is_flat()) integrand += half_ricci(m, frames[k]) * h.at(k);
        qv += integrand.squaredNorm();
    }
    return qv * h.grid.dt();
}

double time_change_bound(const ManifoldModel& m, const CameronMartinVector& h)
{
    const double c = (1.0 + 0.5 * ricci_sup_norm(m)) * cm_norm(h);
    return c * c;
}

double evaluate(const CylindricalFunctional& F, const ManifoldPath& path)
{
    std::vector<Vector> args;
    args.reserve(F.times.size());
    for (double s : F.times) args.push_back(path.at(path.grid.index_of(s)));
    return F.f(args);
}

double dh_cylindrical(const ManifoldModel& m, const CylindricalFunctional& F, const CameronMartinVector& h,
                      const ManifoldPath& path, const FramePath& frames)
{
    check_grids(h.grid, path.grid);
    check_grids(h.grid, frames.grid);
    require(h.dim() == m.dim(), "dh_cylindrical: dimension mismatch");
    if (F.times.empty()) return 0.0;
    std::vector<Vector> args;
    std::vector<int> idx;
    for (double s : F.times) {
        idx.push_back(path.grid.index_of(s));
        args.push_back(path.at(idx.back()));
    }
    const std::vector<Vector> g = F.grad(args);
    double out = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) out += g[i].dot(transport_vector(frames, idx[i], h.at(idx[i])));
    return out;
}

CylindricalFunctional cyl_constant(double c)
{
    return {{},
            [c](const std::vector<Vector>&) { return c; },
            [](const std::vector<Vector>&) { return std::vector<Vector>{}; },
            "const"};
}

CylindricalFunctional cyl_torus_wave(const ManifoldModel& m, const TimeGrid& g, double s, int axis, int n,
                                     double phase)
{
    require(m.is_flat(), "cyl_torus_wave: torus only");
    require(axis >= 0 && axis < m.dim(), "cyl_torus_wave: axis out of range");
    const double s_grid = g.time(g.nearest_index(s));
    require(s_grid > 0.0 && s_grid < 1.0, "cylindrical time must lie strictly inside (0, 1)");
    const double L = m.lengths()(axis);
    const double w = 2.0 * kPi * n / L;
    const int d = m.dim();
    return {{s_grid},
            [=](const std::vector<Vector>& p) { return std::cos(w * p[0](axis) + phase); },
            [=](const std::vector<Vector>& p) {
                Vector gr = Vector::Zero(d);
                gr(axis) = -w * std::sin(w * p[0](axis) + phase);
                return std::vector<Vector>{gr};
            },
            "wave"};
}

CylindricalFunctional cyl_sphere_coordinate(const TimeGrid& g, double s, int axis)
{
    require(axis >= 0 && axis < 3, "cyl_sphere_coordinate: axis out of range");
    const double s_grid = g.time(g.nearest_index(s));
    require(s_grid > 0.0 && s_grid < 1.0, "cylindrical time must lie strictly inside (0, 1)");
    return {{s_grid},
            [=](const std::vector<Vector>& p) { return p[0](axis); },
            [=](const std::vector<Vector>& p) {
                const Vector e = Vector::Unit(3, axis);
                return std::vector<Vector>{e - p[0](axis) * p[0]};
            },
            "coord"};
}

CylindricalFunctional cyl_sphere_quadratic(const TimeGrid& g, double s, int i, int j)
{
    require(i >= 0 && i < 3 && j >= 0 && j < 3, "cyl_sphere_quadratic: axis out of range");
    const double s_grid = g.time(g.nearest_index(s));
    require(s_grid > 0.0 && s_grid < 1.0, "cylindrical time must lie strictly inside (0, 1)");
    return {{s_grid},
            [=](const std::vector<Vector>& p) { return p[0](i) * p[0](j); },
            [=](const std::vector<Vector>& p) {
                const Vector& x = p[0];
                Vector e = x(j) * Vector::Unit(3, i) + x(i) * Vector::Unit(3, j);
                return std::vector<Vector>{e - x.dot(e) * x};
            },
            "quad"};
}

CylindricalFunctional cyl_product(const CylindricalFunctional& a, const CylindricalFunctional& b)
{
    CylindricalFunctional out;
    out.times = a.times;
    out.times.insert(out.times.end(), b.times.begin(), b.times.end());
    const std::size_t na = a.times.size();
    out.f = [a, b, na](const std::vector<Vector>& p) {
        const std::vector<Vector> pa(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(na));
        const std::vector<Vector> pb(p.begin() + static_cast<std::ptrdiff_t>(na), p.end());
        return a.f(pa) * b.f(pb);
    };
    out.grad = [a, b, na](const std::vector<Vector>& p) {
        const std::vector<Vector> pa(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(na));
        const std::vector<Vector> pb(p.begin() + static_cast<std::ptrdiff_t>(na), p.end());
        const double fa = a.f(pa);
        const double fb = b.f(pb);
        std::vector<Vector> g;
        for (const Vector& v : a.grad(pa)) g.push_back(fb * v);
        for (const Vector& v : b.grad(pb)) g.push_back(fa * v);
        return g;
    };
    out.name = a.name + "*" + b.name;
    return out;
}

double malliavin_deriv_div(const ManifoldModel& m, const CameronMartinVector& h, const CameronMartinVector& k,
                           const EuclideanPath& x, const FramePath& frames, double fd_eps)
{
    check_grids(h.grid, k.grid);
    check_grids(h.grid, x.grid);
    check_grids(h.grid, frames.grid);
    const int n = h.grid.steps();
    const double dt = h.grid.dt();

    double first = 0.0;
    for (int j = 0; j < n; ++j) {
        Vector a = h.rate(j);
        if (!m.is_flat()) a += half_ricci(m, frames[j]) * h.at(j);
        first += a.dot(k.rate(j)) * dt;
    }
    if (m.is_flat()) return first;

    EuclideanPath xp = x, xm = x;
    xp.values += fd_eps * k.h;
    xm.values -= fd_eps * k.h;
    const FramePath fp = develop(m, xp, frames[0]).frames;
    const FramePath fm = develop(m, xm, frames[0]).frames;
    double second = 0.0;
    for (int j = 0; j < n; ++j) {
        const Matrix dj = (half_ricci(m, fp[j]) - half_ricci(m, fm[j])) / (2.0 * fd_eps);
        second += (dj * h.at(j)).dot(x.increment(j));
    }
    return first + second;
}

void HolderParams::validate() const
{
    require(m >= 2, "HolderParams: m must be at least 2");
    require(alpha > 1.0 / (2.0 * m) && alpha < 0.5, "HolderParams: alpha must lie in (1/(2m), 1/2)");
}

namespace {

// Double trapezoid sum of |x_i - x_j|^{2m} K_{|i-j|} over i != j. When grad
// is non-null it receives the gradient with respect to each x_i.
double holder_energy(const Eigen::MatrixXd& v, const HolderParams& p, Eigen::MatrixXd* grad)
{
    const auto n = static_cast<int>(v.cols()) - 1;
    const int d = static_cast<int>(v.rows());
    const double dt = 1.0 / n;
    const double expo = 1.0 + 2.0 * p.m * p.alpha;
    std::vector<double> lag(n + 1, 0.0);
    for (int l = 1; l <= n; ++l) lag[l] = std::pow(l * dt, -expo);
    std::vector<double> w(n + 1, dt);
    w[0] = w[n] = 0.5 * dt;

    if (grad) grad->setZero(d, n + 1);
    double total = 0.0;
    for (int i = 0; i <= n; ++i) {
        for (int j = i + 1; j <= n; ++j) {
            double r2 = 0.0;
            for (int c = 0; c < d; ++c) {
                const double diff = v(c, j) - v(c, i);
                r2 += diff * diff;
            }
            double pw = 1.0;
            for (int e = 1; e < p.m; ++e) pw *= r2;  // r2^{m-1}
            const double c_ij = w[i] * w[j] * lag[j - i];
            total += c_ij * pw * r2;
            if (grad) {
                const double g = 4.0 * p.m * c_ij * pw;
                for (int c = 0; c < d; ++c) {
                    const double diff = v(c, i) - v(c, j);
                    (*grad)(c, i) += g * diff;
                    (*grad)(c, j) -= g * diff;
                }
            }
        }
    }
    return 2.0 * total;
}

}  // namespace

double holder_norm(const EuclideanPath& x, const HolderParams& p)
{
    // the norm itself is defined for any m >= 1, alpha > 0; the strict range
    // of HolderParams::validate only matters for the rate constant
    require(p.m >= 1 && p.alpha > 0.0, "holder_norm: need m >= 1 and alpha > 0");
    const double e = holder_energy(x.values, p, nullptr);
    return std::pow(e, 1.0 / (2.0 * p.m));
}

EuclideanPath subsample(const EuclideanPath& x, int n_steps)
{
    const TimeGrid g(n_steps);
    const int n = x.grid.steps();
    require(n_steps <= n && n % n_steps == 0, "subsample: target grid must divide the path grid");
    const int stride = n / n_steps;
    EuclideanPath out = EuclideanPath::zero(g, x.dim());
    for (int k = 0; k <= n_steps; ++k) out.values.col(k) = x.values.col(k * stride);
    return out;
}

HolderRateResult holder_rate_constant(const HolderParams& p, const TimeGrid& g, int d, int n_starts,
                                      std::uint64_t seed, int max_iter, double tol, double level)
{
    p.validate();
    require(d >= 1 && d <= kMaxDim, "holder_rate_constant: bad dimension");
    require(n_starts >= 1 && level > 0.0, "holder_rate_constant: bad arguments");
    const int n = g.steps();
    const double dt = g.dt();

    auto integrate = [&](const Eigen::MatrixXd& rate) {
        Eigen::MatrixXd v = Eigen::MatrixXd::Zero(d, n + 1);
        for (int k = 0; k < n; ++k) v.col(k + 1) = v.col(k) + dt * rate.col(k);
        return v;
    };
    auto normalize = [&](Eigen::MatrixXd& rate) { rate /= std::sqrt(rate.squaredNorm() * dt); };

    HolderRateResult result;
    double best = -1.0;
    for (int s = 0; s < n_starts; ++s) {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(s));
        Eigen::MatrixXd rate(d, n);
        for (int k = 0; k < n; ++k)
            for (int c = 0; c < d; ++c) rate(c, k) = rng.normal();
        normalize(rate);

        Eigen::MatrixXd grad;
        double f = holder_energy(integrate(rate), p, &grad);
        bool converged = false;
        int it = 0;
        for (; it < max_iter; ++it) {
            // H-metric gradient with respect to the rate: reverse cumulative sum
            Eigen::MatrixXd next(d, n);
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
            for (int k = n - 1; k >= 0; --k) {
                acc += grad.col(k + 1);
                next.col(k) = acc;
            }
            normalize(next);
            rate = next;
            const double f_new = holder_energy(integrate(rate), p, &grad);
            const bool done = std::abs(f_new - f) <= tol * f_new;
            f = f_new;
            if (done) {
                converged = true;
                break;
            }
        }
        result.start_values.push_back(0.5 * level * level / std::pow(f, 1.0 / p.m));
        if (f > best) {
            best = f;
            result.converged = converged;
            result.iterations = it;
        }
    }
    result.value = 0.5 * level * level / std::pow(best, 1.0 / p.m);
    return result;
}

}  // namespace loopspace
