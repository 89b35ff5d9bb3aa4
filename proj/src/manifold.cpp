#include "loopspace/manifold.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace loopspace {

namespace {

constexpr double kCutGuard = 1e-6;

double wrap_coord(double x, double L)
{
    double r = x - L * std::floor(x / L);
    if (r >= L) r -= L;
    if (r < 0.0) r = 0.0;
    return r;
}

void check_point_dim(const ManifoldModel& m, const Vector& p)
{
    require(p.size() == m.embed_dim(), "point has wrong ambient dimension");
}

// (A)^{-1/2} for a small SPD matrix.
Matrix inverse_sqrt_spd(const Matrix& a)
{
    const auto n = a.rows();
    if (n == 1) {
        Matrix out(1, 1);
        out(0, 0) = 1.0 / std::sqrt(a(0, 0));
        return out;
    }
    if (n == 2) {
        // sqrt(A) = (A + sqrt(det) I) / sqrt(tr + 2 sqrt(det))
        const double s = std::sqrt(a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0));
        const double t = std::sqrt(a(0, 0) + a(1, 1) + 2.0 * s);
        Matrix root = a;
        root(0, 0) += s;
        root(1, 1) += s;
        root /= t;
        const double det = root(0, 0) * root(1, 1) - root(0, 1) * root(1, 0);
        Matrix inv(2, 2);
        inv << root(1, 1), -root(0, 1), -root(1, 0), root(0, 0);
        return inv / det;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    return es.operatorInverseSqrt();
}

}  // namespace

ManifoldModel ManifoldModel::flat_torus(const std::vector<double>& lengths)
{
    const int d = static_cast<int>(lengths.size());
    require(d >= 1 && d <= kMaxDim, "torus dimension must be in [1, 3]");
    Vector L(d);
    for (int i = 0; i < d; ++i) {
        require(std::isfinite(lengths[i]) && lengths[i] > 0.0, "torus side lengths must be positive");
        L(i) = lengths[i];
    }
    return ManifoldModel(ManifoldKind::FlatTorus, d, L);
}

ManifoldModel ManifoldModel::unit_sphere2()
{
    return ManifoldModel(ManifoldKind::UnitSphere2, 2, Vector());
}

std::string ManifoldModel::name() const
{
    if (is_sphere()) return "sphere2";
    std::ostringstream os;
    os << "torus" << dim_;
    return os.str();
}

Vector wrap_point(const ManifoldModel& m, const Vector& p)
{
    check_point_dim(m, p);
    if (m.is_sphere()) return p / p.norm();
    Vector out(p.size());
    for (int i = 0; i < p.size(); ++i) out(i) = wrap_coord(p(i), m.lengths()(i));
    return out;
}

Vector default_base_point(const ManifoldModel& m)
{
    if (m.is_sphere()) return Vector::Unit(3, 2);
    return Vector::Zero(m.dim());
}

FramePoint default_frame(const ManifoldModel& m, const Vector& p)
{
    check_point_dim(m, p);
    if (!m.is_sphere()) return {wrap_point(m, p), Matrix::Identity(m.dim(), m.dim())};

    const Vector q = p / p.norm();
    // Gram-Schmidt of e1, e2 (or e3 when q is close to one of them) against q.
    Matrix f(3, 2);
    int col = 0;
    for (int i = 0; i < 3 && col < 2; ++i) {
        Vector e = Vector::Unit(3, i);
        e -= q.dot(e) * q;
        for (int j = 0; j < col; ++j) e -= f.col(j).dot(e) * f.col(j);
        const double n = e.norm();
        if (n < 0.3) continue;
        f.col(col++) = e / n;
    }
    return {q, f};
}

bool is_tangent(const ManifoldModel& m, const Vector& p, const Vector& v, double tol)
{
    if (v.size() != m.embed_dim()) return false;
    if (!m.is_sphere()) return v.allFinite();
    return std::abs(v.dot(p)) <= tol * (1.0 + v.norm());
}

Vector project_tangent(const ManifoldModel& m, const Vector& p, const Vector& v)
{
    if (!m.is_sphere()) return v;
    return v - p.dot(v) * p;
}

Vector exp_map(const ManifoldModel& m, const Vector& p, const Vector& v)
{
    check_point_dim(m, p);
    if (!is_tangent(m, p, v)) throw ContractViolation("exp_map: vector is not tangent at the base point");
    if (!m.is_sphere()) return wrap_point(m, p + v);

    const double theta = v.norm();
    if (theta == 0.0) return p;
    Vector q = std::cos(theta) * p + (std::sin(theta) / theta) * v;
    return q / q.norm();
}

Vector log_map(const ManifoldModel& m, const Vector& p, const Vector& q)
{
    check_point_dim(m, p);
    check_point_dim(m, q);
    if (!m.is_sphere()) {
        Vector out(p.size());
        for (int i = 0; i < p.size(); ++i) out(i) = std::remainder(q(i) - p(i), m.lengths()(i));
        return out;
    }
    const double c = p.dot(q);
    Vector w = q - c * p;
    const double s = w.norm();
    const double theta = std::atan2(s, c);
    if (theta >= std::numbers::pi - kCutGuard)
        throw StepTooLarge("log_map: points are at or beyond the injectivity guard");
    if (s == 0.0) return Vector::Zero(3);
    return (theta / s) * w;
}

double dist(const ManifoldModel& m, const Vector& p, const Vector& q)
{
    check_point_dim(m, p);
    check_point_dim(m, q);
    if (m.is_sphere()) {
        const Vector a = p / p.norm();
        const Vector b = q / q.norm();
        const double c = a.dot(b);
        const double s = (b - c * a).norm();
        return std::atan2(s, c);
    }
    double sq = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        const double d = std::remainder(q(i) - p(i), m.lengths()(i));
        sq += d * d;
    }
    return std::sqrt(sq);
}

Matrix orthonormalize_frame(const ManifoldModel& m, const Vector& p, const Matrix& frame)
{
    Matrix f = frame;
    if (m.is_sphere()) f -= p * (p.transpose() * f);
    const Matrix gram = f.transpose() * f;
    return f * inverse_sqrt_spd(gram);
}

FramePoint parallel_frame_step(const ManifoldModel& m, const FramePoint& r, const Vector& dx)
{
    require(dx.size() == m.dim(), "parallel_frame_step: increment has wrong dimension");
    if (!m.is_sphere()) {
        FramePoint out{r.base + r.frame * dx, r.frame};
        out.base = wrap_point(m, out.base);
        return out;
    }

    const Vector v = r.frame * dx;
    const double theta = v.norm();
    if (theta == 0.0) return r;

    const Vector& p = r.base;
    const Vector u = v / theta;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Vector q = c * p + s * u;
    q /= q.norm();
    // Along the great circle only the component in the direction of motion
    // rotates (u -> u'); the normal component is parallel.
    const Vector du = (c - 1.0) * u - s * p;
    Matrix f = r.frame + du * (u.transpose() * r.frame);
    return {q, orthonormalize_frame(m, q, f)};
}

double frame_defect(const ManifoldModel& m, const FramePoint& r)
{
    const auto d = m.dim();
    const Matrix gram = r.frame.transpose() * r.frame;
    double defect = (gram - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
    if (m.is_sphere()) {
        defect = std::max(defect, (r.base.transpose() * r.frame).cwiseAbs().maxCoeff());
        defect = std::max(defect, std::abs(r.base.norm() - 1.0));
    }
    return defect;
}

Vector riemann(const ManifoldModel& m, const Vector& /*p*/, const Vector& x, const Vector& y,
               const Vector& z)
{
    const double k = m.sectional_curvature();
    if (k == 0.0) return Vector::Zero(x.size());
    return k * (x.dot(z) * y - y.dot(z) * x);
}

Matrix curvature_form(const ManifoldModel& m, const FramePoint& r, const Vector& a, const Vector& b)
{
    const int d = m.dim();
    require(a.size() == d && b.size() == d, "curvature_form: wrong argument dimension");
    if (m.is_flat()) return Matrix::Zero(d, d);
    const Vector x = r.frame * a;
    const Vector y = r.frame * b;
    Matrix out(d, d);
    for (int j = 0; j < d; ++j) {
        const Vector rz = riemann(m, r.base, x, y, r.frame.col(j));
        out.col(j) = r.frame.transpose() * rz;
    }
    // exact skew part; removes rounding in the symmetric part
    return 0.5 * (out - out.transpose());
}

Matrix ricci(const ManifoldModel& m, const FramePoint& r)
{
    const int d = m.dim();
    if (m.is_flat()) return Matrix::Zero(d, d);
    Matrix out = Matrix::Zero(d, d);
    for (int col = 0; col < d; ++col) {
        const Vector a = Vector::Unit(d, col);
        for (int i = 0; i < d; ++i) {
            const Vector ei = Vector::Unit(d, i);
            out.col(col) += curvature_form(m, r, ei, a) * ei;
        }
    }
    return out;
}

double ricci_sup_norm(const ManifoldModel& m)
{
    if (m.is_flat()) return 0.0;
    std::mt19937_64 gen(0x5eedULL);
    std::normal_distribution<double> nd;
    double best = 0.0;
    for (int k = 0; k < 64; ++k) {
        Vector p(3);
        p << nd(gen), nd(gen), nd(gen);
        const FramePoint r = default_frame(m, p / p.norm());
        const Matrix ric = ricci(m, r);
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (ric + ric.transpose()));
        best = std::max(best, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    return best;
}

}  // namespace loopspace
