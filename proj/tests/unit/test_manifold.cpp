#include <doctest.h>

#include "loopspace/manifold.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace loopspace;

namespace {

constexpr double kPi = std::numbers::pi;

Vector vec(std::initializer_list<double> xs)
{
    Vector v(static_cast<int>(xs.size()));
    int i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

Vector random_unit(std::mt19937_64& gen)
{
    std::normal_distribution<double> nd;
    Vector p(3);
    p << nd(gen), nd(gen), nd(gen);
    return p / p.norm();
}

FramePoint random_sphere_frame(std::mt19937_64& gen)
{
    const ManifoldModel s = ManifoldModel::unit_sphere2();
    FramePoint r = default_frame(s, random_unit(gen));
    std::uniform_real_distribution<double> ud(0.0, 2.0 * kPi);
    const double a = ud(gen);
    Matrix rot(2, 2);
    rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    r.frame = r.frame * rot;
    return r;
}

// <R(X, Y)Z, W> from the second fundamental form II(X, Y) = -<X, Y> p of the
// unit sphere, in the sign convention where the round sphere has
// Omega(e1, e2) e1 = e2.
double gauss_curvature_oracle(const Vector& x, const Vector& y, const Vector& z, const Vector& w)
{
    return x.dot(z) * y.dot(w) - y.dot(z) * x.dot(w);
}

}  // namespace

TEST_CASE("model construction and invariants")
{
    const auto s = ManifoldModel::unit_sphere2();
    CHECK(s.dim() == 2);
    CHECK(s.embed_dim() == 3);
    const auto t = ManifoldModel::flat_torus({2 * kPi, 1.0});
    CHECK(t.dim() == 2);
    CHECK(t.embed_dim() == 2);
    CHECK_THROWS_AS(ManifoldModel::flat_torus({1.0, -1.0}), ContractViolation);
    CHECK_THROWS_AS(ManifoldModel::flat_torus({}), ContractViolation);
}

TEST_CASE("exp_map closed forms")
{
    const auto s = ManifoldModel::unit_sphere2();
    const Vector q = exp_map(s, vec({0, 0, 1}), vec({kPi / 2, 0, 0}));
    CHECK((q - vec({1, 0, 0})).norm() < 1e-15);

    const Vector p = vec({0.6, 0, 0.8});
    CHECK((exp_map(s, p, Vector::Zero(3)) - p).norm() == 0.0);

    const auto c = ManifoldModel::flat_torus({2 * kPi});
    CHECK(exp_map(c, vec({0.5}), vec({2 * kPi}))(0) == doctest::Approx(0.5).epsilon(1e-14));

    CHECK_THROWS_AS(exp_map(s, vec({0, 0, 1}), vec({0.1, 0, 0.2})), ContractViolation);
}

TEST_CASE("log_map inverts exp_map and guards the cut locus")
{
    std::mt19937_64 gen(3);
    const auto s = ManifoldModel::unit_sphere2();
    for (int i = 0; i < 100; ++i) {
        const FramePoint r = random_sphere_frame(gen);
        std::normal_distribution<double> nd;
        const Vector v = r.frame * vec({nd(gen), nd(gen)}) * 0.7;
        const Vector q = exp_map(s, r.base, v);
        CHECK((log_map(s, r.base, q) - v).norm() < 1e-12);
    }
    CHECK_THROWS_AS(log_map(s, vec({0, 0, 1}), vec({0, 0, -1})), StepTooLarge);

    const auto c = ManifoldModel::flat_torus({2 * kPi});
    CHECK(log_map(c, vec({0.1}), vec({6.2}))(0) == doctest::Approx((6.2 - 2 * kPi) - 0.1).epsilon(1e-14));
}

TEST_CASE("dist closed forms and triangle inequality")
{
    const auto s = ManifoldModel::unit_sphere2();
    const Vector p = vec({0, 0, 1});
    CHECK(dist(s, p, p) == 0.0);
    CHECK(dist(s, p, vec({1, 0, 0})) == doctest::Approx(kPi / 2).epsilon(1e-15));

    const auto c = ManifoldModel::flat_torus({2 * kPi});
    CHECK(dist(c, vec({0.1}), vec({6.2})) == doctest::Approx(2 * kPi - 6.1).epsilon(1e-13));
    CHECK(dist(c, vec({0.1}), vec({6.2})) == doctest::Approx(0.1832).epsilon(1e-4));

    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> ud(0.0, 5.0);
    const auto t2 = ManifoldModel::flat_torus({5.0, 3.0});
    for (int i = 0; i < 1000; ++i) {
        const Vector a = random_unit(gen), b = random_unit(gen), cc = random_unit(gen);
        CHECK(dist(s, a, cc) <= dist(s, a, b) + dist(s, b, cc) + 1e-12);
        const Vector x = vec({ud(gen), ud(gen) * 0.6}), y = vec({ud(gen), ud(gen) * 0.6}),
                     z = vec({ud(gen), ud(gen) * 0.6});
        CHECK(dist(t2, x, z) <= dist(t2, x, y) + dist(t2, y, z) + 1e-12);
    }
}

TEST_CASE("parallel_frame_step")
{
    SUBCASE("torus translates and keeps the frame")
    {
        const auto t = ManifoldModel::flat_torus({2 * kPi, 3.0});
        const FramePoint r{vec({6.0, 1.0}), Matrix::Identity(2, 2)};
        const FramePoint out = parallel_frame_step(t, r, vec({0.5, 2.5}));
        CHECK(out.base(0) == doctest::Approx(6.5 - 2 * kPi).epsilon(1e-14));
        CHECK(out.base(1) == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(out.frame == r.frame);
    }
    SUBCASE("sphere quarter great circle is the rotation about e2")
    {
        const auto s = ManifoldModel::unit_sphere2();
        const FramePoint r = default_frame(s, vec({0, 0, 1}));
        const FramePoint out = parallel_frame_step(s, r, vec({kPi / 2, 0}));
        Matrix rot(3, 3);  // rotation by pi/2 about e2: e3 -> e1, e1 -> -e3
        rot << 0, 0, 1, 0, 1, 0, -1, 0, 0;
        CHECK((out.base - rot * r.base).norm() < 1e-15);
        CHECK((out.frame - rot * r.frame).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("zero step leaves the frame unchanged")
    {
        const auto s = ManifoldModel::unit_sphere2();
        const FramePoint r = default_frame(s, vec({0.6, 0, 0.8}));
        const FramePoint out = parallel_frame_step(s, r, Vector::Zero(2));
        CHECK(out.base == r.base);
        CHECK(out.frame == r.frame);
    }
    SUBCASE("frames stay orthonormal")
    {
        const auto s = ManifoldModel::unit_sphere2();
        std::mt19937_64 gen(5);
        std::normal_distribution<double> nd;
        FramePoint r = default_frame(s, vec({0, 0, 1}));
        double worst = 0.0;
        for (int k = 0; k < 10000; ++k) {
            r = parallel_frame_step(s, r, vec({nd(gen), nd(gen)}) * 0.05);
            worst = std::max(worst, frame_defect(s, r));
        }
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("curvature_form")
{
    const auto s = ManifoldModel::unit_sphere2();
    const auto t = ManifoldModel::flat_torus({1.0, 2.0});
    const FramePoint north = default_frame(s, vec({0, 0, 1}));

    CHECK(curvature_form(t, default_frame(t, vec({0.2, 0.3})), vec({1, 2}), vec({-3, 1})).isZero(0.0));

    Matrix expected(2, 2);
    expected << 0, -1, 1, 0;
    CHECK((curvature_form(s, north, vec({1, 0}), vec({0, 1})) - expected).cwiseAbs().maxCoeff() < 1e-15);

    std::mt19937_64 gen(7);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 200; ++i) {
        const FramePoint r = random_sphere_frame(gen);
        const Vector a = vec({nd(gen), nd(gen)}), b = vec({nd(gen), nd(gen)}), c = vec({nd(gen), nd(gen)});
        const Matrix om = curvature_form(s, r, a, b);

        // oracle built entry by entry from the second fundamental form
        Matrix oracle(2, 2);
        for (int ii = 0; ii < 2; ++ii)
            for (int jj = 0; jj < 2; ++jj)
                oracle(ii, jj) = gauss_curvature_oracle(r.frame * a, r.frame * b, r.frame.col(jj), r.frame.col(ii));
        CHECK((om - oracle).cwiseAbs().maxCoeff() < 1e-13);

        CHECK((om + om.transpose()).cwiseAbs().maxCoeff() < 1e-15);
        CHECK(curvature_form(s, r, b, a) == -om);
        CHECK(curvature_form(s, r, a, a).cwiseAbs().maxCoeff() < 1e-15);

        const Vector bianchi = curvature_form(s, r, a, b) * c + curvature_form(s, r, b, c) * a +
                               curvature_form(s, r, c, a) * b;
        CHECK(bianchi.norm() < 1e-10);
    }
}

TEST_CASE("ricci")
{
    const auto s = ManifoldModel::unit_sphere2();
    const auto t = ManifoldModel::flat_torus({1.0, 2.0, 3.0});
    CHECK(ricci(t, default_frame(t, vec({0.1, 0.2, 0.3}))).isZero(0.0));
    CHECK(ricci_sup_norm(t) == 0.0);
    CHECK(ricci_sup_norm(s) == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937_64 gen(9);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 100; ++i) {
        const FramePoint r = random_sphere_frame(gen);
        const Matrix ric = ricci(s, r);
        CHECK((ric - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((ric - ric.transpose()).cwiseAbs().maxCoeff() < 1e-15);

        // equivariance Ric_{rO}(a) = O^T Ric_r(O a)
        const double ang = nd(gen);
        Matrix o(2, 2);
        o << std::cos(ang), std::sin(ang), std::sin(ang), -std::cos(ang);
        const FramePoint ro{r.base, r.frame * o};
        const Vector a = vec({nd(gen), nd(gen)});
        CHECK((ricci(s, ro) * a - o.transpose() * (ricci(s, r) * (o * a))).norm() < 1e-13);
    }
}
