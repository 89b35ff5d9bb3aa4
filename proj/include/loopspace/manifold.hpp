#pragma once

#include "loopspace/types.hpp"

#include <string>
#include <vector>

namespace loopspace {

enum class ManifoldKind { FlatTorus, UnitSphere2 };

// A model compact Riemannian manifold, embedded in R^l.
//
// The torus uses periodic coordinates in [0, L_i); the sphere is the unit
// sphere in R^3.
class ManifoldModel {
public:
    static ManifoldModel flat_torus(const std::vector<double>& lengths);
    static ManifoldModel unit_sphere2();

    ManifoldKind kind() const noexcept { return kind_; }
    bool is_sphere() const noexcept { return kind_ == ManifoldKind::UnitSphere2; }
    bool is_flat() const noexcept { return kind_ == ManifoldKind::FlatTorus; }

    // intrinsic dimension d
    int dim() const noexcept { return dim_; }
    // ambient dimension l
    int embed_dim() const noexcept { return is_sphere() ? 3 : dim_; }

    // side lengths (torus only)
    const Vector& lengths() const noexcept { return lengths_; }

    double sectional_curvature() const noexcept { return is_sphere() ? 1.0 : 0.0; }

    std::string name() const;

private:
    ManifoldModel(ManifoldKind kind, int dim, Vector lengths)
        : kind_(kind), dim_(dim), lengths_(std::move(lengths)) {}

    ManifoldKind kind_;
    int dim_;
    Vector lengths_;
};

// Base point plus an l x d matrix whose columns are an orthonormal tangent basis.
struct FramePoint {
    Vector base;
    Matrix frame;
};

// Canonical representative of a point (wrap into [0, L) or renormalize).
Vector wrap_point(const ManifoldModel& m, const Vector& p);

// Torus: origin. Sphere: north pole (0, 0, 1).
Vector default_base_point(const ManifoldModel& m);

// Some orthonormal tangent frame at p. At the north pole this is (e1, e2).
FramePoint default_frame(const ManifoldModel& m, const Vector& p);

bool is_tangent(const ManifoldModel& m, const Vector& p, const Vector& v, double tol = 1e-9);

Vector project_tangent(const ManifoldModel& m, const Vector& p, const Vector& v);

// Geodesic endpoint exp_p(v). Throws ContractViolation when v is not tangent at p.
Vector exp_map(const ManifoldModel& m, const Vector& p, const Vector& v);

// Inverse of exp_map on the injectivity domain. On the sphere throws
// StepTooLarge when dist(p, q) >= pi - 1e-6; on the torus returns the
// nearest-image displacement.
Vector log_map(const ManifoldModel& m, const Vector& p, const Vector& q);

double dist(const ManifoldModel& m, const Vector& p, const Vector& q);

// Moves the base along exp(frame * dx) and carries the frame by exact
// geodesic parallel transport, followed by polar re-orthonormalization.
FramePoint parallel_frame_step(const ManifoldModel& m, const FramePoint& r, const Vector& dx);

// Projects the columns onto T_pM and replaces F by F (F^T F)^{-1/2}.
Matrix orthonormalize_frame(const ManifoldModel& m, const Vector& p, const Matrix& frame);

// max(|F^T F - I|_inf, tangency defect of the columns)
double frame_defect(const ManifoldModel& m, const FramePoint& r);

// Riemann tensor R(X, Y)Z in ambient coordinates, with the sign convention
// R(X, Y)Z = K (<X, Z> Y - <Y, Z> X) for constant curvature K.
Vector riemann(const ManifoldModel& m, const Vector& p, const Vector& x, const Vector& y,
               const Vector& z);

// Omega_r(a, b)_{ij} = <r^{-1} R(ra, rb) r e_j, e_i>, a skew d x d matrix.
Matrix curvature_form(const ManifoldModel& m, const FramePoint& r, const Vector& a,
                      const Vector& b);

// Ric_r(a) = sum_i r^{-1} R(r e_i, r a) r e_i as a d x d matrix.
Matrix ricci(const ManifoldModel& m, const FramePoint& r);

// Largest operator norm of ricci over a fixed sample of frames.
double ricci_sup_norm(const ManifoldModel& m);

}  // namespace loopspace
