#pragma once

#include "barflex/framework.hpp"

#include <memory>
#include <stdexcept>
#include <string>

namespace barflex {

/// Smooth equality-constrained problem: energy E(x) with c(x) = 0.
/// The saddle search, multiplier/projector machinery, and Newton projection
/// are written against this interface so synthetic test problems share the
/// exact code path with bar frameworks.
class ConstrainedProblem {
public:
    virtual ~ConstrainedProblem() = default;

    virtual int ambient_dim() const = 0;
    virtual int n_constraints() const = 0;

    virtual Vector constraint_values(const Vector& x) const = 0;
    virtual Matrix constraint_jacobian(const Vector& x) const = 0;
    /// Sum_i eta_i * Hessian(c_i) at x.
    virtual Matrix weighted_constraint_hessian(const Vector& x, const Vector& eta) const = 0;

    virtual double energy(const Vector& x) const = 0;
    virtual Vector energy_gradient(const Vector& x) const = 0;
    virtual Matrix energy_hessian(const Vector& x) const = 0;
};

/// The stacked constraint set of a pinned framework: squared-length
/// residuals of every edge except the free one (in edge order), then the
/// affine pin constraints. `include_free_edge` adds the free edge's
/// residual as the first row, which is the full level set used when
/// tracing nonlinear flexes.
class ConstraintSet final : public ConstrainedProblem {
public:
    explicit ConstraintSet(Framework fw, bool include_free_edge = false);

    int ambient_dim() const override { return fw_.dof(); }
    int n_constraints() const override;

    Vector constraint_values(const Vector& x) const override;
    Matrix constraint_jacobian(const Vector& x) const override;
    Matrix weighted_constraint_hessian(const Vector& x, const Vector& eta) const override;

    double energy(const Vector& x) const override;
    Vector energy_gradient(const Vector& x) const override;
    Matrix energy_hessian(const Vector& x) const override;

    const Framework& framework() const { return fw_; }
    /// Edge index of constraint row r, or -1 for a pin row.
    int row_edge(int r) const;
    int n_edge_rows() const { return static_cast<int>(row_edges_.size()); }

private:
    Framework fw_;
    std::vector<int> row_edges_;  // constraint row -> edge index
};

/// Thrown where a computation requires LICQ and the constraint Jacobian is
/// numerically rank-deficient; carries the singular-value margin.
class LicqError : public std::runtime_error {
public:
    LicqError(double margin, double largest)
        : std::runtime_error("LICQ failure: smallest constraint-Jacobian singular value " +
                             std::to_string(margin) + " (largest " + std::to_string(largest) + ")"),
          margin_(margin),
          largest_(largest) {}

    double margin() const { return margin_; }
    double largest() const { return largest_; }

private:
    double margin_;
    double largest_;
};

/// Orthonormal tangent/normal splitting of R^{nd} at x, from an SVD of the
/// constraint Jacobian. `tangent` spans null(J); `normal` spans the row
/// space; `sigma_min` is the LICQ margin.
struct TangentFrame {
    Vector x;
    Matrix tangent;
    Matrix normal;
    double sigma_min = 0.0;
    double sigma_max = 0.0;

    int tangent_dim() const { return static_cast<int>(tangent.cols()); }
};

TangentFrame tangent_frame(const ConstrainedProblem& problem, const Vector& x);

/// (passes, sigma_min): true iff sigma_min > tol * sigma_max.
std::pair<bool, double> licq_check(const ConstrainedProblem& problem, const Vector& x,
                                   double tol = 1e-8);

/// P = I - J^T (J J^T)^{-1} J, formed from the orthogonal frame rather than
/// an explicit inverse. Throws LicqError when the Jacobian loses rank.
Matrix tangent_projector(const ConstrainedProblem& problem, const Vector& x,
                         double licq_tol = 1e-8);
Matrix tangent_projector(const TangentFrame& frame);

/// Least-squares multipliers: eta minimizing |grad E - J^T eta|. Unique
/// under LICQ; at a critical point this is the KKT multiplier.
Vector lagrange_multipliers(const ConstrainedProblem& problem, const Vector& x,
                            double licq_tol = 1e-8);
Vector lagrange_multipliers_for_gradient(const Matrix& jacobian, const Vector& energy_grad);

/// |grad E - J^T eta| at the least-squares eta (the first-order KKT
/// residual).
double kkt_residual(const ConstrainedProblem& problem, const Vector& x, double licq_tol = 1e-8);

/// Hessian of the Lagrangian E - eta^T c at x with least-squares eta.
Matrix lagrangian_hessian(const ConstrainedProblem& problem, const Vector& x,
                          double licq_tol = 1e-8);

/// P_T (grad^2 E - sum_i eta_i grad^2 c_i) P_T in ambient coordinates.
Matrix projected_hessian(const ConstrainedProblem& problem, const Vector& x,
                         double licq_tol = 1e-8);

/// The projected Hessian restricted to the frame's tangent basis (t x t);
/// its eigenvalues are the nonzero spectrum of the ambient projected
/// Hessian.
Matrix tangent_restricted_hessian(const ConstrainedProblem& problem, const TangentFrame& frame);

struct ProjectionResult {
    bool success = false;
    Vector x;
    double residual_inf = 0.0;
    int iterations = 0;
};

/// Newton projection of x_tilde onto c(x) = 0 along the normal directions
/// of the base point: x = x_tilde + J(x_base)^T alpha, with alpha found by
/// Newton iteration on h(alpha) = c(x_tilde + J(x_base)^T alpha).
/// Non-convergence is reported in the result, never thrown.
ProjectionResult newton_project(const ConstrainedProblem& problem, const Vector& x_tilde,
                                const Vector& x_base, double tol = 1e-12, int max_iter = 25);

}  // namespace barflex
