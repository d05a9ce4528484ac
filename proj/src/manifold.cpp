#include "barflex/manifold.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <utility>

namespace barflex {

ConstraintSet::ConstraintSet(Framework fw, bool include_free_edge) : fw_(std::move(fw)) {
    if (include_free_edge) row_edges_.push_back(fw_.topology.free_edge);
    for (int i = 0; i < fw_.n_edges(); ++i)
        if (i != fw_.topology.free_edge) row_edges_.push_back(i);
}

int ConstraintSet::n_constraints() const {
    return static_cast<int>(row_edges_.size()) + static_cast<int>(fw_.pins.pins.size());
}

int ConstraintSet::row_edge(int r) const {
    return r < n_edge_rows() ? row_edges_[r] : -1;
}

Vector ConstraintSet::constraint_values(const Vector& x) const {
    if (x.size() != fw_.dof()) throw std::invalid_argument("constraint_values: dimension mismatch");
    const Framework at = framework_at(fw_, x);
    Vector c(n_constraints());
    int r = 0;
    for (int e : row_edges_) c[r++] = edge_residual(at, e);
    const int d = fw_.dim();
    for (const Pin& p : fw_.pins.pins) c[r++] = x[p.vertex * d + p.axis] - p.value;
    return c;
}

Matrix ConstraintSet::constraint_jacobian(const Vector& x) const {
    if (x.size() != fw_.dof())
        throw std::invalid_argument("constraint_jacobian: dimension mismatch");
    const Framework at = framework_at(fw_, x);
    Matrix j = Matrix::Zero(n_constraints(), fw_.dof());
    int r = 0;
    for (int e : row_edges_) j.row(r++) = edge_gradient(at, e).transpose();
    const int d = fw_.dim();
    for (const Pin& p : fw_.pins.pins) j(r++, p.vertex * d + p.axis) = 1.0;
    return j;
}

Matrix ConstraintSet::weighted_constraint_hessian(const Vector&, const Vector& eta) const {
    // Edge rows have constant Hessians; pin rows are affine and contribute
    // nothing.
    Matrix h = Matrix::Zero(fw_.dof(), fw_.dof());
    for (int r = 0; r < n_edge_rows(); ++r)
        if (eta[r] != 0.0) h += eta[r] * edge_hessian(fw_.topology, fw_.dim(), row_edges_[r]);
    return h;
}

double ConstraintSet::energy(const Vector& x) const {
    return free_edge_energy(framework_at(fw_, x));
}

Vector ConstraintSet::energy_gradient(const Vector& x) const {
    return free_edge_energy_gradient(framework_at(fw_, x));
}

Matrix ConstraintSet::energy_hessian(const Vector&) const {
    return edge_hessian(fw_.topology, fw_.dim(), fw_.topology.free_edge);
}

TangentFrame tangent_frame(const ConstrainedProblem& problem, const Vector& x) {
    const Matrix j = problem.constraint_jacobian(x);
    Eigen::JacobiSVD<Matrix> svd(j, Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    const int rows = static_cast<int>(j.rows());
    const int nd = static_cast<int>(j.cols());

    TangentFrame frame;
    frame.x = x;
    frame.normal = svd.matrixV().leftCols(rows);
    frame.tangent = svd.matrixV().rightCols(nd - rows);
    frame.sigma_max = sigma.size() > 0 ? sigma[0] : 0.0;
    frame.sigma_min = sigma.size() > 0 ? sigma[sigma.size() - 1] : 0.0;
    return frame;
}

std::pair<bool, double> licq_check(const ConstrainedProblem& problem, const Vector& x,
                                   double tol) {
    const Matrix j = problem.constraint_jacobian(x);
    Eigen::JacobiSVD<Matrix> svd(j);
    const auto& sigma = svd.singularValues();
    if (static_cast<int>(sigma.size()) < j.rows()) return {false, 0.0};
    const double smin = sigma[sigma.size() - 1];
    const double smax = sigma[0];
    return {smin > tol * smax, smin};
}

namespace {

TangentFrame checked_frame(const ConstrainedProblem& problem, const Vector& x, double licq_tol) {
    TangentFrame frame = tangent_frame(problem, x);
    if (frame.sigma_min <= licq_tol * frame.sigma_max)
        throw LicqError(frame.sigma_min, frame.sigma_max);
    return frame;
}

}  // namespace

Matrix tangent_projector(const TangentFrame& frame) {
    const int nd = static_cast<int>(frame.tangent.rows());
    return Matrix::Identity(nd, nd) - frame.normal * frame.normal.transpose();
}

Matrix tangent_projector(const ConstrainedProblem& problem, const Vector& x, double licq_tol) {
    return tangent_projector(checked_frame(problem, x, licq_tol));
}

Vector lagrange_multipliers_for_gradient(const Matrix& jacobian, const Vector& energy_grad) {
    return jacobian.transpose().colPivHouseholderQr().solve(energy_grad);
}

Vector lagrange_multipliers(const ConstrainedProblem& problem, const Vector& x, double licq_tol) {
    checked_frame(problem, x, licq_tol);
    return lagrange_multipliers_for_gradient(problem.constraint_jacobian(x),
                                             problem.energy_gradient(x));
}

double kkt_residual(const ConstrainedProblem& problem, const Vector& x, double licq_tol) {
    const Matrix j = problem.constraint_jacobian(x);
    const Vector g = problem.energy_gradient(x);
    const Vector eta = lagrange_multipliers_for_gradient(j, g);
    (void)licq_tol;
    return (g - j.transpose() * eta).norm();
}

Matrix lagrangian_hessian(const ConstrainedProblem& problem, const Vector& x, double licq_tol) {
    checked_frame(problem, x, licq_tol);
    const Vector eta = lagrange_multipliers_for_gradient(problem.constraint_jacobian(x),
                                                         problem.energy_gradient(x));
    return problem.energy_hessian(x) - problem.weighted_constraint_hessian(x, eta);
}

Matrix projected_hessian(const ConstrainedProblem& problem, const Vector& x, double licq_tol) {
    const TangentFrame frame = checked_frame(problem, x, licq_tol);
    const Matrix p = tangent_projector(frame);
    const Vector eta = lagrange_multipliers_for_gradient(problem.constraint_jacobian(x),
                                                         problem.energy_gradient(x));
    const Matrix h = problem.energy_hessian(x) - problem.weighted_constraint_hessian(x, eta);
    Matrix ph = p * h * p;
    return 0.5 * (ph + ph.transpose());  // scrub round-off asymmetry
}

Matrix tangent_restricted_hessian(const ConstrainedProblem& problem, const TangentFrame& frame) {
    const Vector eta = lagrange_multipliers_for_gradient(problem.constraint_jacobian(frame.x),
                                                         problem.energy_gradient(frame.x));
    const Matrix h = problem.energy_hessian(frame.x) -
                     problem.weighted_constraint_hessian(frame.x, eta);
    Matrix ht = frame.tangent.transpose() * h * frame.tangent;
    return 0.5 * (ht + ht.transpose());
}

ProjectionResult newton_project(const ConstrainedProblem& problem, const Vector& x_tilde,
                                const Vector& x_base, double tol, int max_iter) {
    const Matrix jbase_t = problem.constraint_jacobian(x_base).transpose();
    const int nc = problem.n_constraints();

    Vector alpha = Vector::Zero(nc);
    ProjectionResult result;
    result.x = x_tilde;
    result.residual_inf = problem.constraint_values(x_tilde).lpNorm<Eigen::Infinity>();

    for (int it = 0; it <= max_iter; ++it) {
        const Vector x = x_tilde + jbase_t * alpha;
        const Vector c = problem.constraint_values(x);
        const double res = c.lpNorm<Eigen::Infinity>();
        result.x = x;
        result.residual_inf = res;
        result.iterations = it;
        if (!std::isfinite(res)) return result;
        if (res < tol) {
            result.success = true;
            return result;
        }
        if (it == max_iter) break;

        const Matrix system = problem.constraint_jacobian(x) * jbase_t;
        Eigen::ColPivHouseholderQR<Matrix> qr(system);
        if (qr.rank() < nc) return result;
        alpha -= qr.solve(c);
    }
    return result;
}

}  // namespace barflex
