#include "barflex/continuation.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace barflex {

namespace {

// Orthonormal right null-space basis, singular values below rank_tol
// relative to the largest.
Matrix null_space(const Matrix& j, double rank_tol) {
    Eigen::JacobiSVD<Matrix> svd(j, Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    const double cutoff = sigma.size() > 0 ? rank_tol * sigma[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < sigma.size(); ++i)
        if (sigma[i] > cutoff) ++rank;
    return svd.matrixV().rightCols(j.cols() - rank);
}

// Orthonormal basis of the hyperplane orthogonal to t.
Matrix orthogonal_complement(const Vector& t) {
    Eigen::JacobiSVD<Matrix> svd(t.transpose(), Eigen::ComputeFullV);
    return svd.matrixV().rightCols(t.size() - 1);
}

void snap_pins(const Framework& fw, Vector& x) {
    for (const Pin& p : fw.pins.pins) x[p.vertex * fw.dim() + p.axis] = p.value;
}

double max_edge_residual(const ConstraintSet& cs, const Vector& x) {
    const Vector c = cs.constraint_values(x);
    double worst = 0.0;
    for (int r = 0; r < cs.n_edge_rows(); ++r) worst = std::max(worst, std::abs(c[r]));
    return worst;
}

struct CorrectorResult {
    bool success = false;
    Vector x;
};

// Gauss-Newton on the full residual, restricted to the hyperplane through
// x_pred orthogonal to t. Steps are minimum-norm least-squares solves, the
// well-posed choice while the Jacobian is still nearly rank-deficient close
// to the branch point.
CorrectorResult correct(const ConstraintSet& cs, const Vector& x_pred, const Vector& t,
                        const ContinuationOptions& opt) {
    CorrectorResult result;
    result.x = x_pred;
    const Matrix z = orthogonal_complement(t);
    double best = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= opt.corrector_max_iter; ++it) {
        const Vector c = cs.constraint_values(result.x);
        const double res = c.lpNorm<Eigen::Infinity>();
        if (!std::isfinite(res) || res > 1e3 * best) return result;
        best = std::min(best, res);
        if (res < opt.path_tol) {
            result.success = true;
            return result;
        }
        if (it == opt.corrector_max_iter) break;
        const Matrix jz = cs.constraint_jacobian(result.x) * z;
        const Vector w = jz.completeOrthogonalDecomposition().solve(-c);
        result.x += z * w;
    }
    return result;
}

}  // namespace

FlexPath follow_branch(const Framework& fw, const Vector& direction, int n_steps,
                       const ContinuationOptions& opt) {
    fw.validate();
    if (n_steps < 0) throw std::invalid_argument("follow_branch: n_steps must be non-negative");
    if (direction.size() != fw.dof())
        throw std::invalid_argument("follow_branch: direction dimension mismatch");
    if (!(opt.arc_step > 0.0))
        throw std::invalid_argument("follow_branch: arc_step must be positive");

    // Freeze every edge, the free one included, at its current length.
    Framework frozen = fw;
    frozen.rest_lengths[fw.topology.free_edge] = fw.measured_length(fw.topology.free_edge);
    const ConstraintSet cs(frozen, true);

    FlexPath path;
    path.arc_step = opt.arc_step;
    path.direction_sign = opt.direction_sign >= 0 ? 1 : -1;
    path.steps.push_back(fw.config.coords);
    path.residuals.push_back(max_edge_residual(cs, fw.config.coords));
    if (n_steps == 0) return path;

    Vector x = fw.config.coords;
    const Matrix null0 = null_space(cs.constraint_jacobian(x), opt.rank_tol);
    Vector t = null0 * (null0.transpose() * (path.direction_sign * direction));
    if (t.norm() < 1e-8)
        throw std::invalid_argument(
            "follow_branch: direction is not tangent to the level set at the start");
    t /= t.norm();

    for (int step = 1; step <= n_steps; ++step) {
        bool accepted = false;
        Vector x_next;
        double h = opt.arc_step;
        for (int halving = 0; halving <= opt.max_step_halvings; ++halving, h *= 0.5) {
            const Vector x_pred = x + h * t;
            CorrectorResult corr = correct(cs, x_pred, t, opt);
            if (!corr.success) continue;
            if ((corr.x - x_pred).norm() > opt.displacement_factor * h) continue;
            x_next = std::move(corr.x);
            accepted = true;
            break;
        }
        if (!accepted) {
            std::ostringstream msg;
            msg << "corrector failed at step " << step << " after " << opt.max_step_halvings
                << " step halvings";
            path.failure_reason = msg.str();
            path.truncated = true;
            break;
        }

        snap_pins(frozen, x_next);
        x = std::move(x_next);
        path.steps.push_back(x);
        path.residuals.push_back(max_edge_residual(cs, x));

        const Matrix null_basis = null_space(cs.constraint_jacobian(x), opt.rank_tol);
        if (null_basis.cols() == 0) {
            path.failure_reason = "level set has no tangent direction past this step";
            path.truncated = true;
            break;
        }
        Vector t_next = null_basis * (null_basis.transpose() * t);
        if (t_next.norm() < 1e-8) {
            path.failure_reason = "tangent continuity lost";
            path.truncated = true;
            break;
        }
        t = t_next / t_next.norm();
    }
    return path;
}

std::vector<std::pair<double, double>> reparameterize_free_edge(const Framework& fw,
                                                                const FlexPath& path) {
    if (path.steps.empty())
        throw std::invalid_argument("reparameterize_free_edge: path is empty");
    const auto [a, b] = fw.topology.edges[fw.topology.free_edge];
    const int d = fw.dim();
    std::vector<std::pair<double, double>> out;
    out.reserve(path.steps.size());
    double arc = 0.0;
    for (std::size_t i = 0; i < path.steps.size(); ++i) {
        if (i > 0) arc += (path.steps[i] - path.steps[i - 1]).norm();
        const double len =
            (path.steps[i].segment(a * d, d) - path.steps[i].segment(b * d, d)).norm();
        out.emplace_back(arc, len);
    }
    return out;
}

}  // namespace barflex
