#include "barflex/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>

namespace barflex {

SelfStressBasis self_stresses(const Framework& fw, double rank_tol) {
    const Matrix r = rigidity_matrix(fw);
    Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeFullU);
    const auto& sigma = svd.singularValues();
    const double cutoff = sigma.size() > 0 ? rank_tol * sigma[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < sigma.size(); ++i)
        if (sigma[i] > cutoff) ++rank;
    SelfStressBasis basis;
    basis.stresses = svd.matrixU().rightCols(r.rows() - rank).transpose();
    return basis;
}

Matrix stress_matrix(const Topology& topology, int dim, const Vector& omega) {
    if (omega.size() != static_cast<int>(topology.edges.size()))
        throw std::invalid_argument("stress_matrix: one coefficient per edge required");
    Matrix m = Matrix::Zero(topology.n_vertices * dim, topology.n_vertices * dim);
    for (int i = 0; i < omega.size(); ++i)
        if (omega[i] != 0.0) m += omega[i] * edge_hessian(topology, dim, i);
    return m;
}

Vector pin_compatible_flex(const Framework& fw, const Vector& flex) {
    const RigidBodyBasis basis = rigid_body_basis(fw.config);
    const int n_pins = static_cast<int>(fw.pins.pins.size());
    if (n_pins == 0 || basis.columns.cols() == 0) return flex;
    Matrix pin_rows = Matrix::Zero(n_pins, fw.dof());
    for (int i = 0; i < n_pins; ++i) {
        const Pin& p = fw.pins.pins[i];
        pin_rows(i, p.vertex * fw.dim() + p.axis) = 1.0;
    }
    const Matrix pt = pin_rows * basis.columns;
    const Vector beta = pt.completeOrthogonalDecomposition().solve(pin_rows * flex);
    return flex - basis.columns * beta;
}

namespace {

Vector canonical_ray(Vector a) {
    a /= a.norm();
    for (int i = 0; i < a.size(); ++i) {
        if (std::abs(a[i]) > 1e-12) {
            if (a[i] < 0.0) a = -a;
            break;
        }
    }
    return a;
}

// Zero rays of the binary quadratic p a1^2 + 2 q a1 a2 + r a2^2, entries
// prescaled so the largest magnitude is 1. eps separates the definite,
// double-ray, and two-ray regimes.
std::vector<Vector> binary_quadratic_rays(double p, double q, double r, double eps) {
    std::vector<Vector> rays;
    const auto push = [&rays](double a1, double a2) {
        Vector a(2);
        a << a1, a2;
        rays.push_back(canonical_ray(std::move(a)));
    };

    const double disc = q * q - p * r;
    if (disc < -eps) return rays;

    if (std::abs(p) <= eps && std::abs(r) <= eps) {
        // Off-diagonal form: the coordinate axes are the rays.
        push(1.0, 0.0);
        push(0.0, 1.0);
        return rays;
    }

    const double root = std::sqrt(std::max(disc, 0.0));
    if (std::abs(p) >= std::abs(r)) {
        push((-q + root) / p, 1.0);
        if (disc > eps) push((-q - root) / p, 1.0);
    } else {
        push(1.0, (-q + root) / r);
        if (disc > eps) push(1.0, (-q - root) / r);
    }
    if (rays.size() == 2 && std::abs(rays[0].dot(rays[1])) > 1.0 - 1e-12) rays.pop_back();
    return rays;
}

}  // namespace

StressTestResult stress_test(const Framework& fw, const Matrix& flex_basis,
                             const Matrix& stresses, double zero_ray_tol) {
    const int s = static_cast<int>(flex_basis.cols());
    if (s < 1) throw std::invalid_argument("stress_test: flex basis must be nonempty");

    StressTestResult result;
    std::vector<int> effective;
    std::vector<double> form_norms;
    for (int j = 0; j < stresses.rows(); ++j) {
        const Matrix ambient = stress_matrix(fw.topology, fw.dim(), stresses.row(j).transpose());
        Matrix q = flex_basis.transpose() * ambient * flex_basis;
        q = 0.5 * (q + q.transpose());
        const double norm = q.norm();
        if (norm > zero_ray_tol * ambient.norm()) effective.push_back(j);
        result.quadratic_forms.push_back(std::move(q));
        form_norms.push_back(norm);
    }

    if (effective.empty()) {
        if (s == 1) {
            result.directions.push_back(Vector::Ones(1));
            result.solved = true;
        } else {
            result.note = "every stress form vanishes on the flex space; all directions pass";
        }
        return result;
    }

    if (s == 1) {
        // A nonvanishing 1x1 form has no zero ray.
        result.solved = true;
        return result;
    }

    if (s > 2) {
        result.note = "flex spaces of dimension 3 or larger need a polynomial system solver; "
                      "quadratic forms returned unsolved";
        return result;
    }

    const Matrix& q0 = result.quadratic_forms[effective.front()];
    const double scale = q0.cwiseAbs().maxCoeff();
    std::vector<Vector> candidates = binary_quadratic_rays(
        q0(0, 0) / scale, q0(0, 1) / scale, q0(1, 1) / scale, zero_ray_tol);

    for (const Vector& a : candidates) {
        bool passes = true;
        for (int j : effective) {
            const double value = a.dot(result.quadratic_forms[j] * a);
            if (std::abs(value) > zero_ray_tol * form_norms[j]) {
                passes = false;
                break;
            }
        }
        if (passes) result.directions.push_back(a);
    }
    result.solved = true;
    return result;
}

SingularityCertificate certify(const Framework& fw, const CertifyOptions& opt) {
    fw.validate();
    SingularityCertificate cert;

    const ConstraintSet cs(fw, false);
    const Vector& x = fw.config.coords;
    const Matrix j = cs.constraint_jacobian(x);
    const Vector g = cs.energy_gradient(x);
    const Vector eta = lagrange_multipliers_for_gradient(j, g);
    cert.kkt_residual = (g - j.transpose() * eta).norm();

    const TangentFrame frame = tangent_frame(cs, x);
    cert.licq_margin = frame.sigma_min;
    cert.licq_ok = frame.sigma_min > opt.licq_tol * frame.sigma_max;
    cert.tangent_dim = frame.tangent_dim();

    const Matrix h_l = cs.energy_hessian(x) - cs.weighted_constraint_hessian(x, eta);
    Matrix ht = frame.tangent.transpose() * h_l * frame.tangent;
    ht = 0.5 * (ht + ht.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(ht);
    cert.eigenvalues.assign(es.eigenvalues().data(),
                            es.eigenvalues().data() + es.eigenvalues().size());

    const double radius = cert.eigenvalues.empty()
                              ? 0.0
                              : std::max(std::abs(cert.eigenvalues.front()),
                                         std::abs(cert.eigenvalues.back()));
    const double band = opt.degeneracy_tol * radius;
    for (double lambda : cert.eigenvalues) {
        if (lambda < -band)
            ++cert.index;
        else if (lambda <= band)
            cert.degenerate = true;
    }
    if (radius == 0.0 && cert.tangent_dim > 0) cert.degenerate = true;

    const Matrix projector = tangent_projector(frame);
    const Matrix h_hat = projector * h_l * projector;
    cert.normal_space_residual = (h_hat * frame.normal).cwiseAbs().maxCoeff();

    const Matrix r = rigidity_matrix(fw);
    cert.rigidity_rank = svd_rank(r, opt.rank_tol);
    const Matrix flexes = nontrivial_flex_basis(fw, opt.rank_tol);
    cert.nontrivial_flex_dim = static_cast<int>(flexes.cols());
    const SelfStressBasis stresses = self_stresses(fw, opt.rank_tol);
    cert.self_stress_dim = stresses.count();

    if (cert.nontrivial_flex_dim >= 1) {
        const StressTestResult st =
            stress_test(fw, flexes, stresses.stresses, opt.zero_ray_tol);
        if (st.solved) {
            cert.realizable_directions = st.directions;
            for (const Vector& a : cert.realizable_directions) {
                const Vector v = pin_compatible_flex(fw, flexes * a);
                cert.realizable_directions_ambient.push_back(v / v.norm());
            }
        }
    }

    cert.certified_singular_flexible = cert.licq_ok && !cert.degenerate &&
                                       cert.kkt_residual <= opt.kkt_tol && cert.index >= 1 &&
                                       cert.index < cert.tangent_dim &&
                                       cert.self_stress_dim >= 1;
    return cert;
}

}  // namespace barflex
