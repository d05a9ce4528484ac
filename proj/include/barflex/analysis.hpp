#pragma once

#include "barflex/manifold.hpp"

#include <string>
#include <vector>

namespace barflex {

struct CertifyOptions {
    double rank_tol = 1e-8;        // relative SVD rank cutoff
    double licq_tol = 1e-8;        // relative smallest-singular-value margin
    double degeneracy_tol = 1e-7;  // eigenvalue zero band, relative to spectral radius
    double kkt_tol = 1e-8;         // first-order residual bound for certification
    double zero_ray_tol = 1e-8;    // relative bound on |Q(a)| for accepted rays
};

// Diagnostic record for a configuration: first- and second-order conditions
// of the constrained energy together with the rigidity quantities of the full
// edge set. The certified flag asserts only the checked hypotheses (small KKT
// residual, LICQ, a strict saddle signature, rank-deficient rigidity matrix),
// never more.
struct SingularityCertificate {
    double kkt_residual = 0.0;
    double licq_margin = 0.0;  // smallest singular value of the constraint Jacobian
    bool licq_ok = false;
    int tangent_dim = 0;
    std::vector<double> eigenvalues;  // tangent-restricted spectrum, ascending
    int index = 0;                    // eigenvalues below the degeneracy band
    bool degenerate = false;          // any eigenvalue inside the band
    double normal_space_residual = 0.0;  // ||projected Hessian * normal basis||_inf
    int rigidity_rank = 0;            // all edges, free edge included
    int nontrivial_flex_dim = 0;
    int self_stress_dim = 0;
    std::vector<Vector> realizable_directions;          // flex-coefficient space
    std::vector<Vector> realizable_directions_ambient;  // lifted and normalized
    bool certified_singular_flexible = false;
};

SingularityCertificate certify(const Framework& fw, const CertifyOptions& opt = {});

// Orthonormal left-null vectors of the rigidity matrix, one per row; columns
// follow the framework's edge order and include the free edge.
struct SelfStressBasis {
    Matrix stresses;
    int count() const { return static_cast<int>(stresses.rows()); }
};

SelfStressBasis self_stresses(const Framework& fw, double rank_tol = 1e-8);

// Weighted sum of edge Hessians for edge coefficients omega; v' * M * v
// evaluates sum_i omega_i * 2|v_a - v_b|^2 over edges (a, b).
Matrix stress_matrix(const Topology& topology, int dim, const Vector& omega);

// The representative of a flex modulo rigid-body motions whose pinned
// coordinates stay fixed: subtracts the trivial combination solving the pin
// rows. Leaves the flex's ray in null(R)/trivial unchanged.
Vector pin_compatible_flex(const Framework& fw, const Vector& flex);

struct StressTestResult {
    std::vector<Matrix> quadratic_forms;  // one s x s form per stress row
    std::vector<Vector> directions;       // unit rays, first nonzero entry positive
    bool solved = false;                  // false when the case needs an external solver
    std::string note;
};

// Realizable flex directions: coefficient rays a with a' Q a = 0 for every
// stress form Q. Solved in closed form for flex spaces of dimension <= 2;
// larger spaces return the forms unsolved.
StressTestResult stress_test(const Framework& fw, const Matrix& flex_basis,
                             const Matrix& stresses, double zero_ray_tol = 1e-8);

}  // namespace barflex
