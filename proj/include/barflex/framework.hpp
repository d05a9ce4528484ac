#pragma once

#include <Eigen/Dense>

#include <string>
#include <utility>
#include <vector>

namespace barflex {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Flat coordinate vector for n vertices in R^d; vertex i occupies
/// entries [i*dim, (i+1)*dim).
struct Configuration {
    int dim = 0;
    Vector coords;

    int n_vertices() const { return dim > 0 ? static_cast<int>(coords.size()) / dim : 0; }

    Eigen::VectorBlock<const Vector> vertex(int i) const { return coords.segment(i * dim, dim); }
    Eigen::VectorBlock<Vector> vertex(int i) { return coords.segment(i * dim, dim); }
};

struct Pin {
    int vertex = 0;
    int axis = 0;
    double value = 0.0;
};

/// Exactly d(d+1)/2 pinned coordinates removing the rigid-body motions.
struct PinningScheme {
    std::vector<Pin> pins;
};

struct Topology {
    int n_vertices = 0;
    std::vector<std::pair<int, int>> edges;
    int free_edge = 0;  // index into edges; by convention 0

    int n_edges() const { return static_cast<int>(edges.size()); }
};

/// Number of independent rigid-body motions in R^d.
inline int rigid_motion_count(int dim) { return dim * (dim + 1) / 2; }

/// Bar framework: topology + geometry + rest lengths + pinning scheme.
/// The rest-length entry of the free edge records its current length and is
/// never used as a constraint.
struct Framework {
    Topology topology;
    Configuration config;
    Vector rest_lengths;
    PinningScheme pins;

    int dim() const { return config.dim; }
    int n_vertices() const { return topology.n_vertices; }
    int n_edges() const { return topology.n_edges(); }
    int dof() const { return topology.n_vertices * config.dim; }

    /// Throws std::invalid_argument with a field-level message on any
    /// violated structural invariant (index ranges, duplicate edges/pins,
    /// non-positive rest lengths, pin/configuration mismatch). Rigid
    /// frameworks pass; the count check lives in under_constrained() so
    /// analysis ops accept them while the saddle search rejects them.
    void validate() const;

    /// Maxwell count n*d > m + d(d+1)/2; flexibility is possible only when
    /// this holds.
    bool under_constrained() const {
        return dof() > n_edges() + rigid_motion_count(config.dim);
    }

    /// Current length of edge i measured from the configuration.
    double measured_length(int i) const;

    /// Edge indices whose endpoints currently coincide. Legal inputs for
    /// residual/gradient evaluation, but LICQ necessarily fails on them,
    /// so analysis reports flag them.
    std::vector<int> degenerate_edges(double tol = 1e-12) const;
};

/// Framework with the same topology/rest lengths/pins at new coordinates.
Framework framework_at(const Framework& fw, const Vector& coords);

/// Replaces rest lengths by the lengths measured from the configuration.
void set_rest_lengths_from_config(Framework& fw);

/// f_i(p) = |p_{i,1} - p_{i,2}|^2 - l_i^2
double edge_residual(const Framework& fw, int i);

/// Squared length of the designated free edge (no rest-length subtraction).
double free_edge_energy(const Framework& fw);

/// Gradient of |p_a - p_b|^2 as a length-n*d vector: 2(p_a - p_b) in the
/// block of vertex a, 2(p_b - p_a) at vertex b, zero elsewhere.
Vector edge_gradient(const Framework& fw, int i);

/// Gradient of the free-edge energy.
Vector free_edge_energy_gradient(const Framework& fw);

/// Constant Hessian of |p_a - p_b|^2: +2 I_d at (a,a), (b,b); -2 I_d at
/// (a,b), (b,a).
Matrix edge_hessian(const Topology& topology, int dim, int i);

/// Rows are edge gradients; includes the free edge's row.
Matrix rigidity_matrix(const Framework& fw);

struct RigidBodyBasis {
    Matrix columns;   // n*d x d(d+1)/2, orthonormal unless degenerate
    bool degenerate;  // rotation generators vanished (coincident vertices)
};

/// Orthonormal basis of the trivial (rigid-body) motion space: d
/// translations plus d(d-1)/2 rotation generators taken about the centroid.
RigidBodyBasis rigid_body_basis(const Configuration& config);

/// Orthonormal basis of null(R(p)) orthogonal to the trivial motions,
/// computed by SVD with relative threshold rank_tol.
Matrix nontrivial_flex_basis(const Framework& fw, double rank_tol = 1e-8);

/// Numerical rank: count of singular values above rank_tol * sigma_max.
int svd_rank(const Matrix& m, double rank_tol = 1e-8);

}  // namespace barflex
