#include "barflex/framework.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace barflex {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

void Framework::validate() const {
    const int d = config.dim;
    const int n = topology.n_vertices;
    const int m = topology.n_edges();

    require(d >= 1, "dim: must be >= 1");
    require(n >= 1, "vertices: at least one vertex required");
    require(static_cast<int>(config.coords.size()) == n * d,
            "vertices: coordinate count must equal n_vertices * dim");
    require(config.coords.allFinite(), "vertices: all coordinates must be finite");

    require(m >= 1, "edges: at least one edge required");
    std::set<std::pair<int, int>> seen;
    for (int i = 0; i < m; ++i) {
        const auto [a, b] = topology.edges[i];
        require(a != b, "edges[" + std::to_string(i) + "]: endpoints must differ");
        require(a >= 0 && a < n && b >= 0 && b < n,
                "edges[" + std::to_string(i) + "]: vertex index out of range");
        auto key = std::minmax(a, b);
        require(seen.insert(key).second,
                "edges[" + std::to_string(i) + "]: duplicate unordered pair");
    }
    require(topology.free_edge >= 0 && topology.free_edge < m,
            "free_edge: index out of range");

    require(static_cast<int>(rest_lengths.size()) == m,
            "rest_lengths: must have one entry per edge");
    for (int i = 0; i < m; ++i)
        require(rest_lengths[i] > 0.0,
                "rest_lengths[" + std::to_string(i) + "]: must be strictly positive");

    const int pin_count = rigid_motion_count(d);
    require(static_cast<int>(pins.pins.size()) == pin_count,
            "pins: expected exactly " + std::to_string(pin_count) + " entries");
    std::set<std::pair<int, int>> pin_seen;
    for (size_t j = 0; j < pins.pins.size(); ++j) {
        const Pin& p = pins.pins[j];
        require(p.vertex >= 0 && p.vertex < n,
                "pins[" + std::to_string(j) + "].vertex: out of range");
        require(p.axis >= 0 && p.axis < d, "pins[" + std::to_string(j) + "].axis: out of range");
        require(pin_seen.insert({p.vertex, p.axis}).second,
                "pins[" + std::to_string(j) + "]: duplicate (vertex, axis) pair");
        require(std::abs(config.coords[p.vertex * d + p.axis] - p.value) <= 1e-9,
                "pins[" + std::to_string(j) + "].value: inconsistent with configuration");
    }
}

double Framework::measured_length(int i) const {
    const auto [a, b] = topology.edges.at(i);
    return (config.vertex(a) - config.vertex(b)).norm();
}

std::vector<int> Framework::degenerate_edges(double tol) const {
    std::vector<int> out;
    for (int i = 0; i < n_edges(); ++i)
        if (measured_length(i) <= tol) out.push_back(i);
    return out;
}

Framework framework_at(const Framework& fw, const Vector& coords) {
    Framework out = fw;
    out.config.coords = coords;
    return out;
}

void set_rest_lengths_from_config(Framework& fw) {
    fw.rest_lengths.resize(fw.n_edges());
    for (int i = 0; i < fw.n_edges(); ++i) fw.rest_lengths[i] = fw.measured_length(i);
}

double edge_residual(const Framework& fw, int i) {
    const auto [a, b] = fw.topology.edges.at(i);
    const double l = fw.rest_lengths[i];
    return (fw.config.vertex(a) - fw.config.vertex(b)).squaredNorm() - l * l;
}

double free_edge_energy(const Framework& fw) {
    const auto [a, b] = fw.topology.edges.at(fw.topology.free_edge);
    return (fw.config.vertex(a) - fw.config.vertex(b)).squaredNorm();
}

Vector edge_gradient(const Framework& fw, int i) {
    const auto [a, b] = fw.topology.edges.at(i);
    const int d = fw.dim();
    Vector g = Vector::Zero(fw.dof());
    const Vector diff = fw.config.vertex(a) - fw.config.vertex(b);
    g.segment(a * d, d) = 2.0 * diff;
    g.segment(b * d, d) = -2.0 * diff;
    return g;
}

Vector free_edge_energy_gradient(const Framework& fw) {
    return edge_gradient(fw, fw.topology.free_edge);
}

Matrix edge_hessian(const Topology& topology, int dim, int i) {
    const auto [a, b] = topology.edges.at(i);
    const int nd = topology.n_vertices * dim;
    Matrix h = Matrix::Zero(nd, nd);
    const Matrix id2 = 2.0 * Matrix::Identity(dim, dim);
    h.block(a * dim, a * dim, dim, dim) = id2;
    h.block(b * dim, b * dim, dim, dim) = id2;
    h.block(a * dim, b * dim, dim, dim) = -id2;
    h.block(b * dim, a * dim, dim, dim) = -id2;
    return h;
}

Matrix rigidity_matrix(const Framework& fw) {
    Matrix r(fw.n_edges(), fw.dof());
    for (int i = 0; i < fw.n_edges(); ++i) r.row(i) = edge_gradient(fw, i).transpose();
    return r;
}

RigidBodyBasis rigid_body_basis(const Configuration& config) {
    const int d = config.dim;
    const int n = config.n_vertices();
    const int nd = n * d;
    const int cols = rigid_motion_count(d);

    Matrix basis = Matrix::Zero(nd, cols);
    int col = 0;
    for (int axis = 0; axis < d; ++axis, ++col)
        for (int i = 0; i < n; ++i) basis(i * d + axis, col) = 1.0;

    // Rotation generators about the centroid; centering makes them
    // orthogonal to the translation columns.
    Vector centroid = Vector::Zero(d);
    for (int i = 0; i < n; ++i) centroid += config.vertex(i);
    centroid /= n;

    for (int alpha = 0; alpha < d; ++alpha)
        for (int beta = alpha + 1; beta < d; ++beta, ++col)
            for (int i = 0; i < n; ++i) {
                const Vector rel = config.vertex(i) - centroid;
                basis(i * d + alpha, col) = -rel[beta];
                basis(i * d + beta, col) = rel[alpha];
            }

    // Modified Gram-Schmidt; vanished columns stay zero and set the flag.
    bool degenerate = false;
    for (int c = 0; c < cols; ++c) {
        for (int prev = 0; prev < c; ++prev)
            basis.col(c) -= basis.col(prev).dot(basis.col(c)) * basis.col(prev);
        const double norm = basis.col(c).norm();
        if (norm < 1e-12) {
            basis.col(c).setZero();
            degenerate = true;
        } else {
            basis.col(c) /= norm;
        }
    }
    return {basis, degenerate};
}

Matrix nontrivial_flex_basis(const Framework& fw, double rank_tol) {
    const Matrix r = rigidity_matrix(fw);
    Eigen::JacobiSVD<Matrix> svd(r, Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    const double cutoff = sigma.size() > 0 ? rank_tol * sigma[0] : 0.0;
    int rank = 0;
    for (int i = 0; i < sigma.size(); ++i)
        if (sigma[i] > cutoff) ++rank;

    const int nd = fw.dof();
    const Matrix null_basis = svd.matrixV().rightCols(nd - rank);

    // Remove the trivial component, then orthonormalize what is left.
    const Matrix trivial = rigid_body_basis(fw.config).columns;
    Matrix residual = null_basis - trivial * (trivial.transpose() * null_basis);

    Eigen::JacobiSVD<Matrix> rsvd(residual, Eigen::ComputeThinU);
    const auto& rs = rsvd.singularValues();
    const double rcut = rs.size() > 0 ? 1e-8 * std::max(1.0, rs[0]) : 0.0;
    int s = 0;
    for (int i = 0; i < rs.size(); ++i)
        if (rs[i] > rcut) ++s;
    return rsvd.matrixU().leftCols(s);
}

int svd_rank(const Matrix& m, double rank_tol) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sigma = svd.singularValues();
    if (sigma.size() == 0) return 0;
    const double cutoff = rank_tol * sigma[0];
    int rank = 0;
    for (int i = 0; i < sigma.size(); ++i)
        if (sigma[i] > cutoff) ++rank;
    return rank;
}

}  // namespace barflex
