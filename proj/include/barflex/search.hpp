#pragma once

#include "barflex/manifold.hpp"
#include "barflex/rng.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace barflex {

struct SearchConfig {
    int k = 1;                     // saddle index
    double step_size = 0.1;        // gradient step scale
    double tol = 1e-10;            // convergence threshold on the iterate move
    int max_iters = 20000;
    double projection_tol = 1e-12;
    int projection_max_iter = 25;
    int max_step_halvings = 10;    // backoff attempts when projection fails
    double licq_tol = 1e-8;
    std::uint64_t seed = 0;
    double perturb_scale = 4.0;    // multi-start tangent walk distance scale
    bool record_history = true;

    void validate() const;  // throws std::invalid_argument
};

struct HistoryRow {
    int iter = 0;
    double energy = 0.0;
    double move_norm = 0.0;
    double constraint_inf = 0.0;
    double kkt_residual = 0.0;
};

struct SearchState {
    Vector x;
    Matrix v;  // tangent eigenvector estimates, one column per index
    int iter = 0;
    double last_move = std::numeric_limits<double>::infinity();
};

struct SearchResult {
    bool converged = false;
    Vector x;
    Matrix v;
    int iterations = 0;
    double final_move = std::numeric_limits<double>::infinity();
    double kkt_residual = std::numeric_limits<double>::infinity();
    double constraint_inf = std::numeric_limits<double>::infinity();
    double energy = 0.0;
    std::vector<HistoryRow> history;
    std::vector<std::string> events;  // step halvings, eigenvector resets
    std::string failure_reason;       // empty when converged
    int start_index = 0;
    std::uint64_t seed = 0;
};

// Strict admissible index range for a framework search with one free edge:
// 0 < k < n*d - m - d(d+1)/2 + 1. Throws std::invalid_argument outside it.
void validate_index_range(const Framework& fw, int k);

// Pre-projection iterate x - step * sum_i (I - 2 v_i v_i^T) P_T grad E.
Vector reflected_step(const ConstrainedProblem& problem, const TangentFrame& frame,
                      const Matrix& v, double step_size);

// Deflated eigenvector sweep at the frame's point, followed by tangent
// projection, normalization, and re-orthonormalization. Columns that vanish
// are redrawn from the tangent space; each redraw is appended to events.
Matrix update_eigenvectors(const ConstrainedProblem& problem, const TangentFrame& frame,
                           const Matrix& v, RandomStream& rng,
                           std::vector<std::string>* events = nullptr, int iter = -1);

// Eigenvectors of the k smallest tangent-restricted Hessian eigenvalues,
// lifted to ambient coordinates.
Matrix initial_eigenvectors(const ConstrainedProblem& problem, const TangentFrame& frame, int k);

SearchResult run_search(const ConstrainedProblem& problem, const Vector& x0,
                        const SearchConfig& cfg);

// Framework entry point: validates the index range, excludes the free edge
// from the constraint set, and searches from the framework's configuration.
SearchResult run_search(const Framework& fw, const SearchConfig& cfg);

// Runs one unperturbed start plus n_starts-1 random tangent perturbations of
// the initial configuration, each with its own sub-seed. Results are ordered
// by (converged, kkt_residual), ties broken by start index. Seeds are drawn
// before any start runs, so parallel and serial execution give identical
// output.
std::vector<SearchResult> multi_start(const Framework& fw, const SearchConfig& cfg, int n_starts,
                                      bool parallel = false);

}  // namespace barflex
