#include "barflex/search.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <future>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace barflex {

namespace {

constexpr double kVanishTol = 1e-14;

Vector random_tangent(const TangentFrame& frame, RandomStream& rng) {
    Vector z(frame.tangent_dim());
    for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return frame.tangent * z;
}

void log_event(std::vector<std::string>* events, const std::string& text) {
    if (events) events->push_back(text);
}

}  // namespace

void SearchConfig::validate() const {
    if (k < 1) throw std::invalid_argument("SearchConfig: k must be at least 1");
    if (!(step_size > 0.0)) throw std::invalid_argument("SearchConfig: step_size must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("SearchConfig: tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("SearchConfig: max_iters must be at least 1");
    if (!(projection_tol > 0.0))
        throw std::invalid_argument("SearchConfig: projection_tol must be positive");
    if (projection_max_iter < 1)
        throw std::invalid_argument("SearchConfig: projection_max_iter must be at least 1");
    if (max_step_halvings < 0)
        throw std::invalid_argument("SearchConfig: max_step_halvings must be non-negative");
    if (!(licq_tol > 0.0)) throw std::invalid_argument("SearchConfig: licq_tol must be positive");
    if (!(perturb_scale >= 0.0))
        throw std::invalid_argument("SearchConfig: perturb_scale must be non-negative");
}

void validate_index_range(const Framework& fw, int k) {
    const int upper = fw.dof() - fw.n_edges() - rigid_motion_count(fw.dim()) + 1;
    if (k <= 0 || k >= upper) {
        std::ostringstream msg;
        msg << "saddle index k = " << k << " outside the admissible range 0 < k < " << upper;
        throw std::invalid_argument(msg.str());
    }
}

Vector reflected_step(const ConstrainedProblem& problem, const TangentFrame& frame,
                      const Matrix& v, double step_size) {
    const Vector grad = problem.energy_gradient(frame.x);
    const Vector g = frame.tangent * (frame.tangent.transpose() * grad);
    Vector move = Vector::Zero(g.size());
    for (int i = 0; i < v.cols(); ++i) move -= step_size * (g - 2.0 * v.col(i) * v.col(i).dot(g));
    return frame.x + move;
}

Matrix update_eigenvectors(const ConstrainedProblem& problem, const TangentFrame& frame,
                           const Matrix& v, RandomStream& rng,
                           std::vector<std::string>* events, int iter) {
    const int k = static_cast<int>(v.cols());
    const Matrix ht = tangent_restricted_hessian(problem, frame);
    Eigen::SelfAdjointEigenSolver<Matrix> es(ht, Eigen::EigenvaluesOnly);
    const double radius = es.eigenvalues().cwiseAbs().maxCoeff();
    // The raw dimer update diverges once the tangent spectrum spreads past 2;
    // damp it so every mode contracts while fixed points stay fixed.
    const double gamma = radius > 0.9 ? 0.9 / radius : 1.0;

    const auto reinit = [&](int i) {
        std::ostringstream msg;
        msg << "iter " << iter << ": eigenvector " << i
            << " reinitialized from a random tangent draw";
        log_event(events, msg.str());
        return random_tangent(frame, rng);
    };

    Matrix out(v.rows(), k);
    for (int i = 0; i < k; ++i) {
        const Vector hv = frame.tangent * (ht * (frame.tangent.transpose() * v.col(i)));
        Vector step = hv - v.col(i) * v.col(i).dot(hv);
        for (int j = 0; j < i; ++j) step -= 2.0 * v.col(j) * v.col(j).dot(hv);
        Vector u = v.col(i) - gamma * step;
        u = frame.tangent * (frame.tangent.transpose() * u);
        if (u.norm() < kVanishTol) u = reinit(i);
        out.col(i) = u / u.norm();
    }

    // The deflated sweep does not keep the columns mutually orthogonal.
    for (int i = 0; i < k; ++i) {
        Vector u = out.col(i);
        for (int attempt = 0; attempt < 8; ++attempt) {
            for (int j = 0; j < i; ++j) u -= out.col(j) * out.col(j).dot(u);
            if (u.norm() >= kVanishTol) break;
            u = reinit(i);
        }
        out.col(i) = u / u.norm();
    }
    return out;
}

Matrix initial_eigenvectors(const ConstrainedProblem& problem, const TangentFrame& frame, int k) {
    if (k > frame.tangent_dim())
        throw std::invalid_argument("initial_eigenvectors: k exceeds the tangent dimension");
    const Matrix ht = tangent_restricted_hessian(problem, frame);
    Eigen::SelfAdjointEigenSolver<Matrix> es(ht);
    return frame.tangent * es.eigenvectors().leftCols(k);
}

namespace {

struct ProjectedStep {
    bool success = false;
    Vector x;
    double residual_inf = 0.0;
    int halvings = 0;
};

// Tries x + move, halving the move on projection failure.
ProjectedStep project_with_backoff(const ConstrainedProblem& problem, const Vector& x,
                                   const Vector& move, const SearchConfig& cfg) {
    ProjectedStep step;
    double scale = 1.0;
    for (int h = 0; h <= cfg.max_step_halvings; ++h, scale *= 0.5) {
        const ProjectionResult proj = newton_project(problem, x + scale * move, x,
                                                     cfg.projection_tol, cfg.projection_max_iter);
        if (proj.success) {
            step.success = true;
            step.x = proj.x;
            step.residual_inf = proj.residual_inf;
            step.halvings = h;
            return step;
        }
    }
    step.halvings = cfg.max_step_halvings;
    return step;
}

}  // namespace

SearchResult run_search(const ConstrainedProblem& problem, const Vector& x0,
                        const SearchConfig& cfg) {
    cfg.validate();
    RandomStream rng(cfg.seed);

    SearchResult result;
    result.seed = cfg.seed;
    result.x = x0;

    const ProjectionResult start = newton_project(problem, x0, x0, cfg.projection_tol,
                                                  cfg.projection_max_iter);
    if (!start.success) {
        result.failure_reason = "initial projection onto the constraint manifold failed";
        result.constraint_inf = start.residual_inf;
        return result;
    }

    SearchState state;
    state.x = start.x;
    try {
        TangentFrame frame = tangent_frame(problem, state.x);
        if (frame.sigma_min <= cfg.licq_tol * frame.sigma_max)
            throw LicqError(frame.sigma_min, frame.sigma_max);
        if (cfg.k > frame.tangent_dim())
            throw std::invalid_argument("run_search: k exceeds the tangent dimension");
        state.v = initial_eigenvectors(problem, frame, cfg.k);

        for (state.iter = 1; state.iter <= cfg.max_iters; ++state.iter) {
            const Vector move_full = reflected_step(problem, frame, state.v, cfg.step_size)
                                     - state.x;
            const ProjectedStep step = project_with_backoff(problem, state.x, move_full, cfg);
            if (!step.success) {
                std::ostringstream msg;
                msg << "projection failed after " << cfg.max_step_halvings
                    << " step halvings at iteration " << state.iter;
                result.failure_reason = msg.str();
                break;
            }
            if (step.halvings > 0) {
                std::ostringstream msg;
                msg << "iter " << state.iter << ": step halved " << step.halvings
                    << " times to restore the constraint projection";
                result.events.push_back(msg.str());
            }

            const Vector x_next = step.x;
            state.last_move = (x_next - state.x).norm();

            TangentFrame frame_next = tangent_frame(problem, x_next);
            if (frame_next.sigma_min <= cfg.licq_tol * frame_next.sigma_max)
                throw LicqError(frame_next.sigma_min, frame_next.sigma_max);
            state.v = update_eigenvectors(problem, frame_next, state.v, rng, &result.events,
                                          state.iter);
            state.x = x_next;
            frame = std::move(frame_next);

            result.kkt_residual = kkt_residual(problem, state.x);
            result.constraint_inf = step.residual_inf;
            result.energy = problem.energy(state.x);
            if (cfg.record_history)
                result.history.push_back({state.iter, result.energy, state.last_move,
                                          step.residual_inf, result.kkt_residual});

            if (state.last_move <= cfg.tol) {
                result.converged = true;
                break;
            }
        }
        if (!result.converged && result.failure_reason.empty())
            result.failure_reason = "maximum iterations reached without convergence";
    } catch (const LicqError& err) {
        std::ostringstream msg;
        msg << "constraint gradients lost linear independence (margin " << err.margin() << ")";
        result.failure_reason = msg.str();
    }

    result.x = state.x;
    result.v = state.v;
    result.iterations = std::min(state.iter, cfg.max_iters);
    result.final_move = state.last_move;
    if (result.kkt_residual == std::numeric_limits<double>::infinity())
        result.kkt_residual = kkt_residual(problem, state.x);
    if (result.constraint_inf == std::numeric_limits<double>::infinity())
        result.constraint_inf = problem.constraint_values(state.x).lpNorm<Eigen::Infinity>();
    result.energy = problem.energy(state.x);
    return result;
}

SearchResult run_search(const Framework& fw, const SearchConfig& cfg) {
    validate_index_range(fw, cfg.k);
    const ConstraintSet cs(fw, false);
    return run_search(cs, fw.config.coords, cfg);
}

std::vector<SearchResult> multi_start(const Framework& fw, const SearchConfig& cfg,
                                      int n_starts, bool parallel) {
    if (n_starts < 1) throw std::invalid_argument("multi_start: n_starts must be at least 1");
    cfg.validate();
    validate_index_range(fw, cfg.k);

    const ConstraintSet cs(fw, false);
    const Vector x0 = fw.config.coords;

    // Seeds are drawn up front so the schedule cannot influence the results.
    RandomStream master(cfg.seed);
    std::vector<std::uint64_t> start_seeds(static_cast<std::size_t>(n_starts));
    for (auto& seed : start_seeds) seed = master.next_seed();

    auto run_start = [&](int s) {
        const std::uint64_t start_seed = start_seeds[static_cast<std::size_t>(s)];
        RandomStream rs(start_seed);

        SearchConfig run_cfg = cfg;
        run_cfg.seed = rs.next_seed();

        Vector start = x0;
        std::vector<std::string> start_events;
        if (s > 0 && cfg.perturb_scale > 0.0) {
            const TangentFrame frame0 = tangent_frame(cs, x0);
            const Vector draw = cfg.perturb_scale * random_tangent(frame0, rs);
            // Walk the drawn distance in short hops, projecting back onto the
            // manifold after each one. A single projection of a long tangent
            // move saturates (the projected point stays near the start no
            // matter the scale), which would defeat scale-controlled
            // exploration.
            double remaining = draw.norm();
            if (remaining > 0.0) {
                const Vector dir = draw / remaining;
                constexpr double kHopCap = 0.5;
                Vector cur = x0;
                int halvings = 0;
                bool stalled = false;
                while (remaining > 1e-12) {
                    const TangentFrame frame = tangent_frame(cs, cur);
                    Vector d = frame.tangent * (frame.tangent.transpose() * dir);
                    const double dn = d.norm();
                    if (dn < 1e-12) {
                        stalled = true;
                        break;
                    }
                    d /= dn;
                    const double hop = std::min(kHopCap, remaining);
                    bool hop_done = false;
                    double scale = 1.0;
                    for (int h = 0; h <= cfg.max_step_halvings; ++h, scale *= 0.5) {
                        const Vector guess = cur + scale * hop * d;
                        const ProjectionResult proj = newton_project(cs, guess, guess,
                                                                     cfg.projection_tol,
                                                                     cfg.projection_max_iter);
                        if (proj.success) {
                            cur = proj.x;
                            remaining -= scale * hop;
                            halvings += h > 0 ? 1 : 0;
                            hop_done = true;
                            break;
                        }
                    }
                    if (!hop_done) {
                        stalled = true;
                        break;
                    }
                }
                start = cur;
                if (stalled) {
                    std::ostringstream msg;
                    msg << "start " << s << ": perturbation walk stalled with " << remaining
                        << " of " << draw.norm() << " left";
                    start_events.push_back(msg.str());
                } else if (halvings > 0) {
                    std::ostringstream msg;
                    msg << "start " << s << ": " << halvings
                        << " perturbation hops needed halving to stay on the manifold";
                    start_events.push_back(msg.str());
                }
            }
        }

        SearchResult res = run_search(cs, start, run_cfg);
        res.start_index = s;
        res.seed = start_seed;
        res.events.insert(res.events.begin(), start_events.begin(), start_events.end());
        return res;
    };

    std::vector<SearchResult> results;
    results.reserve(n_starts);
    if (parallel && n_starts > 1) {
        std::vector<std::future<SearchResult>> futures;
        futures.reserve(n_starts);
        for (int s = 0; s < n_starts; ++s) {
            futures.push_back(std::async(std::launch::async, run_start, s));
        }
        for (auto& f : futures) results.push_back(f.get());
    } else {
        for (int s = 0; s < n_starts; ++s) results.push_back(run_start(s));
    }

    std::stable_sort(results.begin(), results.end(),
                     [](const SearchResult& a, const SearchResult& b) {
                         if (a.converged != b.converged) return a.converged;
                         if (a.kkt_residual != b.kkt_residual)
                             return a.kkt_residual < b.kkt_residual;
                         return a.start_index < b.start_index;
                     });
    return results;
}

}  // namespace barflex
