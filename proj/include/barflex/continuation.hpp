#pragma once

#include "barflex/manifold.hpp"

#include <string>
#include <utility>
#include <vector>

namespace barflex {

struct ContinuationOptions {
    double arc_step = 1e-2;
    double path_tol = 1e-8;
    int max_step_halvings = 5;
    int corrector_max_iter = 50;
    // A correction larger than this fraction of the step means the predictor
    // direction was not tangent to a branch; the step is rejected.
    double displacement_factor = 0.5;
    double rank_tol = 1e-8;
    int direction_sign = 1;
};

struct FlexPath {
    std::vector<Vector> steps;      // steps[0] is the start configuration
    std::vector<double> residuals;  // per-step max |edge residual|
    double arc_step = 0.0;
    int direction_sign = 1;
    bool truncated = false;
    std::string failure_reason;  // nonempty when truncated
    int n_steps() const { return static_cast<int>(steps.size()) - 1; }
};

// Traces the level-set branch leaving the framework's configuration along
// the given tangent direction. Every edge, the free edge included, is held
// at its starting length; pins are enforced exactly. The first step is pure
// prediction along the direction (the Jacobian at a branch point cannot
// supply a tangent); correction starts from the first predicted point.
FlexPath follow_branch(const Framework& fw, const Vector& direction, int n_steps,
                       const ContinuationOptions& opt = {});

// (cumulative arc position, free-edge length) per path step.
std::vector<std::pair<double, double>> reparameterize_free_edge(const Framework& fw,
                                                                const FlexPath& path);

}  // namespace barflex
