#pragma once

#include <string>

#include "barflex/framework.hpp"

namespace barflex::svg {

struct RenderOptions {
    double width_px = 640.0;
    double margin_frac = 0.10;   // viewport padding relative to the bounding box
    double arrow_scale = 0.9;    // model-space length of the largest flex arrow
    double arrow_threshold = 0.25;  // vertices slower than this fraction of the
                                    // fastest one get no arrow
};

/// Deterministic 2D rendering: fixed viewport from the vertex bounding box
/// plus margin, edges as <line> (free edge dashed), vertices as labelled
/// dots, and an optional red arrow per significantly moving vertex of the
/// given flex. Throws std::invalid_argument unless dim == 2.
std::string render_framework(const Framework& fw, const Vector* flex = nullptr,
                             const RenderOptions& opt = {});

}  // namespace barflex::svg
