#pragma once

#include <string>
#include <vector>

#include "barflex/framework.hpp"

namespace barflex::fixtures {

// Planar four-bar linkage with |AB| = |CD| = 1 and |BC| = |DA| = 2.
// Vertices: A = (0,0), B = (1,0), C = B + 2*(cos t2, sin t2),
// D = 2*(cos t1, sin t1). Edges AB, BC, CD, DA with CD free; pins
// x_A, y_A, y_B. Fixed-edge lengths are exact for every (t1, t2),
// so any angle pair is a valid on-manifold start. The collinear
// saddles sit at t1 = t2 = 0 and t1 = t2 = pi.
Framework four_bar(double theta1 = 0.35, double theta2 = 0.35);

// Heptagon with ring A..G, free edge BF, chords AC and DG, pins
// x_A, y_A, y_G. Coordinates are an approximate start near a known
// index-1 saddle; rest lengths are measured from these coordinates.
Framework heptagon_1();

// Second heptagon variant: same ring, free edge BF, chords AE and CG,
// pins x_A, y_A, y_G. Coordinates sit at a converged saddle printed to
// 15 digits, so a search from here stops almost immediately.
Framework heptagon_2();

// Lookup by CLI name: "four-bar", "heptagon-1", "heptagon-2".
// Throws std::invalid_argument for unknown names.
Framework by_name(const std::string& name);

std::vector<std::string> names();

}  // namespace barflex::fixtures
