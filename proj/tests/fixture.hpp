#pragma once

#include "cog/graph.hpp"

namespace cog::test {

/// Desk-scale stand-in for a citation graph: 7 classes of 100 nodes, mean
/// degree near 4 with about 80 % of edges inside a class, and 98 binary
/// features whose class block is blurred by 30 % bit noise.
inline SyntheticParams desk_fixture(Seed seed = 7) {
  SyntheticParams p;
  p.num_nodes = 700;
  p.num_classes = 7;
  p.p_in = 0.033;
  p.p_out = 0.0013;
  p.num_features = 98;
  p.feature_noise = 0.3;
  p.seed = seed;
  return p;
}

/// Pseudo-labels per model per round for the desk fixture (a tenth of the nodes).
inline constexpr Index kDeskAdd = 70;

}  // namespace cog::test
