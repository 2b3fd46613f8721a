#pragma once

namespace svdbf {

// Worker count used by the OpenMP loops in the simulator, beamformer and
// patch correction. Every parallel loop writes disjoint outputs and keeps its
// inner reductions sequential, so results do not depend on this value.
void set_threads(int n);
int threads();

}  // namespace svdbf
