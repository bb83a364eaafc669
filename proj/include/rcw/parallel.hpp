#pragma once

namespace rcw {

// Caps the OpenMP team size used by the draw, grid and replication loops.
// Values < 1 restore the runtime default.
void set_num_threads(int n);
int max_threads();

}  // namespace rcw
