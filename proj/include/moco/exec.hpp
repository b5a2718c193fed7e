#pragma once

namespace moco {

// Execution policy for the data-parallel kernels. Every kernel computes each
// output element independently (reductions are done in a fixed order), so
// serial and parallel runs produce bit-identical results; the serial variants
// are kept as the reference implementation for tests and benchmarks.
enum class Exec { serial, parallel };

} // namespace moco
