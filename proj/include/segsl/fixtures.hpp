#pragma once

#include "graph.hpp"

// Small reference graphs shared by tests, examples and the CLI docs.
// The same graphs ship as TSV files under data/fixtures/.

namespace segsl::fixtures {

/// Single unit edge 0-1.
inline Graph k2() { return Graph(2, {{0, 1, 1.0}}); }

/// Unit triangle on {0,1,2}.
inline Graph triangle() { return Graph(3, {{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}}); }

/// Path 0-1-2.
inline Graph path3() { return Graph(3, {{0, 1, 1.0}, {1, 2, 1.0}}); }

/// Unit triangles {0,1,2} and {3,4,5} joined by the bridge 2-3.
inline Graph barbell6() {
    return Graph(6, {{0, 1, 1.0}, {0, 2, 1.0}, {1, 2, 1.0}, {3, 4, 1.0}, {3, 5, 1.0}, {4, 5, 1.0}, {2, 3, 1.0}});
}

}  // namespace segsl::fixtures
