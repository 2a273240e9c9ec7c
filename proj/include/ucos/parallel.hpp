#pragma once

#include <cstddef>
#include <functional>

namespace ucos {

// Static-partition parallel loop. fn(begin, end) runs on [begin, end)
// chunks with disjoint output slots, so results do not depend on thread
// scheduling. threads == 0 picks the hardware count.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn,
                  unsigned threads = 0);

}  // namespace ucos
