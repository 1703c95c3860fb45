#ifndef TRIHEDGE_PARALLEL_HPP
#define TRIHEDGE_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace trihedge {

// Process-wide worker count. 0 = use std::thread::hardware_concurrency().
void set_thread_count(int threads);
int thread_count();

// Runs fn(i) for i in [begin, end). Iterations must write to disjoint state;
// the chunk layout is fixed so results do not depend on the thread count.
// Reductions are the caller's job and must stay sequential.
void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn);

} // namespace trihedge

#endif // TRIHEDGE_PARALLEL_HPP
