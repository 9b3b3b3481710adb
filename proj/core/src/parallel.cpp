#include "streamrobust/parallel.hpp"

namespace streamrobust {

std::size_t default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

}  // namespace streamrobust
