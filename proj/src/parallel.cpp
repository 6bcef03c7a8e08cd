#include "snrdet/parallel.hpp"

#include <cstdlib>
#include <string>

namespace snrdet {

std::size_t default_thread_count() {
  if (const char* env = std::getenv("SNRDET_THREADS")) {
    try {
      const long n = std::stol(env);
      if (n > 0) return static_cast<std::size_t>(n);
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace snrdet
