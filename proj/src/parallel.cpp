#include "eitmem/parallel.hpp"

#include <charconv>
#include <cstdlib>
#include <cstring>

namespace eitmem {

std::size_t thread_count() {
  if (const char* env = std::getenv("EITMEM_THREADS")) {
    std::size_t n = 0;
    const auto [p, ec] = std::from_chars(env, env + std::strlen(env), n);
    if (ec == std::errc{} && n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

}  // namespace eitmem
