#include "contextstrip/core/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace cstrip {

int configure_threads_from_env() {
  if (const char* raw = std::getenv("CONTEXTSTRIP_THREADS")) {
    try {
      const int requested = std::stoi(raw);
      if (requested >= 1) omp_set_num_threads(requested);
    } catch (const std::exception&) {
      // ignored: keep the OpenMP default
    }
  }
  return thread_count();
}

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int threads) {
  if (threads >= 1) omp_set_num_threads(threads);
}

}  // namespace cstrip
