#pragma once

namespace cstrip {

/// Caps OpenMP parallelism from the CONTEXTSTRIP_THREADS environment
/// variable. Unset or invalid leaves the OpenMP default in place. Returns the
/// effective thread count.
int configure_threads_from_env();

int thread_count();
void set_thread_count(int threads);

}  // namespace cstrip
