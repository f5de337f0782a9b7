#pragma once

#include <exception>

#include <Eigen/Core>

namespace ngembed::detail {

// Static-schedule loop over [0, n). An exception thrown by any iteration is
// rethrown on the calling thread once the loop has finished.
template <class Body>
void parallel_for(Eigen::Index n, Body&& body) {
  std::exception_ptr err;
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(ngembed_parallel_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace ngembed::detail
