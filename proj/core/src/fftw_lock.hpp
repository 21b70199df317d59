#pragma once

#include <mutex>

namespace hdiff::detail {

/// FFTW planning is not thread-safe; execution on fresh arrays is.
std::mutex& fftw_planner_mutex();

}  // namespace hdiff::detail
