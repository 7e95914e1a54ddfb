#include "elastic/parallel.hpp"

#include <algorithm>
#include <tbb/global_control.h>

namespace elastic {

ThreadLimit::ThreadLimit(int threads)
    : impl_(new tbb::global_control(tbb::global_control::max_allowed_parallelism,
                                    static_cast<std::size_t>(std::max(1, threads)))) {}

ThreadLimit::~ThreadLimit() { delete static_cast<tbb::global_control*>(impl_); }

}  // namespace elastic
