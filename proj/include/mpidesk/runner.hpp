#pragma once

#include <functional>

#include "mpidesk/transport.hpp"

namespace mpidesk {

// Runs body(rank) on one thread per rank and joins them all. If any rank
// throws, the fabric is shut down so blocked peers unwind, and the lowest
// failing rank's exception is rethrown after the join.
void run_on_ranks(NetworkFabric& fabric, const std::function<void(RankId)>& body);

}  // namespace mpidesk
