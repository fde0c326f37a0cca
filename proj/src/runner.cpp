#include "mpidesk/runner.hpp"

#include <exception>
#include <thread>
#include <vector>

namespace mpidesk {

void run_on_ranks(NetworkFabric& fabric, const std::function<void(RankId)>& body) {
  const std::uint32_t n = fabric.nranks();
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> threads;
  threads.reserve(n);
  for (RankId r = 0; r < n; ++r) {
    threads.emplace_back([&, r] {
      try {
        body(r);
      } catch (...) {
        errors[r] = std::current_exception();
        fabric.shutdown();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (RankId r = 0; r < n; ++r) {
    if (errors[r]) std::rethrow_exception(errors[r]);
  }
}

}  // namespace mpidesk
