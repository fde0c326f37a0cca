#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "mpidesk/error.hpp"

namespace mpidesk {

using RankId = std::uint32_t;

// One simulated network message. seq numbers a (src, dst, context_id, tag)
// stream and is assigned by the fabric at post time; arrival orders all
// envelopes queued at one destination.
struct Envelope {
  RankId src = 0;
  RankId dst = 0;
  std::uint32_t context_id = 0;
  std::int32_t tag = 0;
  std::vector<std::uint8_t> payload;
  std::uint64_t seq = 0;
  std::uint64_t arrival = 0;
};

enum class GlobalDecision { Quiescent, NotQuiescent };

// Appends one line per transport event: "EVT <post|match> src dst ctx tag seq len".
class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void event(const char* what, const Envelope& e) = 0;
};

std::shared_ptr<TraceSink> make_file_trace(const std::string& path);

// In-process fabric: per-(src,dst) FIFO channels between rank contexts plus
// a control plane for the checkpoint coordinator. Post never blocks; match
// blocks until an envelope satisfying the filters arrives.
class NetworkFabric {
 public:
  explicit NetworkFabric(std::uint32_t nranks);
  ~NetworkFabric();

  NetworkFabric(const NetworkFabric&) = delete;
  NetworkFabric& operator=(const NetworkFabric&) = delete;

  std::uint32_t nranks() const { return nranks_; }
  std::uint64_t channel_count() const {
    return static_cast<std::uint64_t>(nranks_) * nranks_;
  }

  // Assigns the stream seq and arrival stamp, then enqueues on (src,dst).
  void post(Envelope e);

  // Removes and returns the earliest-arrived envelope at dst matching the
  // filters (nullopt filter = wildcard). Among envelopes of one
  // (src,context_id,tag) stream, delivery follows seq order.
  Envelope match(RankId dst, std::optional<RankId> src_filter,
                 std::optional<std::int32_t> tag_filter, std::uint32_t context_id);

  // Non-blocking variant used by request test().
  std::optional<Envelope> try_match(RankId dst, std::optional<RankId> src_filter,
                                    std::optional<std::int32_t> tag_filter,
                                    std::uint32_t context_id);

  // Coordinator round: every rank context reports its (sent, recv) totals
  // exactly once per round; nobody returns before all have reported. The
  // decision is Quiescent iff the sums balance and nothing is in flight at
  // the coordinator's snapshot.
  GlobalDecision control_round(std::uint64_t sent, std::uint64_t recv);

  void set_control_timeout(std::chrono::milliseconds timeout);

  std::uint64_t inflight() const { return inflight_.load(std::memory_order_acquire); }
  std::uint64_t total_posted() const { return posted_.load(std::memory_order_acquire); }
  std::uint64_t total_matched() const { return matched_.load(std::memory_order_acquire); }

  // Fabric-wide snapshot of queued envelopes; equals inflight() whenever no
  // post/match is concurrently executing.
  std::uint64_t queued_total() const;

  // Unblocks every waiter with BackendFailure. Used on teardown after a rank
  // context failed.
  void shutdown();

  // One live backend session per rank at a time; restart replaces it.
  void register_session(RankId rank);
  void unregister_session(RankId rank);

  void set_trace(std::shared_ptr<TraceSink> sink);

 private:
  struct Mailbox {
    mutable std::mutex m;
    std::condition_variable cv;
    std::vector<std::deque<Envelope>> from;  // one FIFO channel per source
    std::map<std::tuple<RankId, std::uint32_t, std::int32_t>, std::uint64_t> next_seq;
    std::uint64_t arrival_counter = 0;
  };

  struct Candidate {
    std::size_t src;
    std::size_t pos;
    std::uint64_t arrival;
  };

  std::optional<Candidate> scan_locked(const Mailbox& box, std::optional<RankId> src_filter,
                                       std::optional<std::int32_t> tag_filter,
                                       std::uint32_t context_id) const;
  Envelope extract_locked(Mailbox& box, const Candidate& c);

  std::uint32_t nranks_;
  std::vector<std::unique_ptr<Mailbox>> boxes_;
  std::atomic<std::uint64_t> inflight_{0};
  std::atomic<std::uint64_t> posted_{0};
  std::atomic<std::uint64_t> matched_{0};
  std::atomic<bool> shutdown_{false};

  mutable std::mutex control_m_;
  std::condition_variable control_cv_;
  std::uint32_t control_arrived_ = 0;
  std::uint64_t control_sum_sent_ = 0;
  std::uint64_t control_sum_recv_ = 0;
  std::uint64_t control_round_no_ = 0;
  GlobalDecision control_decision_ = GlobalDecision::NotQuiescent;
  std::chrono::milliseconds control_timeout_{30000};

  std::mutex sessions_m_;
  std::vector<bool> session_active_;

  std::shared_ptr<TraceSink> trace_;
};

}  // namespace mpidesk
