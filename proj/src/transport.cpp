#include "mpidesk/transport.hpp"

#include <cstdio>
#include <fstream>
#include <thread>

namespace mpidesk {

namespace {

class FileTrace final : public TraceSink {
 public:
  explicit FileTrace(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) raise(ErrorCode::BackendFailure, "cannot open trace file " + path);
  }

  void event(const char* what, const Envelope& e) override {
    std::lock_guard<std::mutex> lock(m_);
    char line[128];
    std::snprintf(line, sizeof(line), "EVT %s %u %u %u %d %llu %zu\n", what, e.src, e.dst,
                  e.context_id, e.tag, static_cast<unsigned long long>(e.seq),
                  e.payload.size());
    out_ << line;
    out_.flush();
  }

 private:
  std::mutex m_;
  std::ofstream out_;
};

}  // namespace

std::shared_ptr<TraceSink> make_file_trace(const std::string& path) {
  return std::make_shared<FileTrace>(path);
}

NetworkFabric::NetworkFabric(std::uint32_t nranks) : nranks_(nranks) {
  if (nranks == 0) raise(ErrorCode::BackendFailure, "fabric requires at least one rank");
  boxes_.reserve(nranks);
  for (std::uint32_t i = 0; i < nranks; ++i) {
    auto box = std::make_unique<Mailbox>();
    box->from.resize(nranks);
    boxes_.push_back(std::move(box));
  }
  session_active_.resize(nranks, false);
}

NetworkFabric::~NetworkFabric() { shutdown(); }

void NetworkFabric::post(Envelope e) {
  if (e.src >= nranks_ || e.dst >= nranks_) {
    raise(ErrorCode::BackendFailure, "post with rank outside the fabric");
  }
  Mailbox& box = *boxes_[e.dst];
  {
    std::lock_guard<std::mutex> lock(box.m);
    e.seq = box.next_seq[{e.src, e.context_id, e.tag}]++;
    e.arrival = box.arrival_counter++;
    inflight_.fetch_add(1, std::memory_order_acq_rel);
    posted_.fetch_add(1, std::memory_order_acq_rel);
    if (trace_) trace_->event("post", e);
    box.from[e.src].push_back(std::move(e));
  }
  box.cv.notify_all();
}

std::optional<NetworkFabric::Candidate> NetworkFabric::scan_locked(
    const Mailbox& box, std::optional<RankId> src_filter,
    std::optional<std::int32_t> tag_filter, std::uint32_t context_id) const {
  std::optional<Candidate> best;
  const std::size_t lo = src_filter ? *src_filter : 0;
  const std::size_t hi = src_filter ? *src_filter + 1 : box.from.size();
  for (std::size_t s = lo; s < hi; ++s) {
    const auto& q = box.from[s];
    for (std::size_t i = 0; i < q.size(); ++i) {
      const Envelope& e = q[i];
      if (e.context_id != context_id) continue;
      if (tag_filter && e.tag != *tag_filter) continue;
      if (!best || e.arrival < best->arrival) best = Candidate{s, i, e.arrival};
      break;  // earliest match from this source found; later ones arrived later
    }
  }
  return best;
}

Envelope NetworkFabric::extract_locked(Mailbox& box, const Candidate& c) {
  auto& q = box.from[c.src];
  Envelope e = std::move(q[c.pos]);
  q.erase(q.begin() + static_cast<std::ptrdiff_t>(c.pos));
  inflight_.fetch_sub(1, std::memory_order_acq_rel);
  matched_.fetch_add(1, std::memory_order_acq_rel);
  if (trace_) trace_->event("match", e);
  return e;
}

Envelope NetworkFabric::match(RankId dst, std::optional<RankId> src_filter,
                              std::optional<std::int32_t> tag_filter,
                              std::uint32_t context_id) {
  if (dst >= nranks_ || (src_filter && *src_filter >= nranks_)) {
    raise(ErrorCode::BackendFailure, "match with rank outside the fabric");
  }
  Mailbox& box = *boxes_[dst];
  // Pipelined peers usually have the envelope queued or about to be; a short
  // spin avoids the wakeup latency that otherwise dominates small messages.
  for (int spin = 0; spin < 64; ++spin) {
    {
      std::lock_guard<std::mutex> lock(box.m);
      if (shutdown_.load(std::memory_order_acquire)) {
        raise(ErrorCode::BackendFailure, "fabric shut down while matching");
      }
      if (auto c = scan_locked(box, src_filter, tag_filter, context_id)) {
        return extract_locked(box, *c);
      }
    }
    std::this_thread::yield();
  }
  std::unique_lock<std::mutex> lock(box.m);
  for (;;) {
    if (shutdown_.load(std::memory_order_acquire)) {
      raise(ErrorCode::BackendFailure, "fabric shut down while matching");
    }
    if (auto c = scan_locked(box, src_filter, tag_filter, context_id)) {
      return extract_locked(box, *c);
    }
    box.cv.wait(lock);
  }
}

std::optional<Envelope> NetworkFabric::try_match(RankId dst, std::optional<RankId> src_filter,
                                                 std::optional<std::int32_t> tag_filter,
                                                 std::uint32_t context_id) {
  if (dst >= nranks_ || (src_filter && *src_filter >= nranks_)) {
    raise(ErrorCode::BackendFailure, "match with rank outside the fabric");
  }
  Mailbox& box = *boxes_[dst];
  std::lock_guard<std::mutex> lock(box.m);
  if (auto c = scan_locked(box, src_filter, tag_filter, context_id)) {
    return extract_locked(box, *c);
  }
  return std::nullopt;
}

GlobalDecision NetworkFabric::control_round(std::uint64_t sent, std::uint64_t recv) {
  std::unique_lock<std::mutex> lock(control_m_);
  const std::uint64_t my_round = control_round_no_;
  control_sum_sent_ += sent;
  control_sum_recv_ += recv;
  ++control_arrived_;
  if (control_arrived_ == nranks_) {
    // Every context is parked in this round, so the inflight snapshot is
    // stable: no post or match can be executing concurrently.
    const bool balanced = control_sum_sent_ == control_sum_recv_;
    const bool drained = inflight_.load(std::memory_order_acquire) == 0;
    control_decision_ =
        (balanced && drained) ? GlobalDecision::Quiescent : GlobalDecision::NotQuiescent;
    control_arrived_ = 0;
    control_sum_sent_ = 0;
    control_sum_recv_ = 0;
    ++control_round_no_;
    control_cv_.notify_all();
    return control_decision_;
  }
  const bool advanced = control_cv_.wait_for(lock, control_timeout_, [&] {
    return control_round_no_ != my_round || shutdown_.load(std::memory_order_acquire);
  });
  if (shutdown_.load(std::memory_order_acquire)) {
    raise(ErrorCode::BackendFailure, "fabric shut down during control round");
  }
  if (!advanced || control_round_no_ == my_round) {
    raise(ErrorCode::BackendFailure, "control round timed out waiting for participants");
  }
  return control_decision_;
}

void NetworkFabric::set_control_timeout(std::chrono::milliseconds timeout) {
  std::lock_guard<std::mutex> lock(control_m_);
  control_timeout_ = timeout;
}

std::uint64_t NetworkFabric::queued_total() const {
  std::uint64_t total = 0;
  for (const auto& box : boxes_) {
    std::lock_guard<std::mutex> lock(box->m);
    for (const auto& q : box->from) total += q.size();
  }
  return total;
}

void NetworkFabric::shutdown() {
  shutdown_.store(true, std::memory_order_release);
  for (auto& box : boxes_) box->cv.notify_all();
  control_cv_.notify_all();
}

void NetworkFabric::register_session(RankId rank) {
  std::lock_guard<std::mutex> lock(sessions_m_);
  if (rank >= nranks_) raise(ErrorCode::BackendFailure, "rank outside the fabric");
  if (session_active_[rank]) {
    raise(ErrorCode::BackendFailure, "backend already initialized for this rank");
  }
  session_active_[rank] = true;
}

void NetworkFabric::unregister_session(RankId rank) {
  std::lock_guard<std::mutex> lock(sessions_m_);
  if (rank < nranks_) session_active_[rank] = false;
}

void NetworkFabric::set_trace(std::shared_ptr<TraceSink> sink) { trace_ = std::move(sink); }

}  // namespace mpidesk
