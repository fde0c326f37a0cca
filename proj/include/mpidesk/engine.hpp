#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mpidesk/adapter.hpp"
#include "mpidesk/image.hpp"

namespace mpidesk {

// Checkpoint engine: interposes between the application and the adapter
// using virtual ids, records a creation recipe for every opaque object,
// enforces quiescence at checkpoint time, and restarts on a possibly
// different backend by replaying the log and rebinding the ids.
//
// One session per rank context. Checkpoint and restart are collective.
struct EngineRestart;

class EngineSession {
 public:
  static EngineSession start(std::string_view backend_name, NetworkFabric& fabric, RankId rank);

  // Collective: every rank calls with its own id. Binds a fresh adapter to
  // backend_name, replays the creation log (collectively where the original
  // calls were collective), verifies replayed objects against the recorded
  // metadata and returns the saved application blob.
  static EngineRestart restart(const std::filesystem::path& dir, std::string_view backend_name,
                               NetworkFabric& fabric, RankId rank);

  EngineSession(EngineSession&&) = default;
  EngineSession& operator=(EngineSession&&) = default;

  const std::string& backend_name() const { return adapter_.backend_name(); }
  RankId rank() const { return rank_; }
  std::uint32_t nranks() const { return nranks_; }
  AdapterInstance& adapter() { return adapter_; }

  std::uint32_t comm_size(VirtualId comm);
  std::uint32_t comm_rank(VirtualId comm);
  VirtualId comm_dup(VirtualId comm);
  VirtualId comm_split(VirtualId comm, std::int32_t color, std::int32_t key);
  void comm_free(VirtualId comm);

  VirtualId type_contiguous(std::uint32_t count, VirtualId base);
  std::uint64_t type_extent(VirtualId dtype);
  void type_free(VirtualId dtype);

  void send(const void* buf, std::uint32_t count, VirtualId dtype, std::int32_t dst,
            std::int32_t tag, VirtualId comm);
  AbiStatus recv(void* buf, std::uint32_t count, VirtualId dtype, std::int32_t src,
                 std::int32_t tag, VirtualId comm);
  VirtualId isend(const void* buf, std::uint32_t count, VirtualId dtype, std::int32_t dst,
                  std::int32_t tag, VirtualId comm);
  VirtualId irecv(void* buf, std::uint32_t count, VirtualId dtype, std::int32_t src,
                  std::int32_t tag, VirtualId comm);
  AbiStatus wait(VirtualId request);
  std::optional<AbiStatus> test(VirtualId request);

  void barrier(VirtualId comm);
  void bcast(void* buf, std::uint32_t count, VirtualId dtype, std::uint32_t root, VirtualId comm);
  void allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count, VirtualId dtype,
                 VirtualId op, VirtualId comm);
  void alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count, VirtualId dtype,
                VirtualId comm);

  // Totals of engine-mediated point-to-point completions. Collectives and
  // their internal traffic never count.
  std::pair<std::uint64_t, std::uint64_t> counters() const { return {sent_, recv_}; }
  std::size_t pending_count() const { return pending_.size(); }

  // Collective safe-point checkpoint: requires an empty pending-request set,
  // verifies global quiescence via control rounds (retry budget 3 with an
  // intervening barrier), then writes this rank's image; rank 0 writes the
  // manifest. The computation continues normally afterward.
  void checkpoint(std::span<const std::uint8_t> app_blob, const std::filesystem::path& dir);

  const std::vector<LogEntry>& creation_log() const { return log_; }

  // The image this rank would write at a checkpoint, minus quiescence checks.
  CheckpointImage snapshot_image(std::span<const std::uint8_t> app_blob) const;

 private:
  EngineSession(AdapterInstance adapter, NetworkFabric& fabric, RankId rank);

  AbiHandle abi_of(VirtualId vid, HandleKind want) const;
  VirtualId fresh_vid(HandleKind kind);
  void bind(VirtualId vid, AbiHandle abi);
  void append_entry(VirtualId vid, CreationRecipe recipe, std::uint32_t size, std::uint32_t rank);
  void mark_freed(VirtualId vid);
  void seed_predefined();
  void replay(const CheckpointImage& image);

  AdapterInstance adapter_;
  NetworkFabric* fabric_;
  RankId rank_;
  std::uint32_t nranks_;
  std::unordered_map<std::uint32_t, std::uint32_t> vid_to_abi_;
  std::unordered_map<std::uint32_t, std::size_t> log_index_;
  std::unordered_map<std::uint32_t, bool> pending_;  // request vid -> is_send
  std::array<std::uint32_t, kHandleKindCount> next_dynamic_{};
  std::vector<LogEntry> log_;
  std::uint64_t sent_ = 0;
  std::uint64_t recv_ = 0;
};

struct EngineRestart {
  EngineSession session;
  std::vector<std::uint8_t> blob;
};

}  // namespace mpidesk
