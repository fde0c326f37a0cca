#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string_view>

#include "mpidesk/abi.hpp"
#include "mpidesk/transport.hpp"

namespace mpidesk {

// Contract shared by the two lower-half runtimes. Handles in this interface
// are native raw values of the bound backend and mean nothing to the other
// one: IndexBackend packs a 0x44 marker, a kind nibble and a pool index into
// 32 bits; RefBackend hands out 64-bit keys from a counter starting at
// 0x7F00'0000'0000. The spaces are disjoint so a cross-backend leak is
// detectable.

using NativeHandle = std::uint64_t;

inline constexpr NativeHandle kNativeNull = 0;

// Byte offsets of the named fields inside a backend's status record. The
// two backends order their fields differently; consumers must pick fields
// by name through this layout, never by position.
struct NativeStatusLayout {
  std::size_t size;
  std::size_t src_off;
  std::size_t tag_off;
  std::size_t err_off;
  std::size_t bytes_off;
};

inline constexpr std::size_t kMaxNativeStatusSize = 32;

struct NativeSentinels {
  std::int32_t any_source;
  std::int32_t any_tag;
};

// Predefined objects created by backend init, in the fixed registration
// order the adapter pairs them with the standard ABI constants.
struct PredefinedNatives {
  NativeHandle comm_world;
  NativeHandle comm_self;
  std::array<NativeHandle, 4> datatypes;  // byte, i32, i64, f64
  std::array<NativeHandle, 4> ops;        // sum, max, min, prod
};

class BackendSession {
 public:
  virtual ~BackendSession() = default;

  virtual std::string_view name() const = 0;
  virtual RankId world_rank() const = 0;
  virtual NativeSentinels sentinels() const = 0;
  virtual NativeStatusLayout status_layout() const = 0;
  virtual const PredefinedNatives& predefined() const = 0;

  virtual std::uint32_t comm_size(NativeHandle comm) = 0;
  virtual std::uint32_t comm_rank(NativeHandle comm) = 0;
  virtual NativeHandle comm_dup(NativeHandle comm) = 0;
  // Collective: members sharing a color form a new communicator ordered by
  // (key, old rank); color -1 opts out and yields the null handle.
  virtual NativeHandle comm_split(NativeHandle comm, std::int32_t color, std::int32_t key) = 0;
  virtual void comm_free(NativeHandle comm) = 0;

  virtual NativeHandle type_contiguous(std::uint32_t count, NativeHandle base) = 0;
  virtual std::uint64_t type_extent(NativeHandle dtype) = 0;
  virtual void type_free(NativeHandle dtype) = 0;

  virtual void send(const void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t dst,
                    std::int32_t tag, NativeHandle comm) = 0;
  // status_out receives the backend's native status record (layout above).
  virtual void recv(void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t src,
                    std::int32_t tag, NativeHandle comm, void* status_out) = 0;
  virtual NativeHandle isend(const void* buf, std::uint32_t count, NativeHandle dtype,
                             std::int32_t dst, std::int32_t tag, NativeHandle comm) = 0;
  virtual NativeHandle irecv(void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t src,
                             std::int32_t tag, NativeHandle comm) = 0;
  virtual void wait(NativeHandle request, void* status_out) = 0;
  virtual bool test(NativeHandle request, void* status_out) = 0;

  virtual void barrier(NativeHandle comm) = 0;
  virtual void bcast(void* buf, std::uint32_t count, NativeHandle dtype, std::uint32_t root,
                     NativeHandle comm) = 0;
  // Elementwise reduction in canonical rank-ascending order
  // ((r0 op r1) op r2)...; identical in both backends so results are
  // bit-stable across a backend swap.
  virtual void allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count,
                         NativeHandle dtype, NativeHandle op, NativeHandle comm) = 0;
  virtual void alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count,
                        NativeHandle dtype, NativeHandle comm) = 0;
};

// Backend selection by name: "index" or "ref". Registers the session with
// the fabric; a second live session for the same rank is refused.
std::unique_ptr<BackendSession> make_backend(std::string_view name, NetworkFabric& fabric,
                                             RankId rank);

bool is_backend_name(std::string_view name);

std::unique_ptr<BackendSession> make_index_backend(NetworkFabric& fabric, RankId rank);
std::unique_ptr<BackendSession> make_ref_backend(NetworkFabric& fabric, RankId rank);

}  // namespace mpidesk
