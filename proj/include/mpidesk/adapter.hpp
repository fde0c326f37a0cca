#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>

#include "mpidesk/abi.hpp"
#include "mpidesk/backend.hpp"

namespace mpidesk {

// Translation layer exposing the standard ABI on top of whichever backend is
// bound at run time. Owns the per-rank bidirectional handle table, the
// wildcard sentinel mapping, and the field-by-name status conversion.
// Exactly one backend per instance; rebinding means a fresh instance.
class AdapterInstance {
 public:
  static AdapterInstance bind(std::string_view backend_name, NetworkFabric& fabric, RankId rank);

  AdapterInstance(AdapterInstance&&) = default;
  AdapterInstance& operator=(AdapterInstance&&) = default;

  const std::string& backend_name() const { return backend_name_; }
  BackendSession& session() { return *session_; }

  // Table access. abi_to_native requires a registered handle; native_to_abi
  // registers unseen natives under a fresh dynamic index (>= 4096) and is
  // idempotent per raw value.
  NativeHandle abi_to_native(AbiHandle h) const;
  AbiHandle native_to_abi(HandleKind kind, NativeHandle raw);

  std::uint32_t comm_size(AbiHandle comm);
  std::uint32_t comm_rank(AbiHandle comm);
  AbiHandle comm_dup(AbiHandle comm);
  AbiHandle comm_split(AbiHandle comm, std::int32_t color, std::int32_t key);
  void comm_free(AbiHandle comm);

  AbiHandle type_contiguous(std::uint32_t count, AbiHandle base);
  std::uint64_t type_extent(AbiHandle dtype);
  void type_free(AbiHandle dtype);

  void send(const void* buf, std::uint32_t count, AbiHandle dtype, std::int32_t dst,
            std::int32_t tag, AbiHandle comm);
  AbiStatus recv(void* buf, std::uint32_t count, AbiHandle dtype, std::int32_t src,
                 std::int32_t tag, AbiHandle comm);
  AbiHandle isend(const void* buf, std::uint32_t count, AbiHandle dtype, std::int32_t dst,
                  std::int32_t tag, AbiHandle comm);
  AbiHandle irecv(void* buf, std::uint32_t count, AbiHandle dtype, std::int32_t src,
                  std::int32_t tag, AbiHandle comm);
  AbiStatus wait(AbiHandle request);
  std::optional<AbiStatus> test(AbiHandle request);

  void barrier(AbiHandle comm);
  void bcast(void* buf, std::uint32_t count, AbiHandle dtype, std::uint32_t root, AbiHandle comm);
  void allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count, AbiHandle dtype,
                 AbiHandle op, AbiHandle comm);
  void alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count, AbiHandle dtype,
                AbiHandle comm);

  // Debug dump: one line per registered pair, "kind<TAB>abi_hex<TAB>native_hex".
  void dump_table(std::ostream& out) const;

  // Test hook: check abi->native->abi and native->abi->native identities
  // over every registered pair.
  bool table_is_bijective() const;

 private:
  explicit AdapterInstance(std::string_view backend_name);

  NativeHandle need(AbiHandle h, HandleKind want) const;
  void register_pair(HandleKind kind, AbiHandle abi, NativeHandle native);
  void unregister(AbiHandle h);
  AbiStatus read_status(const unsigned char* native_status) const;
  std::int32_t translate_source(std::int32_t src) const;
  std::int32_t translate_tag(std::int32_t tag) const;

  std::string backend_name_;
  std::unique_ptr<BackendSession> session_;
  std::array<std::unordered_map<std::uint32_t, NativeHandle>, kHandleKindCount> abi_to_native_;
  std::array<std::unordered_map<NativeHandle, std::uint32_t>, kHandleKindCount> native_to_abi_;
  std::array<std::uint32_t, kHandleKindCount> next_dynamic_{};
};

}  // namespace mpidesk
