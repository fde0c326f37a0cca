#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "mpidesk/abi.hpp"
#include "mpidesk/engine.hpp"

namespace mpidesk {

// The three configurations the paper's experiments compare: the application
// linked directly against a backend, through the adapter, and through the
// checkpoint engine on top of the adapter.
enum class StackKind { Native, Adapter, Engine };

const char* stack_kind_name(StackKind kind);
StackKind parse_stack_kind(std::string_view name);

enum class DtypeSel : std::uint8_t { Byte = 0, I32 = 1, I64 = 2, F64 = 3 };
enum class OpSel : std::uint8_t { Sum = 0, Max = 1, Min = 2, Prod = 3 };

constexpr std::uint64_t dtype_size(DtypeSel d) {
  switch (d) {
    case DtypeSel::Byte: return 1;
    case DtypeSel::I32: return 4;
    case DtypeSel::I64:
    case DtypeSel::F64: return 8;
  }
  return 1;
}

// Wildcards at the app surface; each stack maps them to its own sentinels.
inline constexpr std::int32_t kAppAnySource = -1;
inline constexpr std::int32_t kAppAnyTag = -1;

// Uniform per-rank surface the mini-apps and the benchmark harness run
// against. Operations act on the world communicator; the kind of status
// record returned is the same value type everywhere so application-visible
// results can be compared across stacks and backends.
class Stack {
 public:
  virtual ~Stack() = default;

  virtual StackKind kind() const = 0;
  virtual const std::string& backend_name() const = 0;
  virtual std::uint32_t rank() const = 0;
  virtual std::uint32_t size() const = 0;

  virtual void send(const void* buf, std::uint32_t count, DtypeSel dtype, std::int32_t dst,
                    std::int32_t tag) = 0;
  virtual AbiStatus recv(void* buf, std::uint32_t count, DtypeSel dtype, std::int32_t src,
                         std::int32_t tag) = 0;
  virtual void barrier() = 0;
  virtual void bcast(void* buf, std::uint32_t count, DtypeSel dtype, std::uint32_t root) = 0;
  virtual void allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count, DtypeSel dtype,
                         OpSel op) = 0;
  virtual void alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count,
                        DtypeSel dtype) = 0;

  virtual bool supports_checkpoint() const { return false; }
  virtual void checkpoint(std::span<const std::uint8_t> blob, const std::filesystem::path& dir);

  // Non-null only for stacks that own an adapter (--dump-table).
  virtual AdapterInstance* adapter_instance() { return nullptr; }
};

std::unique_ptr<Stack> make_stack(StackKind kind, std::string_view backend_name,
                                  NetworkFabric& fabric, RankId rank);

// Wraps a restored engine session (restart path).
std::unique_ptr<Stack> make_engine_stack(EngineSession session);

}  // namespace mpidesk
