#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

#include "mpidesk/error.hpp"

namespace mpidesk {

// The single standard ABI every upper layer compiles against: handle
// encoding, well-known constants, the status record, and error codes.
// Backends never see these values; the adapter translates at the boundary.

enum class HandleKind : std::uint32_t {
  Null = 0,
  Comm = 1,
  Group = 2,
  Datatype = 3,
  Op = 4,
  Request = 5,
};

inline constexpr std::uint32_t kHandleKindCount = 6;

constexpr const char* kind_name(HandleKind kind) {
  switch (kind) {
    case HandleKind::Null: return "null";
    case HandleKind::Comm: return "comm";
    case HandleKind::Group: return "group";
    case HandleKind::Datatype: return "datatype";
    case HandleKind::Op: return "op";
    case HandleKind::Request: return "request";
  }
  return "invalid";
}

inline constexpr std::uint32_t kAbiIndexBits = 28;
inline constexpr std::uint32_t kAbiIndexMax = (1u << kAbiIndexBits) - 1;

// Indexes below the limit are predefined objects; dynamically created
// objects are registered from the limit upward.
inline constexpr std::uint32_t kPredefinedIndexLimit = 4096;

// 32-bit kind-tagged handle: kind in the top 4 bits, index in the low 28.
// raw == 0 is the null handle.
class AbiHandle {
 public:
  constexpr AbiHandle() = default;
  constexpr explicit AbiHandle(std::uint32_t raw) : raw_(raw) {}

  constexpr std::uint32_t raw() const { return raw_; }
  constexpr std::uint32_t kind_bits() const { return raw_ >> kAbiIndexBits; }
  constexpr std::uint32_t index() const { return raw_ & kAbiIndexMax; }
  constexpr bool is_null() const { return raw_ == 0; }
  constexpr bool is_predefined() const { return index() < kPredefinedIndexLimit; }

  friend constexpr auto operator<=>(AbiHandle, AbiHandle) = default;

 private:
  std::uint32_t raw_ = 0;
};

AbiHandle encode_handle(HandleKind kind, std::uint32_t index);
std::pair<HandleKind, std::uint32_t> decode_handle(AbiHandle handle);

// Status record at the standard layer. A plain value type: adapters own the
// mapping from backend-internal status layouts onto these fields.
struct AbiStatus {
  std::int32_t source = -1;
  std::int32_t tag = -1;
  std::int32_t error = 0;
  std::uint64_t count_bytes = 0;

  friend bool operator==(const AbiStatus&, const AbiStatus&) = default;
};

inline constexpr std::int32_t ABI_ANY_SOURCE = -1;
inline constexpr std::int32_t ABI_ANY_TAG = -1;

inline constexpr AbiHandle ABI_COMM_NULL{0x00000000};
inline constexpr AbiHandle ABI_COMM_WORLD{0x10000000};
inline constexpr AbiHandle ABI_COMM_SELF{0x10000001};

inline constexpr AbiHandle ABI_BYTE{0x30000000};
inline constexpr AbiHandle ABI_I32{0x30000001};
inline constexpr AbiHandle ABI_I64{0x30000002};
inline constexpr AbiHandle ABI_F64{0x30000003};

inline constexpr AbiHandle ABI_SUM{0x40000000};
inline constexpr AbiHandle ABI_MAX{0x40000001};
inline constexpr AbiHandle ABI_MIN{0x40000002};
inline constexpr AbiHandle ABI_PROD{0x40000003};

using AbiConstant = std::variant<AbiHandle, std::int32_t>;

struct AbiConstantEntry {
  std::string_view name;
  AbiConstant value;
};

// The constants table in its fixed publication order.
const AbiConstantEntry* abi_constants_begin();
const AbiConstantEntry* abi_constants_end();

AbiConstant constant_lookup(std::string_view name);

// Rendering of the table as shipped in abi_constants.tsv.
std::string abi_constants_tsv();

}  // namespace mpidesk
