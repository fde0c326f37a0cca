#include "mpidesk/abi.hpp"

#include <array>
#include <cstdio>

namespace mpidesk {

AbiHandle encode_handle(HandleKind kind, std::uint32_t index) {
  if (index > kAbiIndexMax) {
    raise(ErrorCode::InvalidHandle, "handle index does not fit in 28 bits");
  }
  return AbiHandle((static_cast<std::uint32_t>(kind) << kAbiIndexBits) | index);
}

std::pair<HandleKind, std::uint32_t> decode_handle(AbiHandle handle) {
  const std::uint32_t kind_bits = handle.kind_bits();
  if (kind_bits >= kHandleKindCount) {
    raise(ErrorCode::InvalidHandle, "undefined handle kind bits");
  }
  return {static_cast<HandleKind>(kind_bits), handle.index()};
}

namespace {

constexpr std::array<AbiConstantEntry, 13> kConstants{{
    {"ABI_COMM_WORLD", ABI_COMM_WORLD},
    {"ABI_COMM_SELF", ABI_COMM_SELF},
    {"ABI_COMM_NULL", ABI_COMM_NULL},
    {"ABI_ANY_SOURCE", ABI_ANY_SOURCE},
    {"ABI_ANY_TAG", ABI_ANY_TAG},
    {"ABI_BYTE", ABI_BYTE},
    {"ABI_I32", ABI_I32},
    {"ABI_I64", ABI_I64},
    {"ABI_F64", ABI_F64},
    {"ABI_SUM", ABI_SUM},
    {"ABI_MAX", ABI_MAX},
    {"ABI_MIN", ABI_MIN},
    {"ABI_PROD", ABI_PROD},
}};

}  // namespace

const AbiConstantEntry* abi_constants_begin() { return kConstants.data(); }
const AbiConstantEntry* abi_constants_end() { return kConstants.data() + kConstants.size(); }

AbiConstant constant_lookup(std::string_view name) {
  for (const auto& entry : kConstants) {
    if (entry.name == name) {
      return entry.value;
    }
  }
  raise(ErrorCode::InvalidHandle, "unknown ABI constant: " + std::string(name));
}

std::string abi_constants_tsv() {
  std::string out = "name\tkind\traw_hex\n";
  char line[96];
  for (const auto& entry : kConstants) {
    if (std::holds_alternative<AbiHandle>(entry.value)) {
      const AbiHandle h = std::get<AbiHandle>(entry.value);
      const HandleKind kind = decode_handle(h).first;
      std::snprintf(line, sizeof(line), "%s\t%s\t0x%08x\n",
                    std::string(entry.name).c_str(), kind_name(kind), h.raw());
    } else {
      const auto v = static_cast<std::uint32_t>(std::get<std::int32_t>(entry.value));
      std::snprintf(line, sizeof(line), "%s\ti32\t0x%08x\n",
                    std::string(entry.name).c_str(), v);
    }
    out += line;
  }
  return out;
}

}  // namespace mpidesk
