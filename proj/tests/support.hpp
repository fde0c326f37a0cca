#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "mpidesk/error.hpp"
#include "mpidesk/hash.hpp"

namespace mpidesk::test {

inline ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const AbiError& e) {
    return e.code();
  }
  return ErrorCode::Success;
}

// Independent serial oracle for the wave mini-app: the same finite-difference
// update on one undistributed array. Identical IEEE arithmetic per element,
// so the hash must match the halo-exchange version bit for bit.
inline std::uint64_t serial_wave_hash(std::uint64_t length, std::uint32_t steps) {
  std::vector<double> u_prev(length), u_curr(length), u_next(length);
  for (std::uint64_t i = 0; i < length; ++i) {
    u_curr[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) /
                         static_cast<double>(length));
  }
  u_prev = u_curr;
  for (std::uint32_t s = 0; s < steps; ++s) {
    for (std::uint64_t i = 0; i < length; ++i) {
      if (i == 0 || i == length - 1) {
        u_next[i] = 0.0;
        continue;
      }
      u_next[i] = 2.0 * u_curr[i] - u_prev[i] +
                  0.25 * (u_curr[i - 1] - 2.0 * u_curr[i] + u_curr[i + 1]);
    }
    std::swap(u_prev, u_curr);
    std::swap(u_curr, u_next);
  }
  return fnv1a64({reinterpret_cast<const std::uint8_t*>(u_curr.data()),
                  u_curr.size() * sizeof(double)});
}

// Serial ring oracle: one synchronous shift per round.
inline std::uint64_t serial_ring_total(std::uint32_t steps, std::uint32_t n) {
  std::vector<std::uint64_t> v(n), next(n);
  for (std::uint32_t r = 0; r < n; ++r) v[r] = r;
  for (std::uint32_t s = 0; s < steps; ++s) {
    for (std::uint32_t r = 0; r < n; ++r) next[r] = v[(r + n - 1) % n] * 31 + r + 1;
    std::swap(v, next);
  }
  std::uint64_t total = 0;
  for (std::uint64_t x : v) total += x;
  return total;
}

// Byte-level purity scan of a serialized checkpoint image: walks the format
// independently of the deserializer and counts values from the two native
// handle spaces (0x44-marker 32-bit words, 64-bit keys at or above
// 0x7F0000000000). Every engine-written integer field is checked, and the
// non-string metadata bytes are additionally swept with sliding windows.
// The app blob is upper-half memory and is exactly what a checkpoint is
// meant to contain, so only its length field is engine-owned.
inline int scan_image_for_native_values(std::span<const std::uint8_t> bytes) {
  int violations = 0;
  std::size_t pos = 0;
  const auto u8 = [&] { return bytes[pos++]; };
  const auto u32 = [&] {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
    return v;
  };
  const auto u64 = [&] {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
    return v;
  };
  const auto check32 = [&](std::uint32_t v) {
    if ((v >> 24) == 0x44 && ((v >> 20) & 0xF) <= 5) ++violations;
  };
  const auto check64 = [&](std::uint64_t v) {
    if (v >= 0x7F0000000000ull && v < 0x800000000000ull) ++violations;
  };

  std::vector<std::pair<std::size_t, std::size_t>> scannable;  // [begin, end)
  std::size_t region_begin = pos;

  pos += 4;  // magic
  u32();     // version
  u32();     // rank
  u32();     // nranks
  check64(u64());  // sent
  check64(u64());  // recv
  const std::uint32_t log_len = u32();
  for (std::uint32_t i = 0; i < log_len; ++i) {
    check32(u32());  // vid
    const std::uint8_t tag = u8();
    if (tag == 0) {
      scannable.emplace_back(region_begin, pos);  // close region before the string
      const std::uint8_t len = u8();
      pos += len;
      region_begin = pos;
    } else if (tag == 1) {
      check32(u32());  // parent
    } else if (tag == 2) {
      check32(u32());  // parent
      u32();           // color (application-chosen integer, not a handle)
      u32();           // key
    } else {
      u32();           // count
      check32(u32());  // base
    }
    u32();  // recorded_size
    u32();  // recorded_rank
    u8();   // freed
  }
  const std::uint64_t blob_len = u64();
  check64(blob_len);
  scannable.emplace_back(region_begin, pos);  // metadata ends where the blob starts
  pos += blob_len;

  for (const auto& [begin, end] : scannable) {
    for (std::size_t i = begin; i + 4 <= end; ++i) {
      std::uint32_t w = 0;
      for (int b = 0; b < 4; ++b) w |= static_cast<std::uint32_t>(bytes[i + b]) << (8 * b);
      check32(w);
    }
    for (std::size_t i = begin; i + 8 <= end; ++i) {
      std::uint64_t w = 0;
      for (int b = 0; b < 8; ++b) w |= static_cast<std::uint64_t>(bytes[i + b]) << (8 * b);
      check64(w);
    }
  }
  return violations;
}

}  // namespace mpidesk::test
