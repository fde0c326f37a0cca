#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "mpidesk/apps.hpp"
#include "mpidesk/bytes.hpp"
#include "mpidesk/hash.hpp"

namespace mpidesk {

namespace {

constexpr double kCourantSq = 0.25;
constexpr std::int32_t kTagLeftward = 0;
constexpr std::int32_t kTagRightward = 1;
constexpr std::int32_t kTagGather = 2;

struct WaveState {
  std::uint64_t length = 0;        // global field length
  std::uint32_t steps_total = 0;
  std::uint32_t step = 0;
  std::vector<double> u_prev;      // this rank's block
  std::vector<double> u_curr;
};

std::vector<std::uint8_t> pack_wave(const WaveState& s) {
  ByteWriter w;
  w.str8("wave");
  w.u64(s.length);
  w.u32(s.steps_total);
  w.u32(s.step);
  w.u64(s.u_curr.size());
  for (double v : s.u_prev) w.f64(v);
  for (double v : s.u_curr) w.f64(v);
  return w.take();
}

WaveState unpack_wave(std::span<const std::uint8_t> blob) {
  ByteReader r(blob);
  if (r.str8() != "wave") raise(ErrorCode::BackendFailure, "blob is not a wave checkpoint");
  WaveState s;
  s.length = r.u64();
  s.steps_total = r.u32();
  s.step = r.u32();
  const std::uint64_t block = r.u64();
  s.u_prev.resize(block);
  s.u_curr.resize(block);
  for (double& v : s.u_prev) v = r.f64();
  for (double& v : s.u_curr) v = r.f64();
  return s;
}

// Fixed-end string plucked with one sine period; zero initial velocity.
double initial_displacement(std::uint64_t i, std::uint64_t length) {
  return std::sin(2.0 * std::numbers::pi * static_cast<double>(i) /
                  static_cast<double>(length));
}

std::uint64_t finish_wave(Stack& stack, const WaveState& s) {
  const std::uint32_t nranks = stack.size();
  const std::uint32_t rank = stack.rank();
  const std::uint64_t block = s.length / nranks;
  std::uint64_t hash = 0;
  if (rank == 0) {
    std::vector<double> field(s.length);
    std::memcpy(field.data(), s.u_curr.data(), block * sizeof(double));
    for (std::uint32_t r = 1; r < nranks; ++r) {
      stack.recv(field.data() + static_cast<std::uint64_t>(r) * block,
                 static_cast<std::uint32_t>(block), DtypeSel::F64, static_cast<std::int32_t>(r),
                 kTagGather);
    }
    hash = fnv1a64({reinterpret_cast<const std::uint8_t*>(field.data()),
                    field.size() * sizeof(double)});
  } else {
    stack.send(s.u_curr.data(), static_cast<std::uint32_t>(block), DtypeSel::F64, 0, kTagGather);
  }
  stack.bcast(&hash, sizeof(hash), DtypeSel::Byte, 0);
  return hash;
}

std::uint64_t step_wave(Stack& stack, WaveState s, const std::filesystem::path& ckpt_dir,
                        std::optional<std::uint32_t> ckpt_at) {
  const std::uint32_t nranks = stack.size();
  const std::uint32_t rank = stack.rank();
  const std::uint64_t block = s.length / nranks;
  const std::uint64_t base = static_cast<std::uint64_t>(rank) * block;
  std::vector<double> u_next(block);

  for (; s.step < s.steps_total; ++s.step) {
    if (ckpt_at && s.step == *ckpt_at) {
      stack.checkpoint(pack_wave(s), ckpt_dir);
    }

    double halo_left = 0.0;
    double halo_right = 0.0;
    if (rank > 0) {
      stack.send(&s.u_curr.front(), 1, DtypeSel::F64, static_cast<std::int32_t>(rank - 1),
                 kTagLeftward);
    }
    if (rank + 1 < nranks) {
      stack.send(&s.u_curr.back(), 1, DtypeSel::F64, static_cast<std::int32_t>(rank + 1),
                 kTagRightward);
    }
    if (rank + 1 < nranks) {
      stack.recv(&halo_right, 1, DtypeSel::F64, static_cast<std::int32_t>(rank + 1),
                 kTagLeftward);
    }
    if (rank > 0) {
      stack.recv(&halo_left, 1, DtypeSel::F64, static_cast<std::int32_t>(rank - 1),
                 kTagRightward);
    }

    for (std::uint64_t i = 0; i < block; ++i) {
      const std::uint64_t g = base + i;
      if (g == 0 || g == s.length - 1) {
        u_next[i] = 0.0;  // fixed ends
        continue;
      }
      const double left = i == 0 ? halo_left : s.u_curr[i - 1];
      const double right = i == block - 1 ? halo_right : s.u_curr[i + 1];
      u_next[i] = 2.0 * s.u_curr[i] - s.u_prev[i] +
                  kCourantSq * (left - 2.0 * s.u_curr[i] + right);
    }
    std::swap(s.u_prev, s.u_curr);
    std::swap(s.u_curr, u_next);
  }
  return finish_wave(stack, s);
}

}  // namespace

std::uint64_t run_wave(Stack& stack, const WaveConfig& cfg) {
  const std::uint32_t nranks = stack.size();
  if (cfg.length == 0 || cfg.length % nranks != 0) {
    raise(ErrorCode::BackendFailure, "wave length must be divisible by the rank count");
  }
  if (cfg.ckpt_at && (*cfg.ckpt_at == 0 || *cfg.ckpt_at >= cfg.steps)) {
    raise(ErrorCode::BackendFailure, "checkpoint step must satisfy 0 < step < steps");
  }
  if (cfg.ckpt_at && !stack.supports_checkpoint()) {
    raise(ErrorCode::BackendFailure, "checkpointing requires the engine stack");
  }

  WaveState s;
  s.length = cfg.length;
  s.steps_total = cfg.steps;
  s.step = 0;
  const std::uint64_t block = cfg.length / nranks;
  const std::uint64_t base = static_cast<std::uint64_t>(stack.rank()) * block;
  s.u_curr.resize(block);
  for (std::uint64_t i = 0; i < block; ++i) s.u_curr[i] = initial_displacement(base + i, cfg.length);
  s.u_prev = s.u_curr;

  return step_wave(stack, std::move(s), cfg.ckpt_dir, cfg.ckpt_at);
}

std::uint64_t resume_wave(Stack& stack, std::span<const std::uint8_t> blob) {
  WaveState s = unpack_wave(blob);
  if (s.length % stack.size() != 0 || s.u_curr.size() != s.length / stack.size()) {
    raise(ErrorCode::BackendFailure, "wave checkpoint does not fit this rank count");
  }
  return step_wave(stack, std::move(s), {}, std::nullopt);
}

}  // namespace mpidesk
