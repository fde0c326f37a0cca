#include "mpidesk/apps.hpp"
#include "mpidesk/bytes.hpp"

namespace mpidesk {

namespace {

constexpr std::int32_t kTagRing = 3;

struct RingState {
  std::uint32_t steps_total = 0;
  std::uint32_t step = 0;
  std::uint64_t value = 0;
};

std::vector<std::uint8_t> pack_ring(const RingState& s) {
  ByteWriter w;
  w.str8("ring");
  w.u32(s.steps_total);
  w.u32(s.step);
  w.u64(s.value);
  return w.take();
}

RingState unpack_ring(std::span<const std::uint8_t> blob) {
  ByteReader r(blob);
  if (r.str8() != "ring") raise(ErrorCode::BackendFailure, "blob is not a ring checkpoint");
  RingState s;
  s.steps_total = r.u32();
  s.step = r.u32();
  s.value = r.u64();
  return s;
}

std::uint64_t step_ring(Stack& stack, RingState s, const std::filesystem::path& ckpt_dir,
                        std::optional<std::uint32_t> ckpt_at) {
  const std::uint32_t n = stack.size();
  const std::uint32_t rank = stack.rank();
  const std::int32_t right = static_cast<std::int32_t>((rank + 1) % n);
  const std::int32_t left = static_cast<std::int32_t>((rank + n - 1) % n);

  for (; s.step < s.steps_total; ++s.step) {
    if (ckpt_at && s.step == *ckpt_at) {
      stack.checkpoint(pack_ring(s), ckpt_dir);
    }
    stack.send(&s.value, 1, DtypeSel::I64, right, kTagRing);
    std::uint64_t from_left = 0;
    stack.recv(&from_left, 1, DtypeSel::I64, left, kTagRing);
    s.value = from_left * 31 + rank + 1;
  }

  std::uint64_t total = 0;
  stack.allreduce(&s.value, &total, 1, DtypeSel::I64, OpSel::Sum);
  return total;
}

}  // namespace

std::uint64_t run_ring(Stack& stack, const RingConfig& cfg) {
  if (cfg.ckpt_at && (*cfg.ckpt_at == 0 || *cfg.ckpt_at >= cfg.steps)) {
    raise(ErrorCode::BackendFailure, "checkpoint step must satisfy 0 < step < steps");
  }
  if (cfg.ckpt_at && !stack.supports_checkpoint()) {
    raise(ErrorCode::BackendFailure, "checkpointing requires the engine stack");
  }
  RingState s;
  s.steps_total = cfg.steps;
  s.step = 0;
  s.value = stack.rank();
  return step_ring(stack, s, cfg.ckpt_dir, cfg.ckpt_at);
}

std::uint64_t resume_ring(Stack& stack, std::span<const std::uint8_t> blob) {
  return step_ring(stack, unpack_ring(blob), {}, std::nullopt);
}

std::string blob_app_tag(std::span<const std::uint8_t> blob) {
  ByteReader r(blob);
  return r.str8();
}

}  // namespace mpidesk
