#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "mpidesk/stack.hpp"

namespace mpidesk {

// Deterministic 1-D wave mini-app: explicit finite-difference update over a
// block-partitioned field with per-step halo exchange. The final state is a
// pure function of (length, steps, nranks), so its hash is the oracle every
// stack / backend / checkpoint combination must reproduce exactly.
struct WaveConfig {
  std::uint64_t length = 1024;
  std::uint32_t steps = 1000;
  std::optional<std::uint32_t> ckpt_at;
  std::filesystem::path ckpt_dir;
};

// Returns the hash of the final concatenated field; identical on all ranks.
std::uint64_t run_wave(Stack& stack, const WaveConfig& cfg);
std::uint64_t resume_wave(Stack& stack, std::span<const std::uint8_t> blob);

// Ring mini-app: every round each rank passes its value one step around the
// ring and folds in what arrives from the left, so wraparound message
// ordering is exercised and every rank stays active (checkpoints are
// collective). Final value is reduced over all ranks.
struct RingConfig {
  std::uint32_t steps = 1000;
  std::optional<std::uint32_t> ckpt_at;
  std::filesystem::path ckpt_dir;
};

std::uint64_t run_ring(Stack& stack, const RingConfig& cfg);
std::uint64_t resume_ring(Stack& stack, std::span<const std::uint8_t> blob);

// App tag stored at the head of a checkpoint blob ("wave", "ring", "bench");
// restart dispatches on it.
std::string blob_app_tag(std::span<const std::uint8_t> blob);

}  // namespace mpidesk
