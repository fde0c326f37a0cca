#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mpidesk/abi.hpp"

namespace mpidesk {

// Checkpoint-stable handle the application holds. Same kind|index layout as
// AbiHandle but in the engine's namespace: the value survives a backend
// replacement because restart rebinds it to a freshly created ABI handle.
class VirtualId {
 public:
  constexpr VirtualId() = default;
  constexpr explicit VirtualId(std::uint32_t raw) : raw_(raw) {}

  constexpr std::uint32_t raw() const { return raw_; }
  constexpr std::uint32_t kind_bits() const { return raw_ >> kAbiIndexBits; }
  constexpr std::uint32_t index() const { return raw_ & kAbiIndexMax; }
  constexpr bool is_null() const { return raw_ == 0; }
  constexpr bool is_predefined() const { return index() < kPredefinedIndexLimit; }

  friend constexpr auto operator<=>(VirtualId, VirtualId) = default;

 private:
  std::uint32_t raw_ = 0;
};

inline constexpr VirtualId kVidNull{0x00000000};
inline constexpr VirtualId kVidWorld{0x10000000};
inline constexpr VirtualId kVidSelf{0x10000001};
inline constexpr VirtualId kVidByte{0x30000000};
inline constexpr VirtualId kVidI32{0x30000001};
inline constexpr VirtualId kVidI64{0x30000002};
inline constexpr VirtualId kVidF64{0x30000003};
inline constexpr VirtualId kVidSum{0x40000000};
inline constexpr VirtualId kVidMax{0x40000001};
inline constexpr VirtualId kVidMin{0x40000002};
inline constexpr VirtualId kVidProd{0x40000003};

// How an object came to exist. Replayed in log order at restart to rebuild
// a semantically equivalent object under the new backend.
struct RecipePredefined {
  std::string name;
  friend bool operator==(const RecipePredefined&, const RecipePredefined&) = default;
};

struct RecipeCommDup {
  VirtualId parent;
  friend bool operator==(const RecipeCommDup&, const RecipeCommDup&) = default;
};

struct RecipeCommSplit {
  VirtualId parent;
  std::int32_t color;
  std::int32_t key;
  friend bool operator==(const RecipeCommSplit&, const RecipeCommSplit&) = default;
};

struct RecipeTypeContiguous {
  std::uint32_t count;
  VirtualId base;
  friend bool operator==(const RecipeTypeContiguous&, const RecipeTypeContiguous&) = default;
};

using CreationRecipe =
    std::variant<RecipePredefined, RecipeCommDup, RecipeCommSplit, RecipeTypeContiguous>;

// One creation event. vid 0 marks a collective call whose local result was
// the null handle (split with color -1): the rank must still participate at
// replay, but nothing gets bound. recorded_size/recorded_rank hold the
// (size, rank) of communicators and the extent of datatypes for replay
// verification. Freed objects stay in the log with the flag set so replay
// allocates dynamic indexes exactly as the original run did.
struct LogEntry {
  VirtualId vid;
  CreationRecipe recipe;
  std::uint32_t recorded_size = 0;
  std::uint32_t recorded_rank = 0;
  bool freed = false;

  friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

// Per-rank checkpoint: counters, creation log and the application's opaque
// state blob. Holds no backend-native values; predefined objects appear
// symbolically by constant name and everything else as VirtualIds.
struct CheckpointImage {
  std::uint32_t version = kCheckpointFormatVersion;
  std::uint32_t rank = 0;
  std::uint32_t nranks = 0;
  std::uint64_t sent = 0;
  std::uint64_t recv = 0;
  std::vector<LogEntry> log;
  std::vector<std::uint8_t> blob;

  static constexpr std::uint32_t kCheckpointFormatVersion = 1;

  friend bool operator==(const CheckpointImage&, const CheckpointImage&) = default;
};

inline constexpr std::uint8_t kImageMagic[4] = {'M', 'C', 'K', 'P'};

std::vector<std::uint8_t> serialize_image(const CheckpointImage& image);
CheckpointImage deserialize_image(std::span<const std::uint8_t> bytes);

std::string image_filename(std::uint32_t rank);

struct CheckpointManifest {
  std::uint32_t nranks = 0;
  std::vector<std::string> files;  // indexed by rank
};

void write_manifest(const std::filesystem::path& dir, std::uint32_t nranks);
CheckpointManifest read_manifest(const std::filesystem::path& dir);

}  // namespace mpidesk
