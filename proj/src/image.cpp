#include "mpidesk/image.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mpidesk/bytes.hpp"
#include "mpidesk/error.hpp"

namespace mpidesk {

namespace {

enum RecipeTag : std::uint8_t {
  kTagPredefined = 0,
  kTagCommDup = 1,
  kTagCommSplit = 2,
  kTagTypeContiguous = 3,
};

}  // namespace

std::vector<std::uint8_t> serialize_image(const CheckpointImage& image) {
  ByteWriter w;
  for (std::uint8_t b : kImageMagic) w.u8(b);
  w.u32(image.version);
  w.u32(image.rank);
  w.u32(image.nranks);
  w.u64(image.sent);
  w.u64(image.recv);
  w.u32(static_cast<std::uint32_t>(image.log.size()));
  for (const LogEntry& entry : image.log) {
    w.u32(entry.vid.raw());
    if (const auto* p = std::get_if<RecipePredefined>(&entry.recipe)) {
      w.u8(kTagPredefined);
      w.str8(p->name);
    } else if (const auto* d = std::get_if<RecipeCommDup>(&entry.recipe)) {
      w.u8(kTagCommDup);
      w.u32(d->parent.raw());
    } else if (const auto* s = std::get_if<RecipeCommSplit>(&entry.recipe)) {
      w.u8(kTagCommSplit);
      w.u32(s->parent.raw());
      w.i32(s->color);
      w.i32(s->key);
    } else {
      const auto& t = std::get<RecipeTypeContiguous>(entry.recipe);
      w.u8(kTagTypeContiguous);
      w.u32(t.count);
      w.u32(t.base.raw());
    }
    w.u32(entry.recorded_size);
    w.u32(entry.recorded_rank);
    w.u8(entry.freed ? 1 : 0);
  }
  w.u64(image.blob.size());
  w.bytes(image.blob);
  return w.take();
}

CheckpointImage deserialize_image(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  for (std::uint8_t expected : kImageMagic) {
    if (r.u8() != expected) raise(ErrorCode::BackendFailure, "bad checkpoint image magic");
  }
  CheckpointImage image;
  image.version = r.u32();
  if (image.version != CheckpointImage::kCheckpointFormatVersion) {
    raise(ErrorCode::BackendFailure, "unsupported checkpoint image version");
  }
  image.rank = r.u32();
  image.nranks = r.u32();
  image.sent = r.u64();
  image.recv = r.u64();
  const std::uint32_t log_len = r.u32();
  image.log.reserve(std::min<std::uint32_t>(log_len, 4096));
  for (std::uint32_t i = 0; i < log_len; ++i) {
    LogEntry entry;
    entry.vid = VirtualId(r.u32());
    switch (r.u8()) {
      case kTagPredefined:
        entry.recipe = RecipePredefined{r.str8()};
        break;
      case kTagCommDup:
        entry.recipe = RecipeCommDup{VirtualId(r.u32())};
        break;
      case kTagCommSplit: {
        RecipeCommSplit s;
        s.parent = VirtualId(r.u32());
        s.color = r.i32();
        s.key = r.i32();
        entry.recipe = s;
        break;
      }
      case kTagTypeContiguous: {
        RecipeTypeContiguous t;
        t.count = r.u32();
        t.base = VirtualId(r.u32());
        entry.recipe = t;
        break;
      }
      default:
        raise(ErrorCode::BackendFailure, "unknown creation recipe tag");
    }
    entry.recorded_size = r.u32();
    entry.recorded_rank = r.u32();
    entry.freed = r.u8() != 0;
    image.log.push_back(std::move(entry));
  }
  const std::uint64_t blob_len = r.u64();
  if (blob_len != r.remaining()) {
    raise(ErrorCode::BackendFailure, "checkpoint image blob length mismatch");
  }
  image.blob = r.bytes(blob_len);
  return image;
}

std::string image_filename(std::uint32_t rank) {
  char name[32];
  std::snprintf(name, sizeof(name), "rank_%u.mckp", rank);
  return name;
}

void write_manifest(const std::filesystem::path& dir, std::uint32_t nranks) {
  std::ofstream out(dir / "manifest.txt", std::ios::trunc);
  if (!out) raise(ErrorCode::BackendFailure, "cannot write checkpoint manifest");
  out << "nranks " << nranks << "\n";
  for (std::uint32_t r = 0; r < nranks; ++r) {
    out << "rank " << r << " " << image_filename(r) << "\n";
  }
  if (!out.flush()) raise(ErrorCode::BackendFailure, "failed writing checkpoint manifest");
}

CheckpointManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) raise(ErrorCode::BackendFailure, "cannot read checkpoint manifest");
  CheckpointManifest manifest;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "nranks") {
      ls >> manifest.nranks;
      manifest.files.resize(manifest.nranks);
    } else if (word == "rank") {
      std::uint32_t rank = 0;
      std::string file;
      ls >> rank >> file;
      if (rank >= manifest.files.size() || file.empty()) {
        raise(ErrorCode::BackendFailure, "malformed checkpoint manifest line");
      }
      manifest.files[rank] = file;
    }
  }
  if (manifest.nranks == 0) raise(ErrorCode::BackendFailure, "manifest missing nranks");
  for (const std::string& f : manifest.files) {
    if (f.empty()) raise(ErrorCode::BackendFailure, "manifest missing a rank image");
  }
  return manifest;
}

}  // namespace mpidesk
