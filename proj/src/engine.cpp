#include "mpidesk/engine.hpp"

#include <fstream>

namespace mpidesk {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::BackendFailure, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::BackendFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out.flush()) raise(ErrorCode::BackendFailure, "failed writing " + path.string());
}

}  // namespace

EngineSession::EngineSession(AdapterInstance adapter, NetworkFabric& fabric, RankId rank)
    : adapter_(std::move(adapter)), fabric_(&fabric), rank_(rank), nranks_(fabric.nranks()) {
  next_dynamic_.fill(kPredefinedIndexLimit);
}

EngineSession EngineSession::start(std::string_view backend_name, NetworkFabric& fabric,
                                   RankId rank) {
  EngineSession e(AdapterInstance::bind(backend_name, fabric, rank), fabric, rank);
  e.seed_predefined();
  return e;
}

void EngineSession::seed_predefined() {
  for (auto* entry = abi_constants_begin(); entry != abi_constants_end(); ++entry) {
    if (!std::holds_alternative<AbiHandle>(entry->value)) continue;
    const AbiHandle h = std::get<AbiHandle>(entry->value);
    const VirtualId vid(h.raw());
    std::uint32_t size = 0;
    std::uint32_t rank_in = 0;
    if (!h.is_null()) {
      bind(vid, h);
      const HandleKind kind = decode_handle(h).first;
      if (kind == HandleKind::Comm) {
        size = adapter_.comm_size(h);
        rank_in = adapter_.comm_rank(h);
      } else if (kind == HandleKind::Datatype) {
        size = static_cast<std::uint32_t>(adapter_.type_extent(h));
      }
    }
    append_entry(vid, RecipePredefined{std::string(entry->name)}, size, rank_in);
  }
}

AbiHandle EngineSession::abi_of(VirtualId vid, HandleKind want) const {
  if (vid.kind_bits() != static_cast<std::uint32_t>(want)) {
    raise(ErrorCode::KindMismatch, std::string("expected a ") + kind_name(want) + " virtual id");
  }
  if (vid.is_null()) return ABI_COMM_NULL;
  auto it = vid_to_abi_.find(vid.raw());
  if (it == vid_to_abi_.end()) raise(ErrorCode::InvalidHandle, "unknown virtual id");
  return AbiHandle(it->second);
}

VirtualId EngineSession::fresh_vid(HandleKind kind) {
  const std::uint32_t index = next_dynamic_[static_cast<std::size_t>(kind)]++;
  return VirtualId(encode_handle(kind, index).raw());
}

void EngineSession::bind(VirtualId vid, AbiHandle abi) { vid_to_abi_[vid.raw()] = abi.raw(); }

void EngineSession::append_entry(VirtualId vid, CreationRecipe recipe, std::uint32_t size,
                                 std::uint32_t rank_in) {
  if (!vid.is_null()) log_index_[vid.raw()] = log_.size();
  log_.push_back(LogEntry{vid, std::move(recipe), size, rank_in, false});
}

void EngineSession::mark_freed(VirtualId vid) {
  auto it = log_index_.find(vid.raw());
  if (it != log_index_.end()) log_[it->second].freed = true;
  vid_to_abi_.erase(vid.raw());
}

std::uint32_t EngineSession::comm_size(VirtualId comm) {
  return adapter_.comm_size(abi_of(comm, HandleKind::Comm));
}

std::uint32_t EngineSession::comm_rank(VirtualId comm) {
  return adapter_.comm_rank(abi_of(comm, HandleKind::Comm));
}

VirtualId EngineSession::comm_dup(VirtualId comm) {
  const AbiHandle result = adapter_.comm_dup(abi_of(comm, HandleKind::Comm));
  const VirtualId vid = fresh_vid(HandleKind::Comm);
  bind(vid, result);
  append_entry(vid, RecipeCommDup{comm}, adapter_.comm_size(result), adapter_.comm_rank(result));
  return vid;
}

VirtualId EngineSession::comm_split(VirtualId comm, std::int32_t color, std::int32_t key) {
  const AbiHandle result = adapter_.comm_split(abi_of(comm, HandleKind::Comm), color, key);
  if (result.is_null()) {
    // Participation-only record: replay must still take part in the split.
    append_entry(kVidNull, RecipeCommSplit{comm, color, key}, 0, 0);
    return kVidNull;
  }
  const VirtualId vid = fresh_vid(HandleKind::Comm);
  bind(vid, result);
  append_entry(vid, RecipeCommSplit{comm, color, key}, adapter_.comm_size(result),
               adapter_.comm_rank(result));
  return vid;
}

void EngineSession::comm_free(VirtualId comm) {
  if (comm.is_predefined()) {
    raise(ErrorCode::InvalidHandle, "cannot free a predefined communicator");
  }
  adapter_.comm_free(abi_of(comm, HandleKind::Comm));
  mark_freed(comm);
}

VirtualId EngineSession::type_contiguous(std::uint32_t count, VirtualId base) {
  const AbiHandle result = adapter_.type_contiguous(count, abi_of(base, HandleKind::Datatype));
  const VirtualId vid = fresh_vid(HandleKind::Datatype);
  bind(vid, result);
  append_entry(vid, RecipeTypeContiguous{count, base},
               static_cast<std::uint32_t>(adapter_.type_extent(result)), 0);
  return vid;
}

std::uint64_t EngineSession::type_extent(VirtualId dtype) {
  return adapter_.type_extent(abi_of(dtype, HandleKind::Datatype));
}

void EngineSession::type_free(VirtualId dtype) {
  if (dtype.is_predefined()) raise(ErrorCode::InvalidHandle, "cannot free a predefined datatype");
  adapter_.type_free(abi_of(dtype, HandleKind::Datatype));
  mark_freed(dtype);
}

void EngineSession::send(const void* buf, std::uint32_t count, VirtualId dtype, std::int32_t dst,
                         std::int32_t tag, VirtualId comm) {
  adapter_.send(buf, count, abi_of(dtype, HandleKind::Datatype), dst, tag,
                abi_of(comm, HandleKind::Comm));
  ++sent_;
}

AbiStatus EngineSession::recv(void* buf, std::uint32_t count, VirtualId dtype, std::int32_t src,
                              std::int32_t tag, VirtualId comm) {
  const AbiStatus st = adapter_.recv(buf, count, abi_of(dtype, HandleKind::Datatype), src, tag,
                                     abi_of(comm, HandleKind::Comm));
  ++recv_;
  return st;
}

VirtualId EngineSession::isend(const void* buf, std::uint32_t count, VirtualId dtype,
                               std::int32_t dst, std::int32_t tag, VirtualId comm) {
  const AbiHandle req = adapter_.isend(buf, count, abi_of(dtype, HandleKind::Datatype), dst, tag,
                                       abi_of(comm, HandleKind::Comm));
  const VirtualId vid = fresh_vid(HandleKind::Request);
  bind(vid, req);
  pending_[vid.raw()] = true;
  return vid;
}

VirtualId EngineSession::irecv(void* buf, std::uint32_t count, VirtualId dtype, std::int32_t src,
                               std::int32_t tag, VirtualId comm) {
  const AbiHandle req = adapter_.irecv(buf, count, abi_of(dtype, HandleKind::Datatype), src, tag,
                                       abi_of(comm, HandleKind::Comm));
  const VirtualId vid = fresh_vid(HandleKind::Request);
  bind(vid, req);
  pending_[vid.raw()] = false;
  return vid;
}

AbiStatus EngineSession::wait(VirtualId request) {
  const AbiHandle req = abi_of(request, HandleKind::Request);
  const AbiStatus st = adapter_.wait(req);
  auto it = pending_.find(request.raw());
  if (it != pending_.end()) {
    if (it->second) {
      ++sent_;
    } else {
      ++recv_;
    }
    pending_.erase(it);
  }
  vid_to_abi_.erase(request.raw());
  return st;
}

std::optional<AbiStatus> EngineSession::test(VirtualId request) {
  const AbiHandle req = abi_of(request, HandleKind::Request);
  const std::optional<AbiStatus> st = adapter_.test(req);
  if (!st) return std::nullopt;
  auto it = pending_.find(request.raw());
  if (it != pending_.end()) {
    if (it->second) {
      ++sent_;
    } else {
      ++recv_;
    }
    pending_.erase(it);
  }
  vid_to_abi_.erase(request.raw());
  return st;
}

void EngineSession::barrier(VirtualId comm) { adapter_.barrier(abi_of(comm, HandleKind::Comm)); }

void EngineSession::bcast(void* buf, std::uint32_t count, VirtualId dtype, std::uint32_t root,
                          VirtualId comm) {
  adapter_.bcast(buf, count, abi_of(dtype, HandleKind::Datatype), root,
                 abi_of(comm, HandleKind::Comm));
}

void EngineSession::allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count,
                              VirtualId dtype, VirtualId op, VirtualId comm) {
  adapter_.allreduce(sendbuf, recvbuf, count, abi_of(dtype, HandleKind::Datatype),
                     abi_of(op, HandleKind::Op), abi_of(comm, HandleKind::Comm));
}

void EngineSession::alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count,
                             VirtualId dtype, VirtualId comm) {
  adapter_.alltoall(sendbuf, recvbuf, count, abi_of(dtype, HandleKind::Datatype),
                    abi_of(comm, HandleKind::Comm));
}

CheckpointImage EngineSession::snapshot_image(std::span<const std::uint8_t> app_blob) const {
  CheckpointImage image;
  image.rank = rank_;
  image.nranks = nranks_;
  image.sent = sent_;
  image.recv = recv_;
  image.log = log_;
  image.blob.assign(app_blob.begin(), app_blob.end());
  return image;
}

void EngineSession::checkpoint(std::span<const std::uint8_t> app_blob,
                               const std::filesystem::path& dir) {
  if (!pending_.empty()) {
    raise(ErrorCode::PendingAtCheckpoint, "nonblocking requests unresolved at checkpoint");
  }
  bool quiescent = false;
  for (int attempt = 0; attempt < 3; ++attempt) {
    if (fabric_->control_round(sent_, recv_) == GlobalDecision::Quiescent) {
      quiescent = true;
      break;
    }
    if (attempt < 2) barrier(kVidWorld);
  }
  if (!quiescent) {
    raise(ErrorCode::PendingAtCheckpoint, "fabric not quiescent after retry budget");
  }

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) raise(ErrorCode::BackendFailure, "cannot create checkpoint directory " + dir.string());
  write_file(dir / image_filename(rank_), serialize_image(snapshot_image(app_blob)));
  barrier(kVidWorld);  // every image is on disk before the manifest names it
  if (rank_ == 0) write_manifest(dir, nranks_);
  barrier(kVidWorld);
}

EngineRestart EngineSession::restart(const std::filesystem::path& dir,
                                                    std::string_view backend_name,
                                                    NetworkFabric& fabric, RankId rank) {
  const CheckpointManifest manifest = read_manifest(dir);
  if (manifest.nranks != fabric.nranks()) {
    raise(ErrorCode::BackendFailure, "fabric rank count does not match checkpoint manifest");
  }
  if (rank >= manifest.nranks) raise(ErrorCode::BackendFailure, "rank outside checkpoint");
  const CheckpointImage image = deserialize_image(read_file(dir / manifest.files[rank]));
  if (image.rank != rank || image.nranks != manifest.nranks) {
    raise(ErrorCode::BackendFailure, "checkpoint image does not match manifest");
  }

  EngineSession e(AdapterInstance::bind(backend_name, fabric, rank), fabric, rank);
  e.replay(image);
  e.sent_ = image.sent;
  e.recv_ = image.recv;
  return EngineRestart{std::move(e), image.blob};
}

void EngineSession::replay(const CheckpointImage& image) {
  // Pass 1: recreate every object in log order. Collective recipes line up
  // across ranks because each rank replays its own log in program order.
  for (const LogEntry& entry : image.log) {
    if (const auto* p = std::get_if<RecipePredefined>(&entry.recipe)) {
      const AbiConstant value = constant_lookup(p->name);
      if (!std::holds_alternative<AbiHandle>(value)) {
        raise(ErrorCode::BackendFailure, "predefined recipe names a non-handle constant");
      }
      const AbiHandle h = std::get<AbiHandle>(value);
      if (h.raw() != entry.vid.raw()) {
        raise(ErrorCode::ReplayMismatch, "predefined constant does not match its virtual id");
      }
      if (h.is_null()) {
        append_entry(entry.vid, entry.recipe, entry.recorded_size, entry.recorded_rank);
        continue;
      }
      const HandleKind kind = decode_handle(h).first;
      if (kind == HandleKind::Comm) {
        if (adapter_.comm_size(h) != entry.recorded_size ||
            adapter_.comm_rank(h) != entry.recorded_rank) {
          raise(ErrorCode::ReplayMismatch, "predefined communicator changed shape");
        }
      } else if (kind == HandleKind::Datatype) {
        if (adapter_.type_extent(h) != entry.recorded_size) {
          raise(ErrorCode::ReplayMismatch, "predefined datatype changed extent");
        }
      }
      bind(entry.vid, h);
      append_entry(entry.vid, entry.recipe, entry.recorded_size, entry.recorded_rank);
    } else if (const auto* d = std::get_if<RecipeCommDup>(&entry.recipe)) {
      const AbiHandle result = adapter_.comm_dup(abi_of(d->parent, HandleKind::Comm));
      if (adapter_.comm_size(result) != entry.recorded_size ||
          adapter_.comm_rank(result) != entry.recorded_rank) {
        raise(ErrorCode::ReplayMismatch, "replayed dup has different size or rank");
      }
      bind(entry.vid, result);
      append_entry(entry.vid, entry.recipe, entry.recorded_size, entry.recorded_rank);
    } else if (const auto* s = std::get_if<RecipeCommSplit>(&entry.recipe)) {
      const AbiHandle result =
          adapter_.comm_split(abi_of(s->parent, HandleKind::Comm), s->color, s->key);
      if (entry.vid.is_null()) {
        if (!result.is_null()) {
          raise(ErrorCode::ReplayMismatch, "replayed split produced an unexpected member");
        }
        append_entry(kVidNull, entry.recipe, 0, 0);
        continue;
      }
      if (result.is_null() || adapter_.comm_size(result) != entry.recorded_size ||
          adapter_.comm_rank(result) != entry.recorded_rank) {
        raise(ErrorCode::ReplayMismatch, "replayed split has different size or rank");
      }
      bind(entry.vid, result);
      append_entry(entry.vid, entry.recipe, entry.recorded_size, entry.recorded_rank);
    } else {
      const auto& t = std::get<RecipeTypeContiguous>(entry.recipe);
      const AbiHandle result =
          adapter_.type_contiguous(t.count, abi_of(t.base, HandleKind::Datatype));
      if (adapter_.type_extent(result) != entry.recorded_size) {
        raise(ErrorCode::ReplayMismatch, "replayed datatype has different extent");
      }
      bind(entry.vid, result);
      append_entry(entry.vid, entry.recipe, entry.recorded_size, 0);
    }
    const VirtualId vid = entry.vid;
    if (!vid.is_null() && !vid.is_predefined()) {
      auto& next = next_dynamic_[static_cast<std::size_t>(vid.kind_bits())];
      next = std::max(next, vid.index() + 1);
    }
  }

  // Pass 2: retire objects that were freed before the checkpoint. Frees are
  // local, so deferring them keeps dynamic index allocation identical while
  // letting earlier recipes reference their (then live) parents.
  for (const LogEntry& entry : image.log) {
    if (!entry.freed || entry.vid.is_null()) continue;
    if (entry.vid.kind_bits() == static_cast<std::uint32_t>(HandleKind::Comm)) {
      adapter_.comm_free(abi_of(entry.vid, HandleKind::Comm));
    } else {
      adapter_.type_free(abi_of(entry.vid, HandleKind::Datatype));
    }
    mark_freed(entry.vid);
  }
}

}  // namespace mpidesk
