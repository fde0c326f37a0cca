#include "mpidesk/stack.hpp"

#include <cstring>

namespace mpidesk {

const char* stack_kind_name(StackKind kind) {
  switch (kind) {
    case StackKind::Native: return "native";
    case StackKind::Adapter: return "adapter";
    case StackKind::Engine: return "engine";
  }
  return "invalid";
}

StackKind parse_stack_kind(std::string_view name) {
  if (name == "native") return StackKind::Native;
  if (name == "adapter") return StackKind::Adapter;
  if (name == "engine") return StackKind::Engine;
  raise(ErrorCode::BackendFailure, "unknown stack: " + std::string(name));
}

void Stack::checkpoint(std::span<const std::uint8_t>, const std::filesystem::path&) {
  raise(ErrorCode::BackendFailure, "checkpointing requires the engine stack");
}

namespace {

class NativeStack final : public Stack {
 public:
  NativeStack(std::string_view backend_name, NetworkFabric& fabric, RankId rank)
      : backend_name_(backend_name), session_(make_backend(backend_name, fabric, rank)) {}

  StackKind kind() const override { return StackKind::Native; }
  const std::string& backend_name() const override { return backend_name_; }
  std::uint32_t rank() const override {
    return session_->comm_rank(session_->predefined().comm_world);
  }
  std::uint32_t size() const override {
    return session_->comm_size(session_->predefined().comm_world);
  }

  void send(const void* buf, std::uint32_t count, DtypeSel dtype, std::int32_t dst,
            std::int32_t tag) override {
    session_->send(buf, count, native_dtype(dtype), dst, tag, world());
  }

  AbiStatus recv(void* buf, std::uint32_t count, DtypeSel dtype, std::int32_t src,
                 std::int32_t tag) override {
    unsigned char native_status[kMaxNativeStatusSize] = {};
    session_->recv(buf, count, native_dtype(dtype),
                   src == kAppAnySource ? session_->sentinels().any_source : src,
                   tag == kAppAnyTag ? session_->sentinels().any_tag : tag, world(),
                   native_status);
    // The natively linked application reads its backend's own status record.
    const NativeStatusLayout layout = session_->status_layout();
    AbiStatus st;
    std::memcpy(&st.source, native_status + layout.src_off, sizeof(st.source));
    std::memcpy(&st.tag, native_status + layout.tag_off, sizeof(st.tag));
    std::memcpy(&st.error, native_status + layout.err_off, sizeof(st.error));
    std::memcpy(&st.count_bytes, native_status + layout.bytes_off, sizeof(st.count_bytes));
    return st;
  }

  void barrier() override { session_->barrier(world()); }

  void bcast(void* buf, std::uint32_t count, DtypeSel dtype, std::uint32_t root) override {
    session_->bcast(buf, count, native_dtype(dtype), root, world());
  }

  void allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count, DtypeSel dtype,
                 OpSel op) override {
    session_->allreduce(sendbuf, recvbuf, count, native_dtype(dtype),
                        session_->predefined().ops[static_cast<std::size_t>(op)], world());
  }

  void alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count,
                DtypeSel dtype) override {
    session_->alltoall(sendbuf, recvbuf, count, native_dtype(dtype), world());
  }

 private:
  NativeHandle world() const { return session_->predefined().comm_world; }
  NativeHandle native_dtype(DtypeSel d) const {
    return session_->predefined().datatypes[static_cast<std::size_t>(d)];
  }

  std::string backend_name_;
  std::unique_ptr<BackendSession> session_;
};

constexpr AbiHandle kAbiDtypes[4] = {ABI_BYTE, ABI_I32, ABI_I64, ABI_F64};
constexpr AbiHandle kAbiOps[4] = {ABI_SUM, ABI_MAX, ABI_MIN, ABI_PROD};

class AdapterStack final : public Stack {
 public:
  AdapterStack(std::string_view backend_name, NetworkFabric& fabric, RankId rank)
      : adapter_(AdapterInstance::bind(backend_name, fabric, rank)),
        rank_(adapter_.comm_rank(ABI_COMM_WORLD)),
        size_(adapter_.comm_size(ABI_COMM_WORLD)) {}

  StackKind kind() const override { return StackKind::Adapter; }
  const std::string& backend_name() const override { return adapter_.backend_name(); }
  std::uint32_t rank() const override { return rank_; }
  std::uint32_t size() const override { return size_; }

  void send(const void* buf, std::uint32_t count, DtypeSel dtype, std::int32_t dst,
            std::int32_t tag) override {
    adapter_.send(buf, count, kAbiDtypes[static_cast<std::size_t>(dtype)], dst, tag,
                  ABI_COMM_WORLD);
  }

  AbiStatus recv(void* buf, std::uint32_t count, DtypeSel dtype, std::int32_t src,
                 std::int32_t tag) override {
    return adapter_.recv(buf, count, kAbiDtypes[static_cast<std::size_t>(dtype)], src, tag,
                         ABI_COMM_WORLD);
  }

  void barrier() override { adapter_.barrier(ABI_COMM_WORLD); }

  void bcast(void* buf, std::uint32_t count, DtypeSel dtype, std::uint32_t root) override {
    adapter_.bcast(buf, count, kAbiDtypes[static_cast<std::size_t>(dtype)], root, ABI_COMM_WORLD);
  }

  void allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count, DtypeSel dtype,
                 OpSel op) override {
    adapter_.allreduce(sendbuf, recvbuf, count, kAbiDtypes[static_cast<std::size_t>(dtype)],
                       kAbiOps[static_cast<std::size_t>(op)], ABI_COMM_WORLD);
  }

  void alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count,
                DtypeSel dtype) override {
    adapter_.alltoall(sendbuf, recvbuf, count, kAbiDtypes[static_cast<std::size_t>(dtype)],
                      ABI_COMM_WORLD);
  }

  AdapterInstance* adapter_instance() override { return &adapter_; }

 private:
  AdapterInstance adapter_;
  std::uint32_t rank_;
  std::uint32_t size_;
};

constexpr VirtualId kVidDtypes[4] = {kVidByte, kVidI32, kVidI64, kVidF64};
constexpr VirtualId kVidOps[4] = {kVidSum, kVidMax, kVidMin, kVidProd};

class EngineStack final : public Stack {
 public:
  explicit EngineStack(EngineSession session) : engine_(std::move(session)) {}

  StackKind kind() const override { return StackKind::Engine; }
  const std::string& backend_name() const override { return engine_.backend_name(); }
  std::uint32_t rank() const override { return engine_.rank(); }
  std::uint32_t size() const override { return engine_.nranks(); }

  void send(const void* buf, std::uint32_t count, DtypeSel dtype, std::int32_t dst,
            std::int32_t tag) override {
    engine_.send(buf, count, kVidDtypes[static_cast<std::size_t>(dtype)], dst, tag, kVidWorld);
  }

  AbiStatus recv(void* buf, std::uint32_t count, DtypeSel dtype, std::int32_t src,
                 std::int32_t tag) override {
    return engine_.recv(buf, count, kVidDtypes[static_cast<std::size_t>(dtype)], src, tag,
                        kVidWorld);
  }

  void barrier() override { engine_.barrier(kVidWorld); }

  void bcast(void* buf, std::uint32_t count, DtypeSel dtype, std::uint32_t root) override {
    engine_.bcast(buf, count, kVidDtypes[static_cast<std::size_t>(dtype)], root, kVidWorld);
  }

  void allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count, DtypeSel dtype,
                 OpSel op) override {
    engine_.allreduce(sendbuf, recvbuf, count, kVidDtypes[static_cast<std::size_t>(dtype)],
                      kVidOps[static_cast<std::size_t>(op)], kVidWorld);
  }

  void alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count,
                DtypeSel dtype) override {
    engine_.alltoall(sendbuf, recvbuf, count, kVidDtypes[static_cast<std::size_t>(dtype)],
                     kVidWorld);
  }

  bool supports_checkpoint() const override { return true; }

  void checkpoint(std::span<const std::uint8_t> blob, const std::filesystem::path& dir) override {
    engine_.checkpoint(blob, dir);
  }

  AdapterInstance* adapter_instance() override { return &engine_.adapter(); }

 private:
  EngineSession engine_;
};

}  // namespace

std::unique_ptr<Stack> make_stack(StackKind kind, std::string_view backend_name,
                                  NetworkFabric& fabric, RankId rank) {
  switch (kind) {
    case StackKind::Native:
      return std::make_unique<NativeStack>(backend_name, fabric, rank);
    case StackKind::Adapter:
      return std::make_unique<AdapterStack>(backend_name, fabric, rank);
    case StackKind::Engine:
      return std::make_unique<EngineStack>(EngineSession::start(backend_name, fabric, rank));
  }
  raise(ErrorCode::BackendFailure, "unknown stack kind");
}

std::unique_ptr<Stack> make_engine_stack(EngineSession session) {
  return std::make_unique<EngineStack>(std::move(session));
}

}  // namespace mpidesk
