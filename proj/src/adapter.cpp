#include "mpidesk/adapter.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <vector>

namespace mpidesk {

AdapterInstance::AdapterInstance(std::string_view backend_name) : backend_name_(backend_name) {
  next_dynamic_.fill(kPredefinedIndexLimit);
}

AdapterInstance AdapterInstance::bind(std::string_view backend_name, NetworkFabric& fabric,
                                      RankId rank) {
  AdapterInstance a(backend_name);
  a.session_ = make_backend(backend_name, fabric, rank);
  const PredefinedNatives& pre = a.session_->predefined();
  a.register_pair(HandleKind::Comm, ABI_COMM_WORLD, pre.comm_world);
  a.register_pair(HandleKind::Comm, ABI_COMM_SELF, pre.comm_self);
  const std::array<AbiHandle, 4> dtypes{ABI_BYTE, ABI_I32, ABI_I64, ABI_F64};
  const std::array<AbiHandle, 4> ops{ABI_SUM, ABI_MAX, ABI_MIN, ABI_PROD};
  for (std::size_t i = 0; i < 4; ++i) {
    a.register_pair(HandleKind::Datatype, dtypes[i], pre.datatypes[i]);
    a.register_pair(HandleKind::Op, ops[i], pre.ops[i]);
  }
  return a;
}

void AdapterInstance::register_pair(HandleKind kind, AbiHandle abi, NativeHandle native) {
  abi_to_native_[static_cast<std::size_t>(kind)][abi.raw()] = native;
  native_to_abi_[static_cast<std::size_t>(kind)][native] = abi.raw();
}

void AdapterInstance::unregister(AbiHandle h) {
  const auto kind = static_cast<std::size_t>(h.kind_bits());
  auto& fwd = abi_to_native_[kind];
  auto it = fwd.find(h.raw());
  if (it == fwd.end()) return;
  native_to_abi_[kind].erase(it->second);
  fwd.erase(it);
}

NativeHandle AdapterInstance::abi_to_native(AbiHandle h) const {
  if (h.is_null()) return kNativeNull;
  if (h.kind_bits() >= kHandleKindCount) {
    raise(ErrorCode::KindMismatch, "handle kind bits out of range");
  }
  const auto& fwd = abi_to_native_[h.kind_bits()];
  auto it = fwd.find(h.raw());
  if (it == fwd.end()) raise(ErrorCode::InvalidHandle, "ABI handle not registered");
  return it->second;
}

AbiHandle AdapterInstance::native_to_abi(HandleKind kind, NativeHandle raw) {
  if (raw == kNativeNull) return ABI_COMM_NULL;
  auto& rev = native_to_abi_[static_cast<std::size_t>(kind)];
  auto it = rev.find(raw);
  if (it != rev.end()) return AbiHandle(it->second);
  const AbiHandle fresh = encode_handle(kind, next_dynamic_[static_cast<std::size_t>(kind)]++);
  register_pair(kind, fresh, raw);
  return fresh;
}

NativeHandle AdapterInstance::need(AbiHandle h, HandleKind want) const {
  if (h.kind_bits() != static_cast<std::uint32_t>(want)) {
    raise(ErrorCode::KindMismatch, std::string("expected a ") + kind_name(want) + " handle");
  }
  return abi_to_native(h);
}

AbiStatus AdapterInstance::read_status(const unsigned char* native_status) const {
  // Field-by-field by name through the backend's published layout; the two
  // backends order these fields differently, so a byte copy is never valid.
  const NativeStatusLayout layout = session_->status_layout();
  AbiStatus st;
  std::memcpy(&st.source, native_status + layout.src_off, sizeof(st.source));
  std::memcpy(&st.tag, native_status + layout.tag_off, sizeof(st.tag));
  std::memcpy(&st.error, native_status + layout.err_off, sizeof(st.error));
  std::memcpy(&st.count_bytes, native_status + layout.bytes_off, sizeof(st.count_bytes));
  return st;
}

std::int32_t AdapterInstance::translate_source(std::int32_t src) const {
  if (src == ABI_ANY_SOURCE) return session_->sentinels().any_source;
  if (src < 0) raise(ErrorCode::BackendFailure, "negative source rank is not a wildcard");
  return src;
}

std::int32_t AdapterInstance::translate_tag(std::int32_t tag) const {
  if (tag == ABI_ANY_TAG) return session_->sentinels().any_tag;
  if (tag < 0) raise(ErrorCode::BackendFailure, "negative tag is not a wildcard");
  return tag;
}

std::uint32_t AdapterInstance::comm_size(AbiHandle comm) {
  return session_->comm_size(need(comm, HandleKind::Comm));
}

std::uint32_t AdapterInstance::comm_rank(AbiHandle comm) {
  return session_->comm_rank(need(comm, HandleKind::Comm));
}

AbiHandle AdapterInstance::comm_dup(AbiHandle comm) {
  return native_to_abi(HandleKind::Comm, session_->comm_dup(need(comm, HandleKind::Comm)));
}

AbiHandle AdapterInstance::comm_split(AbiHandle comm, std::int32_t color, std::int32_t key) {
  return native_to_abi(HandleKind::Comm,
                       session_->comm_split(need(comm, HandleKind::Comm), color, key));
}

void AdapterInstance::comm_free(AbiHandle comm) {
  session_->comm_free(need(comm, HandleKind::Comm));
  unregister(comm);
}

AbiHandle AdapterInstance::type_contiguous(std::uint32_t count, AbiHandle base) {
  return native_to_abi(HandleKind::Datatype,
                       session_->type_contiguous(count, need(base, HandleKind::Datatype)));
}

std::uint64_t AdapterInstance::type_extent(AbiHandle dtype) {
  return session_->type_extent(need(dtype, HandleKind::Datatype));
}

void AdapterInstance::type_free(AbiHandle dtype) {
  session_->type_free(need(dtype, HandleKind::Datatype));
  unregister(dtype);
}

void AdapterInstance::send(const void* buf, std::uint32_t count, AbiHandle dtype,
                           std::int32_t dst, std::int32_t tag, AbiHandle comm) {
  if (tag < 0) raise(ErrorCode::BackendFailure, "send tag must be non-negative");
  session_->send(buf, count, need(dtype, HandleKind::Datatype), dst, tag,
                 need(comm, HandleKind::Comm));
}

AbiStatus AdapterInstance::recv(void* buf, std::uint32_t count, AbiHandle dtype, std::int32_t src,
                                std::int32_t tag, AbiHandle comm) {
  unsigned char native_status[kMaxNativeStatusSize] = {};
  session_->recv(buf, count, need(dtype, HandleKind::Datatype), translate_source(src),
                 translate_tag(tag), need(comm, HandleKind::Comm), native_status);
  return read_status(native_status);
}

AbiHandle AdapterInstance::isend(const void* buf, std::uint32_t count, AbiHandle dtype,
                                 std::int32_t dst, std::int32_t tag, AbiHandle comm) {
  if (tag < 0) raise(ErrorCode::BackendFailure, "send tag must be non-negative");
  const NativeHandle req = session_->isend(buf, count, need(dtype, HandleKind::Datatype), dst,
                                           tag, need(comm, HandleKind::Comm));
  return native_to_abi(HandleKind::Request, req);
}

AbiHandle AdapterInstance::irecv(void* buf, std::uint32_t count, AbiHandle dtype,
                                 std::int32_t src, std::int32_t tag, AbiHandle comm) {
  const NativeHandle req =
      session_->irecv(buf, count, need(dtype, HandleKind::Datatype), translate_source(src),
                      translate_tag(tag), need(comm, HandleKind::Comm));
  return native_to_abi(HandleKind::Request, req);
}

AbiStatus AdapterInstance::wait(AbiHandle request) {
  const NativeHandle native = need(request, HandleKind::Request);
  unsigned char native_status[kMaxNativeStatusSize] = {};
  session_->wait(native, native_status);
  unregister(request);  // the request is retired; the ABI index is never reused
  return read_status(native_status);
}

std::optional<AbiStatus> AdapterInstance::test(AbiHandle request) {
  const NativeHandle native = need(request, HandleKind::Request);
  unsigned char native_status[kMaxNativeStatusSize] = {};
  if (!session_->test(native, native_status)) return std::nullopt;
  unregister(request);
  return read_status(native_status);
}

void AdapterInstance::barrier(AbiHandle comm) { session_->barrier(need(comm, HandleKind::Comm)); }

void AdapterInstance::bcast(void* buf, std::uint32_t count, AbiHandle dtype, std::uint32_t root,
                            AbiHandle comm) {
  session_->bcast(buf, count, need(dtype, HandleKind::Datatype), root,
                  need(comm, HandleKind::Comm));
}

void AdapterInstance::allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count,
                                AbiHandle dtype, AbiHandle op, AbiHandle comm) {
  session_->allreduce(sendbuf, recvbuf, count, need(dtype, HandleKind::Datatype),
                      need(op, HandleKind::Op), need(comm, HandleKind::Comm));
}

void AdapterInstance::alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count,
                               AbiHandle dtype, AbiHandle comm) {
  session_->alltoall(sendbuf, recvbuf, count, need(dtype, HandleKind::Datatype),
                     need(comm, HandleKind::Comm));
}

void AdapterInstance::dump_table(std::ostream& out) const {
  for (std::size_t kind = 0; kind < kHandleKindCount; ++kind) {
    std::vector<std::pair<std::uint32_t, NativeHandle>> rows(abi_to_native_[kind].begin(),
                                                             abi_to_native_[kind].end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [abi, native] : rows) {
      char line[96];
      std::snprintf(line, sizeof(line), "%s\t0x%08x\t0x%012llx\n",
                    kind_name(static_cast<HandleKind>(kind)), abi,
                    static_cast<unsigned long long>(native));
      out << line;
    }
  }
}

bool AdapterInstance::table_is_bijective() const {
  for (std::size_t kind = 0; kind < kHandleKindCount; ++kind) {
    if (abi_to_native_[kind].size() != native_to_abi_[kind].size()) return false;
    for (const auto& [abi, native] : abi_to_native_[kind]) {
      auto it = native_to_abi_[kind].find(native);
      if (it == native_to_abi_[kind].end() || it->second != abi) return false;
    }
  }
  return true;
}

}  // namespace mpidesk
