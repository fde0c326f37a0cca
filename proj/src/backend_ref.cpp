#include <algorithm>
#include <cstddef>
#include <cstring>
#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "mpidesk/backend.hpp"
#include "mpidesk/bytes.hpp"
#include "mpidesk/error.hpp"

// RefBackend: reference-style lower half. Objects live in one descriptor
// table keyed by opaque 64-bit handles from a monotonic allocator starting
// at 0x7F00'0000'0000; keys are never reused. Stands in for the
// pointer-like handle representation of Open MPI.

namespace mpidesk {
namespace {

constexpr NativeHandle kKeyBase = 0x7F0000000000ULL;
constexpr std::int32_t kRefAnySource = -1;
constexpr std::int32_t kRefAnyTag = -32767;

// Field order deliberately differs from AbiStatus and from IndexBackend.
struct RefStatus {
  std::int32_t src;
  std::int32_t err;
  std::int32_t tag;
  std::uint64_t bytes;
};

constexpr NativeStatusLayout kRefStatusLayout{
    sizeof(RefStatus), offsetof(RefStatus, src), offsetof(RefStatus, tag),
    offsetof(RefStatus, err), offsetof(RefStatus, bytes)};

enum RefTag : std::int32_t {
  kMsgFence = 0x5201,
  kMsgFenceAck = 0x5202,
  kMsgBcast = 0x5203,
  kMsgFoldIn = 0x5204,
  kMsgFoldOut = 0x5205,
  kMsgExchange = 0x5206,
  kMsgSplitAsk = 0x5207,
  kMsgSplitTable = 0x5208,
  kMsgDupAsk = 0x5209,
  kMsgDupBase = 0x520A,
};

enum class Scalar : std::uint8_t { Raw, I32, I64, F64 };

struct CommDesc {
  std::uint32_t context;
  std::vector<RankId> members;  // world ranks in comm-rank order
  std::uint32_t self_pos;
  bool builtin = false;
};

struct TypeDesc {
  std::uint64_t extent;
  Scalar scalar;
  std::uint32_t lanes;
  bool builtin = false;
};

struct OpDesc {
  enum class Fn : std::uint8_t { Add, Max, Min, Mul } fn;
};

struct ReqDesc {
  bool done = false;
  RefStatus status{};
  void* buf = nullptr;
  std::uint32_t count = 0;
  NativeHandle dtype = kNativeNull;
  std::int32_t src = 0;
  std::int32_t tag = 0;
  NativeHandle comm = kNativeNull;
};

using Descriptor = std::variant<CommDesc, TypeDesc, OpDesc, ReqDesc>;

constexpr HandleKind kind_of(const Descriptor& d) {
  switch (d.index()) {
    case 0: return HandleKind::Comm;
    case 1: return HandleKind::Datatype;
    case 2: return HandleKind::Op;
    default: return HandleKind::Request;
  }
}

template <typename T, typename Fold>
void fold_lane(void* acc, const void* in, std::uint32_t n, Fold fold) {
  auto* a = static_cast<T*>(acc);
  const auto* b = static_cast<const T*>(in);
  for (std::uint32_t i = 0; i < n; ++i) a[i] = fold(a[i], b[i]);
}

// Elementwise fold; integer math wraps via the unsigned representation.
void fold_buffer(void* acc, const void* in, std::uint32_t n, Scalar scalar, OpDesc::Fn fn) {
  auto dispatch = [&](auto fold) {
    switch (scalar) {
      case Scalar::I32: fold_lane<std::uint32_t>(acc, in, n, fold); break;
      case Scalar::I64: fold_lane<std::uint64_t>(acc, in, n, fold); break;
      case Scalar::F64: fold_lane<double>(acc, in, n, fold); break;
      case Scalar::Raw: raise(ErrorCode::KindMismatch, "raw bytes have no arithmetic");
    }
  };
  switch (fn) {
    case OpDesc::Fn::Add: dispatch([](auto a, auto b) { return a + b; }); break;
    case OpDesc::Fn::Max: dispatch([](auto a, auto b) { return a > b ? a : b; }); break;
    case OpDesc::Fn::Min: dispatch([](auto a, auto b) { return a < b ? a : b; }); break;
    case OpDesc::Fn::Mul: dispatch([](auto a, auto b) { return a * b; }); break;
  }
}

class RefSession final : public BackendSession {
 public:
  RefSession(NetworkFabric& fabric, RankId rank) : fabric_(fabric), rank_(rank) {
    fabric_.register_session(rank_);
    std::vector<RankId> world(fabric_.nranks());
    for (RankId r = 0; r < fabric_.nranks(); ++r) world[r] = r;
    const NativeHandle h_world = insert(CommDesc{10, std::move(world), rank_, true});
    const NativeHandle h_self = insert(CommDesc{12, {rank_}, 0, true});
    next_context_ = 14;
    const NativeHandle h_byte = insert(TypeDesc{1, Scalar::Raw, 1, true});
    const NativeHandle h_i32 = insert(TypeDesc{4, Scalar::I32, 1, true});
    const NativeHandle h_i64 = insert(TypeDesc{8, Scalar::I64, 1, true});
    const NativeHandle h_f64 = insert(TypeDesc{8, Scalar::F64, 1, true});
    const NativeHandle h_add = insert(OpDesc{OpDesc::Fn::Add});
    const NativeHandle h_max = insert(OpDesc{OpDesc::Fn::Max});
    const NativeHandle h_min = insert(OpDesc{OpDesc::Fn::Min});
    const NativeHandle h_mul = insert(OpDesc{OpDesc::Fn::Mul});
    predefined_ = PredefinedNatives{h_world, h_self,
                                    {h_byte, h_i32, h_i64, h_f64},
                                    {h_add, h_max, h_min, h_mul}};
  }

  ~RefSession() override { fabric_.unregister_session(rank_); }

  std::string_view name() const override { return "ref"; }
  RankId world_rank() const override { return rank_; }
  NativeSentinels sentinels() const override { return {kRefAnySource, kRefAnyTag}; }
  NativeStatusLayout status_layout() const override { return kRefStatusLayout; }
  const PredefinedNatives& predefined() const override { return predefined_; }

  std::uint32_t comm_size(NativeHandle comm) override {
    return static_cast<std::uint32_t>(comm_of(comm).members.size());
  }

  std::uint32_t comm_rank(NativeHandle comm) override { return comm_of(comm).self_pos; }

  NativeHandle comm_dup(NativeHandle comm) override {
    CommDesc parent = comm_of(comm);
    const std::uint32_t base = negotiate_context(parent, kMsgDupAsk, kMsgDupBase);
    return insert(CommDesc{base, parent.members, parent.self_pos, false});
  }

  NativeHandle comm_split(NativeHandle comm, std::int32_t color, std::int32_t key) override {
    CommDesc parent = comm_of(comm);
    if (color < -1) raise(ErrorCode::BackendFailure, "split color must be >= 0 or -1");
    const std::uint32_t size = static_cast<std::uint32_t>(parent.members.size());

    // Root collects every member's (color, key, context counter) and then
    // publishes the whole table; each member derives its own group from it.
    std::vector<std::int32_t> colors(size), keys(size);
    std::uint32_t base = 0;
    if (parent.self_pos == 0) {
      std::vector<std::uint32_t> counters(size);
      colors[0] = color;
      keys[0] = key;
      counters[0] = next_context_;
      for (std::uint32_t m = 1; m < size; ++m) {
        Envelope e = fabric_.match(rank_, parent.members[m], kMsgSplitAsk, parent.context + 1);
        ByteReader r(e.payload);
        colors[m] = r.i32();
        keys[m] = r.i32();
        counters[m] = r.u32();
      }
      base = *std::max_element(counters.begin(), counters.end());
      ByteWriter table;
      table.u32(base);
      for (std::uint32_t m = 0; m < size; ++m) {
        table.i32(colors[m]);
        table.i32(keys[m]);
      }
      for (std::uint32_t m = 1; m < size; ++m) {
        ship(parent.members[m], parent.context + 1, kMsgSplitTable, table.data());
      }
    } else {
      ByteWriter ask;
      ask.i32(color);
      ask.i32(key);
      ask.u32(next_context_);
      ship(parent.members[0], parent.context + 1, kMsgSplitAsk, ask.take());
      Envelope e = fabric_.match(rank_, parent.members[0], kMsgSplitTable, parent.context + 1);
      ByteReader r(e.payload);
      base = r.u32();
      for (std::uint32_t m = 0; m < size; ++m) {
        colors[m] = r.i32();
        keys[m] = r.i32();
      }
    }

    next_context_ = base + 2;
    if (color < 0) return kNativeNull;

    std::vector<std::uint32_t> mates;
    for (std::uint32_t m = 0; m < size; ++m) {
      if (colors[m] == color) mates.push_back(m);
    }
    std::sort(mates.begin(), mates.end(), [&](std::uint32_t a, std::uint32_t b) {
      return std::pair(keys[a], a) < std::pair(keys[b], b);
    });
    CommDesc fresh;
    fresh.context = base;
    fresh.builtin = false;
    fresh.self_pos = 0;
    for (std::uint32_t i = 0; i < mates.size(); ++i) {
      if (mates[i] == parent.self_pos) fresh.self_pos = i;
      fresh.members.push_back(parent.members[mates[i]]);
    }
    return insert(std::move(fresh));
  }

  void comm_free(NativeHandle comm) override {
    auto it = locate(comm, HandleKind::Comm);
    if (std::get<CommDesc>(it->second).builtin) {
      raise(ErrorCode::InvalidHandle, "cannot free a built-in communicator");
    }
    table_.erase(it);
  }

  NativeHandle type_contiguous(std::uint32_t count, NativeHandle base) override {
    if (count < 1) raise(ErrorCode::InvalidHandle, "contiguous count must be >= 1");
    const TypeDesc b = type_of(base);
    return insert(TypeDesc{b.extent * count, b.scalar, b.lanes * count, false});
  }

  std::uint64_t type_extent(NativeHandle dtype) override { return type_of(dtype).extent; }

  void type_free(NativeHandle dtype) override {
    auto it = locate(dtype, HandleKind::Datatype);
    if (std::get<TypeDesc>(it->second).builtin) {
      raise(ErrorCode::InvalidHandle, "cannot free a built-in datatype");
    }
    table_.erase(it);
  }

  void send(const void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t dst,
            std::int32_t tag, NativeHandle comm) override {
    const CommDesc& c = comm_of(comm);
    const TypeDesc t = type_of(dtype);
    if (dst < 0 || static_cast<std::uint32_t>(dst) >= c.members.size()) {
      raise(ErrorCode::BackendFailure, "send destination outside communicator");
    }
    const auto* bytes = static_cast<const std::uint8_t*>(buf);
    ship(c.members[static_cast<std::uint32_t>(dst)], c.context, tag,
         std::vector<std::uint8_t>(bytes, bytes + static_cast<std::size_t>(count) * t.extent));
  }

  void recv(void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t src,
            std::int32_t tag, NativeHandle comm, void* status_out) override {
    const CommDesc& c = comm_of(comm);
    const TypeDesc t = type_of(dtype);
    Envelope e = fabric_.match(rank_, source_filter(c, src), tag_filter(tag), c.context);
    land(c, t, e, buf, count, static_cast<RefStatus*>(status_out));
  }

  NativeHandle isend(const void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t dst,
                     std::int32_t tag, NativeHandle comm) override {
    const TypeDesc t = type_of(dtype);
    send(buf, count, dtype, dst, tag, comm);
    ReqDesc req;
    req.done = true;
    req.status = RefStatus{-1, 0, tag, static_cast<std::uint64_t>(count) * t.extent};
    return insert(std::move(req));
  }

  NativeHandle irecv(void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t src,
                     std::int32_t tag, NativeHandle comm) override {
    comm_of(comm);
    type_of(dtype);
    ReqDesc req;
    req.done = false;
    req.buf = buf;
    req.count = count;
    req.dtype = dtype;
    req.src = src;
    req.tag = tag;
    req.comm = comm;
    return insert(std::move(req));
  }

  void wait(NativeHandle request, void* status_out) override {
    auto it = locate(request, HandleKind::Request);
    ReqDesc& req = std::get<ReqDesc>(it->second);
    if (!req.done) {
      const CommDesc& c = comm_of(req.comm);
      const TypeDesc t = type_of(req.dtype);
      Envelope e =
          fabric_.match(rank_, source_filter(c, req.src), tag_filter(req.tag), c.context);
      land(c, t, e, req.buf, req.count, &req.status);
      req.done = true;
    }
    std::memcpy(status_out, &req.status, sizeof(RefStatus));
    table_.erase(it);
  }

  bool test(NativeHandle request, void* status_out) override {
    auto it = locate(request, HandleKind::Request);
    ReqDesc& req = std::get<ReqDesc>(it->second);
    if (!req.done) {
      const CommDesc& c = comm_of(req.comm);
      const TypeDesc t = type_of(req.dtype);
      auto e = fabric_.try_match(rank_, source_filter(c, req.src), tag_filter(req.tag), c.context);
      if (!e) return false;
      land(c, t, *e, req.buf, req.count, &req.status);
      req.done = true;
    }
    std::memcpy(status_out, &req.status, sizeof(RefStatus));
    table_.erase(it);
    return true;
  }

  void barrier(NativeHandle comm) override {
    const CommDesc& c = comm_of(comm);
    const std::uint32_t size = static_cast<std::uint32_t>(c.members.size());
    if (size < 2) return;
    if (c.self_pos == 0) {
      for (std::uint32_t m = 1; m < size; ++m) {
        fabric_.match(rank_, c.members[m], kMsgFence, c.context + 1);
      }
      for (std::uint32_t m = 1; m < size; ++m) {
        ship(c.members[m], c.context + 1, kMsgFenceAck, {});
      }
    } else {
      ship(c.members[0], c.context + 1, kMsgFence, {});
      fabric_.match(rank_, c.members[0], kMsgFenceAck, c.context + 1);
    }
  }

  void bcast(void* buf, std::uint32_t count, NativeHandle dtype, std::uint32_t root,
             NativeHandle comm) override {
    const CommDesc& c = comm_of(comm);
    const TypeDesc t = type_of(dtype);
    const std::uint32_t size = static_cast<std::uint32_t>(c.members.size());
    if (root >= size) raise(ErrorCode::InvalidHandle, "bcast root outside communicator");
    if (size < 2) return;
    const std::size_t nbytes = static_cast<std::size_t>(count) * t.extent;
    if (c.self_pos == root) {
      const auto* bytes = static_cast<const std::uint8_t*>(buf);
      const std::vector<std::uint8_t> payload(bytes, bytes + nbytes);
      for (std::uint32_t m = 0; m < size; ++m) {
        if (m != root) ship(c.members[m], c.context + 1, kMsgBcast, payload);
      }
    } else {
      Envelope e = fabric_.match(rank_, c.members[root], kMsgBcast, c.context + 1);
      if (e.payload.size() != nbytes) {
        raise(ErrorCode::Truncated, "bcast length mismatch across members");
      }
      std::memcpy(buf, e.payload.data(), nbytes);
    }
  }

  void allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count, NativeHandle dtype,
                 NativeHandle op, NativeHandle comm) override {
    const CommDesc& c = comm_of(comm);
    const TypeDesc t = type_of(dtype);
    const OpDesc o = op_of(op);
    if (t.scalar == Scalar::Raw || t.lanes != 1) {
      raise(ErrorCode::KindMismatch, "allreduce requires an arithmetic element datatype");
    }
    const std::uint32_t size = static_cast<std::uint32_t>(c.members.size());
    const std::size_t nbytes = static_cast<std::size_t>(count) * t.extent;
    if (c.self_pos != 0) {
      const auto* bytes = static_cast<const std::uint8_t*>(sendbuf);
      ship(c.members[0], c.context + 1, kMsgFoldIn,
           std::vector<std::uint8_t>(bytes, bytes + nbytes));
      Envelope e = fabric_.match(rank_, c.members[0], kMsgFoldOut, c.context + 1);
      std::memcpy(recvbuf, e.payload.data(), nbytes);
      return;
    }
    // Comm rank 0 folds contributions in canonical ascending-rank order.
    std::memcpy(recvbuf, sendbuf, nbytes);
    for (std::uint32_t m = 1; m < size; ++m) {
      Envelope e = fabric_.match(rank_, c.members[m], kMsgFoldIn, c.context + 1);
      if (e.payload.size() != nbytes) {
        raise(ErrorCode::Truncated, "allreduce length mismatch across members");
      }
      fold_buffer(recvbuf, e.payload.data(), count, t.scalar, o.fn);
    }
    const auto* result = static_cast<const std::uint8_t*>(recvbuf);
    for (std::uint32_t m = 1; m < size; ++m) {
      ship(c.members[m], c.context + 1, kMsgFoldOut,
           std::vector<std::uint8_t>(result, result + nbytes));
    }
  }

  void alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count, NativeHandle dtype,
                NativeHandle comm) override {
    const CommDesc& c = comm_of(comm);
    const TypeDesc t = type_of(dtype);
    const std::uint32_t size = static_cast<std::uint32_t>(c.members.size());
    const std::size_t block = static_cast<std::size_t>(count) * t.extent;
    const auto* in = static_cast<const std::uint8_t*>(sendbuf);
    auto* out = static_cast<std::uint8_t*>(recvbuf);
    std::memcpy(out + c.self_pos * block, in + c.self_pos * block, block);
    for (std::uint32_t m = 0; m < size; ++m) {
      if (m == c.self_pos) continue;
      ship(c.members[m], c.context + 1, kMsgExchange,
           std::vector<std::uint8_t>(in + m * block, in + (m + 1) * block));
    }
    for (std::uint32_t m = 0; m < size; ++m) {
      if (m == c.self_pos) continue;
      Envelope e = fabric_.match(rank_, c.members[m], kMsgExchange, c.context + 1);
      if (e.payload.size() != block) {
        raise(ErrorCode::Truncated, "alltoall length mismatch across members");
      }
      std::memcpy(out + m * block, e.payload.data(), block);
    }
  }

 private:
  NativeHandle insert(Descriptor d) {
    const NativeHandle key = next_key_++;
    table_.emplace(key, std::move(d));
    return key;
  }

  std::map<NativeHandle, Descriptor>::iterator locate(NativeHandle h, HandleKind want) {
    if (h < kKeyBase) raise(ErrorCode::InvalidHandle, "not a ref-backend handle");
    auto it = table_.find(h);
    if (it == table_.end()) raise(ErrorCode::InvalidHandle, "dead ref-backend handle");
    if (kind_of(it->second) != want) raise(ErrorCode::KindMismatch, "native handle kind mismatch");
    return it;
  }

  CommDesc& comm_of(NativeHandle h) { return std::get<CommDesc>(locate(h, HandleKind::Comm)->second); }
  TypeDesc& type_of(NativeHandle h) {
    return std::get<TypeDesc>(locate(h, HandleKind::Datatype)->second);
  }
  OpDesc& op_of(NativeHandle h) { return std::get<OpDesc>(locate(h, HandleKind::Op)->second); }

  std::optional<RankId> source_filter(const CommDesc& c, std::int32_t src) const {
    if (src == kRefAnySource) return std::nullopt;
    if (src < 0 || static_cast<std::uint32_t>(src) >= c.members.size()) {
      raise(ErrorCode::BackendFailure, "receive source outside communicator");
    }
    return c.members[static_cast<std::uint32_t>(src)];
  }

  static std::optional<std::int32_t> tag_filter(std::int32_t tag) {
    if (tag == kRefAnyTag) return std::nullopt;
    return tag;
  }

  void land(const CommDesc& c, const TypeDesc& t, const Envelope& e, void* buf,
            std::uint32_t count, RefStatus* status) {
    const std::size_t capacity = static_cast<std::size_t>(count) * t.extent;
    const std::size_t delivered = std::min(e.payload.size(), capacity);
    if (delivered > 0) std::memcpy(buf, e.payload.data(), delivered);
    std::int32_t pos = -1;
    for (std::uint32_t i = 0; i < c.members.size(); ++i) {
      if (c.members[i] == e.src) {
        pos = static_cast<std::int32_t>(i);
        break;
      }
    }
    if (pos < 0) raise(ErrorCode::BackendFailure, "sender not a member of communicator");
    status->src = pos;
    status->err = e.payload.size() > capacity ? static_cast<std::int32_t>(ErrorCode::Truncated)
                                              : static_cast<std::int32_t>(ErrorCode::Success);
    status->tag = e.tag;
    status->bytes = delivered;
  }

  void ship(RankId dst, std::uint32_t context, std::int32_t tag,
            std::vector<std::uint8_t> payload) {
    Envelope e;
    e.src = rank_;
    e.dst = dst;
    e.context_id = context;
    e.tag = tag;
    e.payload = std::move(payload);
    fabric_.post(std::move(e));
  }

  std::uint32_t negotiate_context(const CommDesc& c, std::int32_t ask_tag,
                                  std::int32_t answer_tag) {
    const std::uint32_t size = static_cast<std::uint32_t>(c.members.size());
    std::uint32_t base = next_context_;
    if (size > 1) {
      if (c.self_pos == 0) {
        for (std::uint32_t m = 1; m < size; ++m) {
          Envelope e = fabric_.match(rank_, c.members[m], ask_tag, c.context + 1);
          base = std::max(base, ByteReader(e.payload).u32());
        }
        ByteWriter w;
        w.u32(base);
        for (std::uint32_t m = 1; m < size; ++m) {
          ship(c.members[m], c.context + 1, answer_tag, w.data());
        }
      } else {
        ByteWriter w;
        w.u32(next_context_);
        ship(c.members[0], c.context + 1, ask_tag, w.take());
        Envelope e = fabric_.match(rank_, c.members[0], answer_tag, c.context + 1);
        base = ByteReader(e.payload).u32();
      }
    }
    next_context_ = base + 2;
    return base;
  }

  NetworkFabric& fabric_;
  RankId rank_;
  std::uint32_t next_context_ = 0;
  NativeHandle next_key_ = kKeyBase;
  std::map<NativeHandle, Descriptor> table_;
  PredefinedNatives predefined_{};
};

}  // namespace

std::unique_ptr<BackendSession> make_ref_backend(NetworkFabric& fabric, RankId rank) {
  return std::make_unique<RefSession>(fabric, rank);
}

bool is_backend_name(std::string_view name) { return name == "index" || name == "ref"; }

std::unique_ptr<BackendSession> make_backend(std::string_view name, NetworkFabric& fabric,
                                             RankId rank) {
  if (name == "index") return make_index_backend(fabric, rank);
  if (name == "ref") return make_ref_backend(fabric, rank);
  raise(ErrorCode::BackendFailure, "unknown backend: " + std::string(name));
}

}  // namespace mpidesk
