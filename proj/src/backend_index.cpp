#include <algorithm>
#include <cstddef>
#include <cstring>
#include <optional>
#include <vector>

#include "mpidesk/backend.hpp"
#include "mpidesk/bytes.hpp"
#include "mpidesk/error.hpp"

// IndexBackend: table-based lower half. Every object lives in a per-kind
// pool; a native handle packs marker 0x44 | kind | pool index into 32 bits.
// Freed slots are retired, never reused. Stands in for the MPICH-style
// index-into-a-table handle representation.

namespace mpidesk {
namespace {

constexpr std::uint32_t kMarker = 0x44;
constexpr std::int32_t kIdxAnySource = -2;
constexpr std::int32_t kIdxAnyTag = -2;

// Field order deliberately differs from AbiStatus and from RefBackend.
struct IdxStatus {
  std::int32_t tag;
  std::int32_t src;
  std::int32_t err;
  std::uint64_t bytes;
};

constexpr NativeStatusLayout kIdxStatusLayout{
    sizeof(IdxStatus), offsetof(IdxStatus, src), offsetof(IdxStatus, tag),
    offsetof(IdxStatus, err), offsetof(IdxStatus, bytes)};

// Internal collective tags; collective traffic runs on a comm's second
// context so it can never collide with application point-to-point.
enum IdxTag : std::int32_t {
  kTagBarrierIn = 1,
  kTagBarrierOut = 2,
  kTagBcast = 3,
  kTagReduceIn = 4,
  kTagReduceOut = 5,
  kTagAlltoall = 6,
  kTagSplitIn = 7,
  kTagSplitOut = 8,
  kTagDupIn = 9,
  kTagDupOut = 10,
};

enum class Elem : std::uint8_t { Byte, I32, I64, F64 };

struct CommObj {
  std::uint32_t context_id;  // p2p context; collectives use context_id + 1
  std::vector<RankId> group;  // world ranks, comm-rank order
  std::uint32_t my_rank;
  bool predefined = false;
  bool freed = false;
};

struct TypeObj {
  std::uint64_t extent;
  Elem elem;
  std::uint32_t count;
  bool predefined = false;
  bool freed = false;
};

struct OpObj {
  enum class Sem : std::uint8_t { Sum, Max, Min, Prod } sem;
};

struct ReqObj {
  bool complete = false;
  bool freed = false;
  IdxStatus result{};
  // Pending receive parameters, resolved when waited or tested.
  void* buf = nullptr;
  std::uint32_t count = 0;
  NativeHandle dtype = kNativeNull;
  std::int32_t src = 0;
  std::int32_t tag = 0;
  NativeHandle comm = kNativeNull;
};

template <typename T>
void apply_op(T* acc, const T* in, std::uint32_t n, OpObj::Sem sem) {
  switch (sem) {
    case OpObj::Sem::Sum:
      for (std::uint32_t i = 0; i < n; ++i) acc[i] = acc[i] + in[i];
      break;
    case OpObj::Sem::Max:
      for (std::uint32_t i = 0; i < n; ++i) acc[i] = std::max(acc[i], in[i]);
      break;
    case OpObj::Sem::Min:
      for (std::uint32_t i = 0; i < n; ++i) acc[i] = std::min(acc[i], in[i]);
      break;
    case OpObj::Sem::Prod:
      for (std::uint32_t i = 0; i < n; ++i) acc[i] = acc[i] * in[i];
      break;
  }
}

// Integer reductions run on the unsigned representation so overflow wraps.
void reduce_bytes(std::uint8_t* acc, const std::uint8_t* in, std::uint32_t count, Elem elem,
                  OpObj::Sem sem) {
  switch (elem) {
    case Elem::I32:
      apply_op(reinterpret_cast<std::uint32_t*>(acc), reinterpret_cast<const std::uint32_t*>(in),
               count, sem);
      break;
    case Elem::I64:
      apply_op(reinterpret_cast<std::uint64_t*>(acc), reinterpret_cast<const std::uint64_t*>(in),
               count, sem);
      break;
    case Elem::F64:
      apply_op(reinterpret_cast<double*>(acc), reinterpret_cast<const double*>(in), count, sem);
      break;
    case Elem::Byte:
      raise(ErrorCode::KindMismatch, "byte datatype has no arithmetic");
  }
}

class IndexSession final : public BackendSession {
 public:
  IndexSession(NetworkFabric& fabric, RankId rank) : fabric_(fabric), rank_(rank) {
    fabric_.register_session(rank_);
    std::vector<RankId> world(fabric_.nranks());
    for (RankId r = 0; r < fabric_.nranks(); ++r) world[r] = r;
    comms_.push_back(CommObj{0, std::move(world), rank_, true, false});
    comms_.push_back(CommObj{2, {rank_}, 0, true, false});
    next_context_ = 4;
    types_.push_back(TypeObj{1, Elem::Byte, 1, true, false});
    types_.push_back(TypeObj{4, Elem::I32, 1, true, false});
    types_.push_back(TypeObj{8, Elem::I64, 1, true, false});
    types_.push_back(TypeObj{8, Elem::F64, 1, true, false});
    ops_.push_back(OpObj{OpObj::Sem::Sum});
    ops_.push_back(OpObj{OpObj::Sem::Max});
    ops_.push_back(OpObj{OpObj::Sem::Min});
    ops_.push_back(OpObj{OpObj::Sem::Prod});
    predefined_ = PredefinedNatives{
        pack(HandleKind::Comm, 0),
        pack(HandleKind::Comm, 1),
        {pack(HandleKind::Datatype, 0), pack(HandleKind::Datatype, 1),
         pack(HandleKind::Datatype, 2), pack(HandleKind::Datatype, 3)},
        {pack(HandleKind::Op, 0), pack(HandleKind::Op, 1), pack(HandleKind::Op, 2),
         pack(HandleKind::Op, 3)}};
  }

  ~IndexSession() override { fabric_.unregister_session(rank_); }

  std::string_view name() const override { return "index"; }
  RankId world_rank() const override { return rank_; }
  NativeSentinels sentinels() const override { return {kIdxAnySource, kIdxAnyTag}; }
  NativeStatusLayout status_layout() const override { return kIdxStatusLayout; }
  const PredefinedNatives& predefined() const override { return predefined_; }

  std::uint32_t comm_size(NativeHandle comm) override {
    return static_cast<std::uint32_t>(get_comm(comm).group.size());
  }

  std::uint32_t comm_rank(NativeHandle comm) override { return get_comm(comm).my_rank; }

  NativeHandle comm_dup(NativeHandle comm) override {
    CommObj& parent = get_comm(comm);
    const std::uint32_t base = agree_context(parent, kTagDupIn, kTagDupOut);
    comms_.push_back(CommObj{base, parent.group, parent.my_rank, false, false});
    return pack(HandleKind::Comm, static_cast<std::uint32_t>(comms_.size() - 1));
  }

  NativeHandle comm_split(NativeHandle comm, std::int32_t color, std::int32_t key) override {
    CommObj& parent = get_comm(comm);
    if (color < -1) raise(ErrorCode::BackendFailure, "split color must be >= 0 or -1");
    const std::uint32_t size = static_cast<std::uint32_t>(parent.group.size());

    // Gather (color, key, next_context) at comm rank 0, which forms the
    // color groups ordered by (key, old rank) and answers every member.
    std::vector<std::int32_t> colors(size), keys(size);
    std::vector<std::uint32_t> ctxs(size);
    if (parent.my_rank == 0) {
      colors[0] = color;
      keys[0] = key;
      ctxs[0] = next_context_;
      for (std::uint32_t s = 1; s < size; ++s) {
        Envelope e = fabric_.match(rank_, parent.group[s], kTagSplitIn, parent.context_id + 1);
        ByteReader r(e.payload);
        colors[s] = r.i32();
        keys[s] = r.i32();
        ctxs[s] = r.u32();
      }
      const std::uint32_t base = *std::max_element(ctxs.begin(), ctxs.end());
      for (std::uint32_t member = 0; member < size; ++member) {
        ByteWriter w;
        w.u32(base);
        if (colors[member] < 0) {
          w.u8(1);
        } else {
          std::vector<std::uint32_t> group_members;
          for (std::uint32_t s = 0; s < size; ++s) {
            if (colors[s] == colors[member]) group_members.push_back(s);
          }
          std::sort(group_members.begin(), group_members.end(),
                    [&](std::uint32_t a, std::uint32_t b) {
                      return std::pair(keys[a], a) < std::pair(keys[b], b);
                    });
          w.u8(0);
          w.u32(static_cast<std::uint32_t>(group_members.size()));
          std::uint32_t my_pos = 0;
          for (std::uint32_t i = 0; i < group_members.size(); ++i) {
            if (group_members[i] == member) my_pos = i;
            w.u32(parent.group[group_members[i]]);
          }
          w.u32(my_pos);
        }
        if (member == 0) {
          reply0_ = w.take();
        } else {
          post_internal(parent.group[member], parent.context_id + 1, kTagSplitOut, w.take());
        }
      }
    } else {
      ByteWriter w;
      w.i32(color);
      w.i32(key);
      w.u32(next_context_);
      post_internal(parent.group[0], parent.context_id + 1, kTagSplitIn, w.take());
    }

    std::vector<std::uint8_t> reply;
    if (parent.my_rank == 0) {
      reply = std::move(reply0_);
    } else {
      reply = fabric_.match(rank_, parent.group[0], kTagSplitOut, parent.context_id + 1).payload;
    }
    ByteReader r(reply);
    const std::uint32_t base = r.u32();
    next_context_ = base + 2;
    if (r.u8() == 1) return kNativeNull;
    const std::uint32_t new_size = r.u32();
    std::vector<RankId> group(new_size);
    for (std::uint32_t i = 0; i < new_size; ++i) group[i] = r.u32();
    const std::uint32_t my_pos = r.u32();
    comms_.push_back(CommObj{base, std::move(group), my_pos, false, false});
    return pack(HandleKind::Comm, static_cast<std::uint32_t>(comms_.size() - 1));
  }

  void comm_free(NativeHandle comm) override {
    CommObj& c = get_comm(comm);
    if (c.predefined) raise(ErrorCode::InvalidHandle, "cannot free a predefined communicator");
    c.freed = true;
  }

  NativeHandle type_contiguous(std::uint32_t count, NativeHandle base) override {
    if (count < 1) raise(ErrorCode::InvalidHandle, "contiguous count must be >= 1");
    TypeObj& b = get_type(base);
    types_.push_back(TypeObj{b.extent * count, b.elem, b.count * count, false, false});
    return pack(HandleKind::Datatype, static_cast<std::uint32_t>(types_.size() - 1));
  }

  std::uint64_t type_extent(NativeHandle dtype) override { return get_type(dtype).extent; }

  void type_free(NativeHandle dtype) override {
    TypeObj& t = get_type(dtype);
    if (t.predefined) raise(ErrorCode::InvalidHandle, "cannot free a predefined datatype");
    t.freed = true;
  }

  void send(const void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t dst,
            std::int32_t tag, NativeHandle comm) override {
    CommObj& c = get_comm(comm);
    TypeObj& t = get_type(dtype);
    if (dst < 0 || static_cast<std::uint32_t>(dst) >= c.group.size()) {
      raise(ErrorCode::BackendFailure, "send destination outside communicator");
    }
    const std::size_t nbytes = static_cast<std::size_t>(count) * t.extent;
    Envelope e;
    e.src = rank_;
    e.dst = c.group[static_cast<std::uint32_t>(dst)];
    e.context_id = c.context_id;
    e.tag = tag;
    e.payload.assign(static_cast<const std::uint8_t*>(buf),
                     static_cast<const std::uint8_t*>(buf) + nbytes);
    fabric_.post(std::move(e));
  }

  void recv(void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t src,
            std::int32_t tag, NativeHandle comm, void* status_out) override {
    CommObj& c = get_comm(comm);
    TypeObj& t = get_type(dtype);
    Envelope e = fabric_.match(rank_, resolve_src(c, src), resolve_tag(tag), c.context_id);
    deliver(c, t, e, buf, count, status_out);
  }

  NativeHandle isend(const void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t dst,
                     std::int32_t tag, NativeHandle comm) override {
    TypeObj& t = get_type(dtype);
    send(buf, count, dtype, dst, tag, comm);
    ReqObj req;
    req.complete = true;
    req.result = IdxStatus{tag, -1, 0, static_cast<std::uint64_t>(count) * t.extent};
    reqs_.push_back(req);
    return pack(HandleKind::Request, static_cast<std::uint32_t>(reqs_.size() - 1));
  }

  NativeHandle irecv(void* buf, std::uint32_t count, NativeHandle dtype, std::int32_t src,
                     std::int32_t tag, NativeHandle comm) override {
    get_comm(comm);
    get_type(dtype);
    ReqObj req;
    req.complete = false;
    req.buf = buf;
    req.count = count;
    req.dtype = dtype;
    req.src = src;
    req.tag = tag;
    req.comm = comm;
    reqs_.push_back(req);
    return pack(HandleKind::Request, static_cast<std::uint32_t>(reqs_.size() - 1));
  }

  void wait(NativeHandle request, void* status_out) override {
    ReqObj& req = get_req(request);
    if (!req.complete) {
      CommObj& c = get_comm(req.comm);
      TypeObj& t = get_type(req.dtype);
      Envelope e = fabric_.match(rank_, resolve_src(c, req.src), resolve_tag(req.tag),
                                 c.context_id);
      deliver(c, t, e, req.buf, req.count, &req.result);
      req.complete = true;
    }
    std::memcpy(status_out, &req.result, sizeof(IdxStatus));
    req.freed = true;
  }

  bool test(NativeHandle request, void* status_out) override {
    ReqObj& req = get_req(request);
    if (!req.complete) {
      CommObj& c = get_comm(req.comm);
      TypeObj& t = get_type(req.dtype);
      auto e = fabric_.try_match(rank_, resolve_src(c, req.src), resolve_tag(req.tag),
                                 c.context_id);
      if (!e) return false;
      deliver(c, t, *e, req.buf, req.count, &req.result);
      req.complete = true;
    }
    std::memcpy(status_out, &req.result, sizeof(IdxStatus));
    req.freed = true;
    return true;
  }

  void barrier(NativeHandle comm) override {
    CommObj& c = get_comm(comm);
    const std::uint32_t size = static_cast<std::uint32_t>(c.group.size());
    if (size == 1) return;
    if (c.my_rank == 0) {
      for (std::uint32_t s = 1; s < size; ++s) {
        fabric_.match(rank_, c.group[s], kTagBarrierIn, c.context_id + 1);
      }
      for (std::uint32_t s = 1; s < size; ++s) {
        post_internal(c.group[s], c.context_id + 1, kTagBarrierOut, {});
      }
    } else {
      post_internal(c.group[0], c.context_id + 1, kTagBarrierIn, {});
      fabric_.match(rank_, c.group[0], kTagBarrierOut, c.context_id + 1);
    }
  }

  void bcast(void* buf, std::uint32_t count, NativeHandle dtype, std::uint32_t root,
             NativeHandle comm) override {
    CommObj& c = get_comm(comm);
    TypeObj& t = get_type(dtype);
    const std::uint32_t size = static_cast<std::uint32_t>(c.group.size());
    if (root >= size) raise(ErrorCode::InvalidHandle, "bcast root outside communicator");
    if (size == 1) return;
    const std::size_t nbytes = static_cast<std::size_t>(count) * t.extent;
    if (c.my_rank == root) {
      std::vector<std::uint8_t> payload(static_cast<const std::uint8_t*>(buf),
                                        static_cast<const std::uint8_t*>(buf) + nbytes);
      for (std::uint32_t s = 0; s < size; ++s) {
        if (s == root) continue;
        post_internal(c.group[s], c.context_id + 1, kTagBcast, payload);
      }
    } else {
      Envelope e = fabric_.match(rank_, c.group[root], kTagBcast, c.context_id + 1);
      if (e.payload.size() != nbytes) {
        raise(ErrorCode::Truncated, "bcast length mismatch across members");
      }
      std::memcpy(buf, e.payload.data(), nbytes);
    }
  }

  void allreduce(const void* sendbuf, void* recvbuf, std::uint32_t count, NativeHandle dtype,
                 NativeHandle op, NativeHandle comm) override {
    CommObj& c = get_comm(comm);
    TypeObj& t = get_type(dtype);
    OpObj& o = get_op(op);
    if (t.elem == Elem::Byte || t.count != 1) {
      raise(ErrorCode::KindMismatch, "allreduce requires an arithmetic element datatype");
    }
    const std::uint32_t size = static_cast<std::uint32_t>(c.group.size());
    const std::size_t nbytes = static_cast<std::size_t>(count) * t.extent;
    if (c.my_rank == 0) {
      // Canonical order: fold contributions in ascending comm rank.
      std::memcpy(recvbuf, sendbuf, nbytes);
      for (std::uint32_t s = 1; s < size; ++s) {
        Envelope e = fabric_.match(rank_, c.group[s], kTagReduceIn, c.context_id + 1);
        if (e.payload.size() != nbytes) {
          raise(ErrorCode::Truncated, "allreduce length mismatch across members");
        }
        reduce_bytes(static_cast<std::uint8_t*>(recvbuf), e.payload.data(), count, t.elem, o.sem);
      }
      std::vector<std::uint8_t> result(static_cast<std::uint8_t*>(recvbuf),
                                       static_cast<std::uint8_t*>(recvbuf) + nbytes);
      for (std::uint32_t s = 1; s < size; ++s) {
        post_internal(c.group[s], c.context_id + 1, kTagReduceOut, result);
      }
    } else {
      std::vector<std::uint8_t> mine(static_cast<const std::uint8_t*>(sendbuf),
                                     static_cast<const std::uint8_t*>(sendbuf) + nbytes);
      post_internal(c.group[0], c.context_id + 1, kTagReduceIn, std::move(mine));
      Envelope e = fabric_.match(rank_, c.group[0], kTagReduceOut, c.context_id + 1);
      std::memcpy(recvbuf, e.payload.data(), nbytes);
    }
  }

  void alltoall(const void* sendbuf, void* recvbuf, std::uint32_t count, NativeHandle dtype,
                NativeHandle comm) override {
    CommObj& c = get_comm(comm);
    TypeObj& t = get_type(dtype);
    const std::uint32_t size = static_cast<std::uint32_t>(c.group.size());
    const std::size_t block = static_cast<std::size_t>(count) * t.extent;
    const auto* in = static_cast<const std::uint8_t*>(sendbuf);
    auto* out = static_cast<std::uint8_t*>(recvbuf);
    for (std::uint32_t peer = 0; peer < size; ++peer) {
      if (peer == c.my_rank) continue;
      post_internal(c.group[peer], c.context_id + 1, kTagAlltoall,
                    {in + peer * block, in + (peer + 1) * block});
    }
    std::memcpy(out + c.my_rank * block, in + c.my_rank * block, block);
    for (std::uint32_t peer = 0; peer < size; ++peer) {
      if (peer == c.my_rank) continue;
      Envelope e = fabric_.match(rank_, c.group[peer], kTagAlltoall, c.context_id + 1);
      if (e.payload.size() != block) {
        raise(ErrorCode::Truncated, "alltoall length mismatch across members");
      }
      // Block position comes from the sender's comm rank.
      const std::uint32_t from = comm_rank_of(c, e.src);
      std::memcpy(out + from * block, e.payload.data(), block);
    }
  }

 private:
  static NativeHandle pack(HandleKind kind, std::uint32_t idx) {
    return (kMarker << 24) | (static_cast<std::uint32_t>(kind) << 20) | idx;
  }

  std::uint32_t unpack(NativeHandle h, HandleKind want) const {
    const auto raw = static_cast<std::uint32_t>(h);
    if (h != raw || (raw >> 24) != kMarker) {
      raise(ErrorCode::InvalidHandle, "not an index-backend handle");
    }
    const std::uint32_t kind = (raw >> 20) & 0xF;
    if (kind >= kHandleKindCount) raise(ErrorCode::InvalidHandle, "bad kind in native handle");
    if (kind != static_cast<std::uint32_t>(want)) {
      raise(ErrorCode::KindMismatch, "native handle kind mismatch");
    }
    return raw & 0xFFFFF;
  }

  CommObj& get_comm(NativeHandle h) {
    const std::uint32_t idx = unpack(h, HandleKind::Comm);
    if (idx >= comms_.size() || comms_[idx].freed) {
      raise(ErrorCode::InvalidHandle, "dead communicator handle");
    }
    return comms_[idx];
  }

  TypeObj& get_type(NativeHandle h) {
    const std::uint32_t idx = unpack(h, HandleKind::Datatype);
    if (idx >= types_.size() || types_[idx].freed) {
      raise(ErrorCode::InvalidHandle, "dead datatype handle");
    }
    return types_[idx];
  }

  OpObj& get_op(NativeHandle h) {
    const std::uint32_t idx = unpack(h, HandleKind::Op);
    if (idx >= ops_.size()) raise(ErrorCode::InvalidHandle, "dead op handle");
    return ops_[idx];
  }

  ReqObj& get_req(NativeHandle h) {
    const std::uint32_t idx = unpack(h, HandleKind::Request);
    if (idx >= reqs_.size() || reqs_[idx].freed) {
      raise(ErrorCode::InvalidHandle, "dead request handle");
    }
    return reqs_[idx];
  }

  std::optional<RankId> resolve_src(const CommObj& c, std::int32_t src) const {
    if (src == kIdxAnySource) return std::nullopt;
    if (src < 0 || static_cast<std::uint32_t>(src) >= c.group.size()) {
      raise(ErrorCode::BackendFailure, "receive source outside communicator");
    }
    return c.group[static_cast<std::uint32_t>(src)];
  }

  static std::optional<std::int32_t> resolve_tag(std::int32_t tag) {
    if (tag == kIdxAnyTag) return std::nullopt;
    return tag;
  }

  static std::uint32_t comm_rank_of(const CommObj& c, RankId world) {
    for (std::uint32_t i = 0; i < c.group.size(); ++i) {
      if (c.group[i] == world) return i;
    }
    raise(ErrorCode::BackendFailure, "sender not a member of communicator");
  }

  void deliver(const CommObj& c, const TypeObj& t, const Envelope& e, void* buf,
               std::uint32_t count, void* status_out) {
    const std::size_t capacity = static_cast<std::size_t>(count) * t.extent;
    const std::size_t delivered = std::min(e.payload.size(), capacity);
    if (delivered > 0) std::memcpy(buf, e.payload.data(), delivered);
    IdxStatus st;
    st.tag = e.tag;
    st.src = static_cast<std::int32_t>(comm_rank_of(c, e.src));
    st.err = e.payload.size() > capacity ? static_cast<std::int32_t>(ErrorCode::Truncated)
                                         : static_cast<std::int32_t>(ErrorCode::Success);
    st.bytes = delivered;
    std::memcpy(status_out, &st, sizeof(IdxStatus));
  }

  void post_internal(RankId dst_world, std::uint32_t ctx, std::int32_t tag,
                     std::vector<std::uint8_t> payload) {
    Envelope e;
    e.src = rank_;
    e.dst = dst_world;
    e.context_id = ctx;
    e.tag = tag;
    e.payload = std::move(payload);
    fabric_.post(std::move(e));
  }

  // Collective agreement on a fresh context base: comm rank 0 takes the max
  // of every member's counter; everyone then advances past it. Pure function
  // of the call history, so replay after restart allocates identically.
  std::uint32_t agree_context(const CommObj& c, std::int32_t tag_in, std::int32_t tag_out) {
    const std::uint32_t size = static_cast<std::uint32_t>(c.group.size());
    std::uint32_t base = next_context_;
    if (size > 1) {
      if (c.my_rank == 0) {
        for (std::uint32_t s = 1; s < size; ++s) {
          Envelope e = fabric_.match(rank_, c.group[s], tag_in, c.context_id + 1);
          base = std::max(base, ByteReader(e.payload).u32());
        }
        ByteWriter w;
        w.u32(base);
        for (std::uint32_t s = 1; s < size; ++s) {
          post_internal(c.group[s], c.context_id + 1, tag_out, w.data());
        }
      } else {
        ByteWriter w;
        w.u32(next_context_);
        post_internal(c.group[0], c.context_id + 1, tag_in, w.take());
        Envelope e = fabric_.match(rank_, c.group[0], tag_out, c.context_id + 1);
        base = ByteReader(e.payload).u32();
      }
    }
    next_context_ = base + 2;
    return base;
  }

  NetworkFabric& fabric_;
  RankId rank_;
  std::uint32_t next_context_ = 0;
  std::vector<CommObj> comms_;
  std::vector<TypeObj> types_;
  std::vector<OpObj> ops_;
  std::vector<ReqObj> reqs_;
  std::vector<std::uint8_t> reply0_;
  PredefinedNatives predefined_{};
};

}  // namespace

std::unique_ptr<BackendSession> make_index_backend(NetworkFabric& fabric, RankId rank) {
  return std::make_unique<IndexSession>(fabric, rank);
}

}  // namespace mpidesk
