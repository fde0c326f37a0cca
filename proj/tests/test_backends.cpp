#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "mpidesk/backend.hpp"
#include "mpidesk/runner.hpp"

using namespace mpidesk;

namespace {

const char* kBackends[2] = {"index", "ref"};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const AbiError& e) {
    return e.code();
  }
  return ErrorCode::Success;
}

AbiStatus status_of(const BackendSession& s, const unsigned char* native) {
  const NativeStatusLayout layout = s.status_layout();
  AbiStatus st;
  std::memcpy(&st.source, native + layout.src_off, sizeof(st.source));
  std::memcpy(&st.tag, native + layout.tag_off, sizeof(st.tag));
  std::memcpy(&st.error, native + layout.err_off, sizeof(st.error));
  std::memcpy(&st.count_bytes, native + layout.bytes_off, sizeof(st.count_bytes));
  return st;
}

}  // namespace

TEST_CASE("native handle spaces are disjoint by construction") {
  for (const char* name : kBackends) {
    NetworkFabric f(1);
    auto s = make_backend(name, f, 0);
    const NativeHandle world = s->predefined().comm_world;
    if (std::string_view(name) == "index") {
      CHECK((world >> 24) == 0x44);
      CHECK(world < (1ull << 32));
    } else {
      CHECK(world >= 0x7F0000000000ull);
    }
  }
}

TEST_CASE("second session for the same rank is refused") {
  NetworkFabric f(1);
  auto s = make_backend("index", f, 0);
  CHECK(code_of([&] { make_backend("index", f, 0); }) == ErrorCode::BackendFailure);
  CHECK(code_of([&] { make_backend("ref", f, 0); }) == ErrorCode::BackendFailure);
  s.reset();  // a replaced lower half may be relaunched
  CHECK(code_of([&] { auto s2 = make_backend("ref", f, 0); }) == ErrorCode::Success);
}

TEST_CASE("world and self shapes") {
  for (const char* name : kBackends) {
    NetworkFabric f(3);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      CHECK(s->comm_size(s->predefined().comm_world) == 3);
      CHECK(s->comm_rank(s->predefined().comm_world) == r);
      CHECK(s->comm_size(s->predefined().comm_self) == 1);
      CHECK(s->comm_rank(s->predefined().comm_self) == 0);
    });
  }
}

TEST_CASE("send/recv status fields match the delivered envelope") {
  for (const char* name : kBackends) {
    NetworkFabric f(2);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const NativeHandle world = s->predefined().comm_world;
      const NativeHandle i32 = s->predefined().datatypes[1];
      if (r == 0) {
        const std::int32_t data[4] = {1, 2, 3, 4};
        s->send(data, 4, i32, 1, 9, world);
      } else {
        std::int32_t data[4] = {};
        unsigned char native[kMaxNativeStatusSize] = {};
        s->recv(data, 4, i32, s->sentinels().any_source, s->sentinels().any_tag, world, native);
        const AbiStatus st = status_of(*s, native);
        CHECK(st.source == 0);
        CHECK(st.tag == 9);
        CHECK(st.error == 0);
        CHECK(st.count_bytes == 16);
        CHECK(data[3] == 4);
      }
    });
  }
}

TEST_CASE("same-stream payloads arrive in send order") {
  for (const char* name : kBackends) {
    NetworkFabric f(2);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const NativeHandle world = s->predefined().comm_world;
      const NativeHandle byte = s->predefined().datatypes[0];
      if (r == 0) {
        const std::uint8_t first = 0xAA, second = 0xBB;
        s->send(&first, 1, byte, 1, 3, world);
        s->send(&second, 1, byte, 1, 3, world);
      } else {
        std::uint8_t got = 0;
        unsigned char native[kMaxNativeStatusSize];
        s->recv(&got, 1, byte, 0, 3, world, native);
        CHECK(got == 0xAA);
        s->recv(&got, 1, byte, 0, 3, world, native);
        CHECK(got == 0xBB);
      }
    });
  }
}

TEST_CASE("truncation delivers the prefix and flags the status") {
  for (const char* name : kBackends) {
    NetworkFabric f(2);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const NativeHandle world = s->predefined().comm_world;
      const NativeHandle byte = s->predefined().datatypes[0];
      if (r == 0) {
        const std::uint8_t data[8] = {1, 2, 3, 4, 5, 6, 7, 8};
        s->send(data, 8, byte, 1, 0, world);
      } else {
        std::uint8_t buf[4] = {};
        unsigned char native[kMaxNativeStatusSize];
        s->recv(buf, 4, byte, 0, 0, world, native);
        const AbiStatus st = status_of(*s, native);
        CHECK(st.error == static_cast<std::int32_t>(ErrorCode::Truncated));
        CHECK(st.count_bytes == 4);
        CHECK(buf[0] == 1);
        CHECK(buf[3] == 4);
      }
    });
  }
}

TEST_CASE("comm_split forms keyed color groups") {
  for (const char* name : kBackends) {
    NetworkFabric f(4);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const NativeHandle world = s->predefined().comm_world;

      // color = rank % 2, key = rank: world rank 2 lands at rank 1 of the
      // even communicator.
      const NativeHandle by_parity = s->comm_split(world, static_cast<std::int32_t>(r % 2),
                                                   static_cast<std::int32_t>(r));
      CHECK(s->comm_size(by_parity) == 2);
      CHECK(s->comm_rank(by_parity) == r / 2);

      // key = -rank reverses the order.
      const NativeHandle reversed = s->comm_split(world, 0, -static_cast<std::int32_t>(r));
      CHECK(s->comm_size(reversed) == 4);
      CHECK(s->comm_rank(reversed) == 3 - r);

      // color -1 opts out.
      const NativeHandle opt_out =
          s->comm_split(world, r == 0 ? -1 : 0, static_cast<std::int32_t>(r));
      if (r == 0) {
        CHECK(opt_out == kNativeNull);
      } else {
        CHECK(s->comm_size(opt_out) == 3);
        CHECK(s->comm_rank(opt_out) == r - 1);
      }
    });
  }
}

TEST_CASE("point-to-point works on a split communicator") {
  for (const char* name : kBackends) {
    NetworkFabric f(4);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const NativeHandle world = s->predefined().comm_world;
      const NativeHandle i32 = s->predefined().datatypes[1];
      const NativeHandle half = s->comm_split(world, static_cast<std::int32_t>(r % 2),
                                              static_cast<std::int32_t>(r));
      // Within each pair, comm rank 0 sends its world rank to comm rank 1.
      if (s->comm_rank(half) == 0) {
        const std::int32_t v = static_cast<std::int32_t>(r);
        s->send(&v, 1, i32, 1, 1, half);
      } else {
        std::int32_t v = -1;
        unsigned char native[kMaxNativeStatusSize];
        s->recv(&v, 1, i32, 0, 1, half, native);
        CHECK(v == static_cast<std::int32_t>(r - 2));
        CHECK(status_of(*s, native).source == 0);
      }
    });
  }
}

TEST_CASE("barrier releases only after everyone entered") {
  for (const char* name : kBackends) {
    NetworkFabric f(4);
    std::atomic<int> entered{0};
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      std::this_thread::sleep_for(std::chrono::milliseconds(3 * r));
      entered.fetch_add(1);
      s->barrier(s->predefined().comm_world);
      CHECK(entered.load() == 4);
      s->barrier(s->predefined().comm_self);  // size-1: immediate
    });
    CHECK(f.inflight() == 0);
  }
}

TEST_CASE("barrier on the null handle is invalid") {
  for (const char* name : kBackends) {
    NetworkFabric f(1);
    auto s = make_backend(name, f, 0);
    CHECK(code_of([&] { s->barrier(kNativeNull); }) == ErrorCode::InvalidHandle);
  }
}

TEST_CASE("bcast distributes the root buffer") {
  for (const char* name : kBackends) {
    NetworkFabric f(4);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const NativeHandle world = s->predefined().comm_world;
      const NativeHandle i32 = s->predefined().datatypes[1];
      std::int32_t buf[2] = {r == 0 ? 7 : -1, r == 0 ? 7 : -1};
      s->bcast(buf, 2, i32, 0, world);
      CHECK(buf[0] == 7);
      CHECK(buf[1] == 7);

      std::int32_t self_buf = static_cast<std::int32_t>(r);
      s->bcast(&self_buf, 1, i32, 0, s->predefined().comm_self);
      CHECK(self_buf == static_cast<std::int32_t>(r));

      CHECK(code_of([&] { s->bcast(buf, 2, i32, 9, world); }) == ErrorCode::InvalidHandle);
    });
  }
}

TEST_CASE("allreduce uses the canonical rank-ascending order") {
  double sums[2] = {0.0, 0.0};
  int which = 0;
  for (const char* name : kBackends) {
    NetworkFabric f(3);
    std::mutex m;
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const NativeHandle world = s->predefined().comm_world;
      const NativeHandle f64 = s->predefined().datatypes[3];
      const NativeHandle i32 = s->predefined().datatypes[1];

      const double mine = 0.1 * (r + 1);
      double out = 0.0;
      s->allreduce(&mine, &out, 1, f64, s->predefined().ops[0], world);
      // Exactly ((0.1 + 0.2) + 0.3) in IEEE double on every rank.
      CHECK(out == (0.1 * 1 + 0.1 * 2) + 0.1 * 3);
      if (r == 0) {
        std::lock_guard<std::mutex> lock(m);
        sums[which] = out;
      }

      const std::int32_t vals[3] = {5, 9, 2};
      std::int32_t m_out = 0;
      s->allreduce(&vals[r], &m_out, 1, i32, s->predefined().ops[1], world);
      CHECK(m_out == 9);
    });
    ++which;
  }
  CHECK(std::memcmp(&sums[0], &sums[1], sizeof(double)) == 0);
}

TEST_CASE("allreduce of four i32 values sums to ten") {
  for (const char* name : kBackends) {
    NetworkFabric f(4);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const std::int32_t v = static_cast<std::int32_t>(r + 1);
      std::int32_t out = 0;
      s->allreduce(&v, &out, 1, s->predefined().datatypes[1], s->predefined().ops[0],
                   s->predefined().comm_world);
      CHECK(out == 10);
    });
  }
}

TEST_CASE("allreduce rejects byte data") {
  for (const char* name : kBackends) {
    NetworkFabric f(1);
    auto s = make_backend(name, f, 0);
    std::uint8_t in = 1, out = 0;
    CHECK(code_of([&] {
            s->allreduce(&in, &out, 1, s->predefined().datatypes[0], s->predefined().ops[0],
                         s->predefined().comm_world);
          }) == ErrorCode::KindMismatch);
  }
}

TEST_CASE("alltoall exchanges blocks") {
  for (const char* name : kBackends) {
    NetworkFabric f(2);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const NativeHandle byte = s->predefined().datatypes[0];
      // r0 sends [a0,a1], r1 sends [b0,b1]: r0 receives [a0,b0], r1 [a1,b1].
      const std::uint8_t send[2] = {static_cast<std::uint8_t>(10 * (r + 1)),
                                    static_cast<std::uint8_t>(10 * (r + 1) + 1)};
      std::uint8_t recv[2] = {};
      s->alltoall(send, recv, 1, byte, s->predefined().comm_world);
      if (r == 0) {
        CHECK(recv[0] == 10);
        CHECK(recv[1] == 20);
      } else {
        CHECK(recv[0] == 11);
        CHECK(recv[1] == 21);
      }

      std::uint8_t self_in = 42, self_out = 0;
      s->alltoall(&self_in, &self_out, 1, byte, s->predefined().comm_self);
      CHECK(self_out == 42);
      s->alltoall(&self_in, &self_out, 0, byte, s->predefined().comm_world);
    });
  }
}

TEST_CASE("type_contiguous composes extents") {
  for (const char* name : kBackends) {
    NetworkFabric f(1);
    auto s = make_backend(name, f, 0);
    const NativeHandle i32 = s->predefined().datatypes[1];
    const NativeHandle quad = s->type_contiguous(4, i32);
    CHECK(s->type_extent(quad) == 16);
    const NativeHandle pair_of_quads = s->type_contiguous(2, quad);
    CHECK(s->type_extent(pair_of_quads) == 32);
    CHECK(code_of([&] { s->type_contiguous(0, i32); }) == ErrorCode::InvalidHandle);
  }
}

TEST_CASE("isend/irecv complete through wait and test") {
  for (const char* name : kBackends) {
    NetworkFabric f(2);
    run_on_ranks(f, [&](RankId r) {
      auto s = make_backend(name, f, r);
      const NativeHandle world = s->predefined().comm_world;
      const NativeHandle i32 = s->predefined().datatypes[1];
      unsigned char native[kMaxNativeStatusSize];
      if (r == 0) {
        const std::int32_t v = 77;
        const NativeHandle req = s->isend(&v, 1, i32, 1, 4, world);
        s->wait(req, native);
        // A retired request handle is dead.
        CHECK(code_of([&] { s->wait(req, native); }) == ErrorCode::InvalidHandle);
      } else {
        std::int32_t v = 0;
        const NativeHandle req = s->irecv(&v, 1, i32, 0, 4, world);
        while (!s->test(req, native)) std::this_thread::yield();
        CHECK(v == 77);
        CHECK(status_of(*s, native).source == 0);
      }
    });
  }
}

TEST_CASE("kind-mismatched native handles are rejected") {
  for (const char* name : kBackends) {
    NetworkFabric f(1);
    auto s = make_backend(name, f, 0);
    const NativeHandle dtype = s->predefined().datatypes[0];
    const NativeHandle world = s->predefined().comm_world;
    CHECK(code_of([&] { s->comm_size(dtype); }) == ErrorCode::KindMismatch);
    CHECK(code_of([&] { s->type_extent(world); }) == ErrorCode::KindMismatch);
    CHECK(code_of([&] { s->barrier(dtype); }) == ErrorCode::KindMismatch);
  }
}

TEST_CASE("freed communicators and datatypes become invalid") {
  for (const char* name : kBackends) {
    NetworkFabric f(1);
    auto s = make_backend(name, f, 0);
    const NativeHandle dup = s->comm_dup(s->predefined().comm_world);
    s->comm_free(dup);
    CHECK(code_of([&] { s->comm_size(dup); }) == ErrorCode::InvalidHandle);
    CHECK(code_of([&] { s->comm_free(dup); }) == ErrorCode::InvalidHandle);
    CHECK(code_of([&] { s->comm_free(s->predefined().comm_world); }) ==
          ErrorCode::InvalidHandle);

    const NativeHandle t = s->type_contiguous(2, s->predefined().datatypes[1]);
    s->type_free(t);
    CHECK(code_of([&] { s->type_extent(t); }) == ErrorCode::InvalidHandle);
    CHECK(code_of([&] { s->type_free(s->predefined().datatypes[0]); }) ==
          ErrorCode::InvalidHandle);
  }
}

namespace {

// Scripted program touching split, reduce, alltoall, wildcard p2p; the
// application-visible bytes must be identical on both backends.
std::vector<std::uint8_t> run_equivalence_program(const char* backend) {
  NetworkFabric f(4);
  std::vector<std::vector<std::uint8_t>> per_rank(4);
  run_on_ranks(f, [&](RankId r) {
    auto s = make_backend(backend, f, r);
    const NativeHandle world = s->predefined().comm_world;
    const NativeHandle i32 = s->predefined().datatypes[1];
    const NativeHandle f64 = s->predefined().datatypes[3];
    std::vector<std::uint8_t>& local = per_rank[r];

    const NativeHandle half =
        s->comm_split(world, static_cast<std::int32_t>(r < 2 ? 0 : 1), -static_cast<int>(r));
    local.push_back(static_cast<std::uint8_t>(s->comm_rank(half)));

    double in = 1.0 / (r + 2);
    double out = 0.0;
    s->allreduce(&in, &out, 1, f64, s->predefined().ops[0], world);
    const auto* outb = reinterpret_cast<const std::uint8_t*>(&out);
    local.insert(local.end(), outb, outb + sizeof(out));

    std::int32_t tok[4] = {};
    const std::int32_t mine[4] = {static_cast<std::int32_t>(r), 1, 2, 3};
    s->alltoall(mine, tok, 1, i32, world);
    const auto* tokb = reinterpret_cast<const std::uint8_t*>(tok);
    local.insert(local.end(), tokb, tokb + sizeof(tok));

    std::int32_t ring = static_cast<std::int32_t>(r);
    s->send(&ring, 1, i32, static_cast<std::int32_t>((r + 1) % 4), 5, world);
    unsigned char native[kMaxNativeStatusSize];
    std::int32_t got = 0;
    s->recv(&got, 1, i32, s->sentinels().any_source, 5, world, native);
    const AbiStatus st = status_of(*s, native);
    local.push_back(static_cast<std::uint8_t>(got));
    local.push_back(static_cast<std::uint8_t>(st.source));
  });
  std::vector<std::uint8_t> flat;
  for (const auto& c : per_rank) flat.insert(flat.end(), c.begin(), c.end());
  return flat;
}

}  // namespace

TEST_CASE("behavioral equivalence across the two backends") {
  CHECK(run_equivalence_program("index") == run_equivalence_program("ref"));
}
