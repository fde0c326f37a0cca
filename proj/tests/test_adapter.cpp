#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <random>
#include <sstream>

#include "mpidesk/adapter.hpp"
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

}  // namespace

TEST_CASE("bind resolves world to the backend's native representation") {
  {
    NetworkFabric f(1);
    AdapterInstance a = AdapterInstance::bind("index", f, 0);
    CHECK((a.abi_to_native(ABI_COMM_WORLD) >> 24) == 0x44);
  }
  {
    NetworkFabric f(1);
    AdapterInstance a = AdapterInstance::bind("ref", f, 0);
    CHECK(a.abi_to_native(ABI_COMM_WORLD) >= 0x7F0000000000ull);
  }
  {
    NetworkFabric f(1);
    CHECK(code_of([&] { AdapterInstance::bind("openmpi", f, 0); }) ==
          ErrorCode::BackendFailure);
  }
}

TEST_CASE("abi_to_native errors") {
  NetworkFabric f(1);
  AdapterInstance a = AdapterInstance::bind("index", f, 0);
  CHECK(code_of([&] { a.abi_to_native(AbiHandle(0x10001000u)); }) == ErrorCode::InvalidHandle);
  CHECK(code_of([&] { a.abi_to_native(AbiHandle(0x70000001u)); }) == ErrorCode::KindMismatch);
}

TEST_CASE("native_to_abi registers fresh dynamic indexes idempotently") {
  NetworkFabric f(1);
  AdapterInstance a = AdapterInstance::bind("ref", f, 0);
  const NativeHandle raw1 = 0x7F0000009999ull;
  const NativeHandle raw2 = 0x7F000000999Aull;
  const AbiHandle h1 = a.native_to_abi(HandleKind::Comm, raw1);
  CHECK(h1.index() == kPredefinedIndexLimit);
  CHECK(a.native_to_abi(HandleKind::Comm, raw1) == h1);
  const AbiHandle h2 = a.native_to_abi(HandleKind::Comm, raw2);
  CHECK(h2 != h1);
  CHECK(h2.index() == kPredefinedIndexLimit + 1);
  CHECK(a.abi_to_native(h1) == raw1);
  CHECK(a.table_is_bijective());
}

TEST_CASE("round-trip identity over every predefined pair") {
  for (const char* name : kBackends) {
    NetworkFabric f(1);
    AdapterInstance a = AdapterInstance::bind(name, f, 0);
    for (AbiHandle h : {ABI_COMM_WORLD, ABI_COMM_SELF, ABI_BYTE, ABI_I32, ABI_I64, ABI_F64,
                        ABI_SUM, ABI_MAX, ABI_MIN, ABI_PROD}) {
      const auto [kind, idx] = decode_handle(h);
      (void)idx;
      CHECK(a.native_to_abi(kind, a.abi_to_native(h)) == h);
    }
  }
}

TEST_CASE("wildcard sentinels translate per backend and never leak back") {
  for (const char* name : kBackends) {
    NetworkFabric f(2);
    run_on_ranks(f, [&](RankId r) {
      AdapterInstance a = AdapterInstance::bind(name, f, r);
      if (r == 0) {
        const std::int32_t v = 31;
        a.send(&v, 1, ABI_I32, 1, 6, ABI_COMM_WORLD);
      } else {
        std::int32_t v = 0;
        const AbiStatus st = a.recv(&v, 1, ABI_I32, ABI_ANY_SOURCE, ABI_ANY_TAG, ABI_COMM_WORLD);
        CHECK(v == 31);
        CHECK(st.source == 0);  // true source rank, never a sentinel
        CHECK(st.tag == 6);
        CHECK(st.count_bytes == 4);
      }
    });
  }
}

TEST_CASE("negative non-wildcard ranks and tags are rejected, not passed through") {
  // IndexBackend's native ANY_SOURCE is -2; an ABI-level -2 must not become
  // an accidental wildcard.
  NetworkFabric f(1);
  AdapterInstance a = AdapterInstance::bind("index", f, 0);
  std::int32_t v = 0;
  CHECK(code_of([&] { a.recv(&v, 1, ABI_I32, -2, ABI_ANY_TAG, ABI_COMM_WORLD); }) ==
        ErrorCode::BackendFailure);
  CHECK(code_of([&] { a.recv(&v, 1, ABI_I32, ABI_ANY_SOURCE, -2, ABI_COMM_WORLD); }) ==
        ErrorCode::BackendFailure);
  CHECK(code_of([&] { a.send(&v, 1, ABI_I32, 0, -3, ABI_COMM_WORLD); }) ==
        ErrorCode::BackendFailure);
}

TEST_CASE("status field translation differs by layout but agrees by name") {
  for (const char* name : kBackends) {
    NetworkFabric f(1);
    AdapterInstance a = AdapterInstance::bind(name, f, 0);
    const std::uint8_t data[3] = {9, 8, 7};
    a.send(data, 3, ABI_BYTE, 0, 11, ABI_COMM_WORLD);
    std::uint8_t buf[3] = {};
    const AbiStatus st = a.recv(buf, 3, ABI_BYTE, 0, 11, ABI_COMM_WORLD);
    CHECK(st.source == 0);
    CHECK(st.tag == 11);
    CHECK(st.error == 0);
    CHECK(st.count_bytes == 3);
  }
}

TEST_CASE("forwarded comm_split returns a fresh dynamic ABI handle") {
  for (const char* name : kBackends) {
    NetworkFabric f(2);
    run_on_ranks(f, [&](RankId r) {
      AdapterInstance a = AdapterInstance::bind(name, f, r);
      const AbiHandle sub = a.comm_split(ABI_COMM_WORLD, 0, static_cast<std::int32_t>(r));
      CHECK(decode_handle(sub).first == HandleKind::Comm);
      CHECK(sub.index() >= kPredefinedIndexLimit);
      CHECK(a.comm_size(sub) == 2);
      const AbiHandle none = a.comm_split(ABI_COMM_WORLD, -1, 0);
      CHECK(none.is_null());
    });
  }
}

TEST_CASE("forwarded allreduce is backend independent") {
  for (const char* name : kBackends) {
    NetworkFabric f(4);
    run_on_ranks(f, [&](RankId r) {
      AdapterInstance a = AdapterInstance::bind(name, f, r);
      const std::int32_t v = static_cast<std::int32_t>(r + 1);
      std::int32_t out = 0;
      a.allreduce(&v, &out, 1, ABI_I32, ABI_SUM, ABI_COMM_WORLD);
      CHECK(out == 10);
    });
  }
}

TEST_CASE("free unregisters the pair; stale handles stay invalid") {
  for (const char* name : kBackends) {
    NetworkFabric f(1);
    AdapterInstance a = AdapterInstance::bind(name, f, 0);
    const AbiHandle dup = a.comm_dup(ABI_COMM_WORLD);
    CHECK(a.comm_size(dup) == 1);
    a.comm_free(dup);
    CHECK(code_of([&] { a.comm_size(dup); }) == ErrorCode::InvalidHandle);
    CHECK(code_of([&] { a.comm_free(dup); }) == ErrorCode::InvalidHandle);
    // Retired dynamic indexes are never reused.
    const AbiHandle next = a.comm_dup(ABI_COMM_WORLD);
    CHECK(next.index() > dup.index());
    CHECK(a.table_is_bijective());
  }
}

TEST_CASE("kind safety across every forwarded operation") {
  NetworkFabric f(1);
  AdapterInstance a = AdapterInstance::bind("index", f, 0);
  std::int32_t buf = 0;
  // A valid handle of every wrong kind, fuzzed across parameters.
  for (AbiHandle wrong : {ABI_BYTE, ABI_SUM, ABI_COMM_WORLD}) {
    if (decode_handle(wrong).first != HandleKind::Comm) {
      CHECK(code_of([&] { a.comm_size(wrong); }) == ErrorCode::KindMismatch);
      CHECK(code_of([&] { a.barrier(wrong); }) == ErrorCode::KindMismatch);
      CHECK(code_of([&] { a.send(&buf, 1, ABI_I32, 0, 0, wrong); }) == ErrorCode::KindMismatch);
    }
    if (decode_handle(wrong).first != HandleKind::Datatype) {
      CHECK(code_of([&] { a.type_extent(wrong); }) == ErrorCode::KindMismatch);
      CHECK(code_of([&] { a.send(&buf, 1, wrong, 0, 0, ABI_COMM_WORLD); }) ==
            ErrorCode::KindMismatch);
    }
    if (decode_handle(wrong).first != HandleKind::Op) {
      std::int32_t out = 0;
      CHECK(code_of([&] { a.allreduce(&buf, &out, 1, ABI_I32, wrong, ABI_COMM_WORLD); }) ==
            ErrorCode::KindMismatch);
    }
    if (decode_handle(wrong).first != HandleKind::Request) {
      CHECK(code_of([&] { a.wait(wrong); }) == ErrorCode::KindMismatch);
    }
  }
}

TEST_CASE("dump_table emits kind, abi and native columns") {
  NetworkFabric f(1);
  AdapterInstance a = AdapterInstance::bind("index", f, 0);
  std::ostringstream os;
  a.dump_table(os);
  const std::string text = os.str();
  CHECK(text.find("comm\t0x10000000\t0x") != std::string::npos);
  CHECK(text.find("datatype\t0x30000003\t0x") != std::string::npos);
  CHECK(text.find("op\t0x40000002\t0x") != std::string::npos);
}

TEST_CASE("randomized create/use/free sequences keep the table bijective") {
  for (const char* name : kBackends) {
    std::mt19937 rng(std::string_view(name) == "index" ? 11 : 22);
    for (int seq = 0; seq < 200; ++seq) {
      NetworkFabric f(1);
      AdapterInstance a = AdapterInstance::bind(name, f, 0);
      std::vector<AbiHandle> live_comms;
      std::vector<AbiHandle> dead;
      for (int step = 0; step < 30; ++step) {
        switch (rng() % 4) {
          case 0:
            live_comms.push_back(a.comm_dup(ABI_COMM_WORLD));
            break;
          case 1:
            if (!live_comms.empty()) {
              const std::size_t i = rng() % live_comms.size();
              CHECK(a.comm_size(live_comms[i]) == 1);
            }
            break;
          case 2:
            if (!live_comms.empty()) {
              const std::size_t i = rng() % live_comms.size();
              a.comm_free(live_comms[i]);
              dead.push_back(live_comms[i]);
              live_comms.erase(live_comms.begin() + static_cast<std::ptrdiff_t>(i));
            }
            break;
          case 3:
            if (!dead.empty()) {
              const AbiHandle h = dead[rng() % dead.size()];
              CHECK(code_of([&] { a.comm_size(h); }) == ErrorCode::InvalidHandle);
            }
            break;
        }
        CHECK(a.table_is_bijective());
      }
    }
  }
}
