#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "mpidesk/abi.hpp"

using namespace mpidesk;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const AbiError& e) {
    return e.code();
  }
  return ErrorCode::Success;
}

}  // namespace

TEST_CASE("encode_handle fixed layouts") {
  CHECK(encode_handle(HandleKind::Comm, 0).raw() == 0x10000000u);
  CHECK(encode_handle(HandleKind::Null, 0).raw() == 0x00000000u);
  CHECK(encode_handle(HandleKind::Datatype, 4097).raw() == 0x30001001u);
  CHECK(code_of([] { encode_handle(HandleKind::Comm, 1u << 28); }) == ErrorCode::InvalidHandle);
}

TEST_CASE("decode_handle inverse and errors") {
  CHECK(decode_handle(AbiHandle(0x10000000u)) ==
        std::pair{HandleKind::Comm, std::uint32_t{0}});
  CHECK(decode_handle(AbiHandle(0x40000002u)) == std::pair{HandleKind::Op, std::uint32_t{2}});
  CHECK(code_of([] { decode_handle(AbiHandle(0x70000000u)); }) == ErrorCode::InvalidHandle);
}

TEST_CASE("encode/decode round-trip over all kinds") {
  std::mt19937 rng(1234);
  std::uniform_int_distribution<std::uint32_t> index_dist(0, kAbiIndexMax);
  for (std::uint32_t kind = 0; kind < kHandleKindCount; ++kind) {
    for (int i = 0; i < 2000; ++i) {
      const std::uint32_t index = index_dist(rng);
      const AbiHandle h = encode_handle(static_cast<HandleKind>(kind), index);
      const auto [k, idx] = decode_handle(h);
      CHECK(k == static_cast<HandleKind>(kind));
      CHECK(idx == index);
    }
  }
}

TEST_CASE("predefined-range cutoff") {
  CHECK(AbiHandle(0x10000fffu).is_predefined());
  CHECK_FALSE(AbiHandle(0x10001000u).is_predefined());
  CHECK(ABI_COMM_NULL.is_null());
  CHECK_FALSE(ABI_COMM_WORLD.is_null());
}

TEST_CASE("constant_lookup fixed values") {
  CHECK(std::get<std::int32_t>(constant_lookup("ABI_ANY_SOURCE")) == -1);
  CHECK(std::get<std::int32_t>(constant_lookup("ABI_ANY_TAG")) == -1);
  CHECK(std::get<AbiHandle>(constant_lookup("ABI_COMM_SELF")).raw() == 0x10000001u);
  CHECK(std::get<AbiHandle>(constant_lookup("ABI_SUM")).raw() == 0x40000000u);
  CHECK(std::get<AbiHandle>(constant_lookup("ABI_MIN")).raw() == 0x40000002u);
  CHECK(code_of([] { constant_lookup("ABI_BOGUS"); }) == ErrorCode::InvalidHandle);
}

TEST_CASE("predefined handle values are distinct") {
  std::vector<std::uint32_t> raws;
  for (auto* e = abi_constants_begin(); e != abi_constants_end(); ++e) {
    if (std::holds_alternative<AbiHandle>(e->value)) {
      raws.push_back(std::get<AbiHandle>(e->value).raw());
    }
  }
  std::sort(raws.begin(), raws.end());
  CHECK(std::adjacent_find(raws.begin(), raws.end()) == raws.end());
}

TEST_CASE("shipped abi_constants.tsv matches the table") {
  std::ifstream in(std::string(MPIDESK_SOURCE_DIR) + "/abi_constants.tsv");
  REQUIRE(in.good());
  std::stringstream file;
  file << in.rdbuf();
  CHECK(file.str() == abi_constants_tsv());
}
