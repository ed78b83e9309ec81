#include <doctest.h>

#include <filesystem>

#include "lped/checkpoint.hpp"
#include "lped/error.hpp"
#include "lped/models.hpp"
#include "lped/trainer.hpp"
#include "support/testing.hpp"

using namespace lped;
using namespace lped::ckpt;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Value;
}

Checkpoint sample() {
  testing::Rng rng(1);
  Checkpoint c;
  c.meta = {{"kind", "test"}, {"step", 3}};
  c.put("a", testing::normal(Shape{2, 3, 4, 5}, rng));
  c.put("b/scalar", Tensor(Shape{1, 1, 1, 1}, -0.0));
  c.add_record(Record{"bytes", DType::U8, {3}, {1, 2, 255}});
  return c;
}

}  // namespace

TEST_CASE("serialize round trip is bit exact") {
  const Checkpoint c = sample();
  const auto bytes = serialize(c);
  const Checkpoint back = deserialize(bytes);
  CHECK(back == c);
  CHECK(serialize(back) == bytes);
  CHECK(back.get("a") == c.get("a"));
  CHECK(std::signbit(back.get("b/scalar")[0]));
}

TEST_CASE("file round trip") {
  const auto path = std::filesystem::temp_directory_path() / "lped_test_ckpt.lped";
  save_checkpoint(sample(), path);
  CHECK(load_checkpoint(path) == sample());
  std::filesystem::remove(path);
  CHECK(kind_of([&] { load_checkpoint(path); }) == ErrorKind::Io);
}

TEST_CASE("corrupt headers are rejected") {
  auto bytes = serialize(sample());
  SUBCASE("magic") {
    bytes[0] = 'X';
    CHECK(kind_of([&] { deserialize(bytes); }) == ErrorKind::Format);
  }
  SUBCASE("version + 1") {
    bytes[4] = static_cast<std::uint8_t>(kFormatVersion + 1);
    CHECK(kind_of([&] { deserialize(bytes); }) == ErrorKind::Version);
  }
  SUBCASE("truncated") {
    bytes.resize(bytes.size() - 5);
    CHECK(kind_of([&] { deserialize(bytes); }) == ErrorKind::Format);
  }
  SUBCASE("trailing garbage") {
    bytes.push_back(0);
    CHECK(kind_of([&] { deserialize(bytes); }) == ErrorKind::Format);
  }
}

TEST_CASE("missing or mistyped records") {
  const Checkpoint c = sample();
  CHECK(c.has("a"));
  CHECK_FALSE(c.has("nope"));
  CHECK(kind_of([&] { c.get("nope"); }) == ErrorKind::Format);
  CHECK(kind_of([&] { c.get("bytes"); }) == ErrorKind::Format);
}

TEST_CASE("network store and restore") {
  models::PatchDiscriminator a("D", 3, 4), b("D", 3, 4);
  data::Rng r1(1), r2(2);
  init_params(a, r1);
  init_params(b, r2);
  Checkpoint c;
  store_network(c, a);
  CHECK(c.meta["networks"]["D"]["architecture_hash"] == hex64(a.architecture_hash()));
  restore_network(deserialize(serialize(c)), b);
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    CHECK(a.parameters()[i].second.value() == b.parameters()[i].second.value());
  for (std::size_t i = 0; i < a.buffers().size(); ++i)
    CHECK(a.buffers()[i].second.value() == b.buffers()[i].second.value());

  SUBCASE("different architecture") {
    models::PatchDiscriminator wider("D", 3, 8);
    CHECK(kind_of([&] { restore_network(c, wider); }) == ErrorKind::Format);
  }
  SUBCASE("tampered hash") {
    c.meta["networks"]["D"]["architecture_hash"] = hex64(a.architecture_hash() + 1);
    CHECK(kind_of([&] { restore_network(c, b); }) == ErrorKind::Format);
  }
  SUBCASE("absent network") {
    models::PatchDiscriminator other("E", 3, 4);
    CHECK(kind_of([&] { restore_network(c, other); }) == ErrorKind::Format);
  }
}
