#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lped/models.hpp"
#include "lped/tensor.hpp"

// Versioned named-tensor container. Layout (all integers little-endian):
//
//   "LPED"                      4-byte magic
//   u32  format_version
//   u64  metadata length, then that many bytes of UTF-8 JSON
//   u32  record count
//   per record:
//     u32 name length, name bytes
//     u8  dtype (1 = f64, 2 = u8)
//     u8  rank, then rank x i64 extents
//     u64 payload length, raw little-endian payload
namespace lped::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class DType : std::uint8_t { F64 = 1, U8 = 2 };

struct Record {
  std::string name;
  DType dtype = DType::F64;
  std::vector<std::int64_t> extents;
  std::vector<std::uint8_t> payload;

  bool operator==(const Record&) const = default;
};

class Checkpoint {
 public:
  std::uint32_t format_version = kFormatVersion;
  nlohmann::json meta = nlohmann::json::object();

  void put(const std::string& name, const Tensor& tensor);
  bool has(const std::string& name) const;
  // Throws a Format error if absent or not an f64 record.
  Tensor get(const std::string& name) const;
  const std::vector<Record>& records() const { return records_; }
  void add_record(Record record);

  bool operator==(const Checkpoint&) const = default;

 private:
  std::vector<Record> records_;
};

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
// Rejects bad magic (Format) and unsupported versions (Version).
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Parameters and buffers go in under their network-qualified names; the
// network's architecture hash is recorded in meta.networks.<name>.
void store_network(Checkpoint& checkpoint, const models::Network& net);
// Copies stored values into `net`. Missing tensors, shape differences or a
// recorded architecture hash that differs from the network's raise Format.
void restore_network(const Checkpoint& checkpoint, models::Network& net);

std::string hex64(std::uint64_t value);

}  // namespace lped::ckpt
