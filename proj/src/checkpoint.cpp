#include "lped/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lped/error.hpp"

namespace lped::ckpt {
namespace {

constexpr char kMagic[4] = {'L', 'P', 'E', 'D'};

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  template <typename T>
  void uint(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void string(const std::string& s) { bytes(s.data(), s.size()); }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > in_.size() - pos_) fail(ErrorKind::Format, "checkpoint truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  T uint() {
    auto s = take(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(s[i]) << (8 * i);
    return v;
  }
  std::string string(std::size_t n) {
    auto s = take(n);
    return std::string(s.begin(), s.end());
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

std::vector<std::int64_t> extents_of(const Shape& s) { return {s.n, s.c, s.h, s.w}; }

}  // namespace

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << value;
  return os.str();
}

void Checkpoint::put(const std::string& name, const Tensor& tensor) {
  Record r;
  r.name = name;
  r.dtype = DType::F64;
  r.extents = extents_of(tensor.shape());
  r.payload.reserve(tensor.size() * 8);
  for (double v : tensor.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) r.payload.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  add_record(std::move(r));
}

void Checkpoint::add_record(Record record) {
  for (Record& r : records_) {
    if (r.name == record.name) {
      r = std::move(record);
      return;
    }
  }
  records_.push_back(std::move(record));
}

bool Checkpoint::has(const std::string& name) const {
  for (const Record& r : records_) {
    if (r.name == name) return true;
  }
  return false;
}

Tensor Checkpoint::get(const std::string& name) const {
  for (const Record& r : records_) {
    if (r.name != name) continue;
    if (r.dtype != DType::F64 || r.extents.size() != 4) {
      fail(ErrorKind::Format, "record " + name + " is not a 4-D f64 tensor");
    }
    const Shape s{static_cast<int>(r.extents[0]), static_cast<int>(r.extents[1]),
                  static_cast<int>(r.extents[2]), static_cast<int>(r.extents[3])};
    if (r.payload.size() != s.numel() * 8) {
      fail(ErrorKind::Format, "record " + name + " payload size mismatch");
    }
    std::vector<double> values(s.numel());
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(r.payload[i * 8 + b]) << (8 * b);
      }
      values[i] = std::bit_cast<double>(bits);
    }
    return Tensor(s, std::move(values));
  }
  fail(ErrorKind::Format, "checkpoint has no tensor named " + name);
}

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint) {
  Writer w;
  w.bytes(kMagic, 4);
  w.uint<std::uint32_t>(checkpoint.format_version);
  const std::string meta = checkpoint.meta.dump();
  w.uint<std::uint64_t>(meta.size());
  w.string(meta);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.records().size()));
  for (const Record& r : checkpoint.records()) {
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(r.name.size()));
    w.string(r.name);
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(r.dtype));
    w.uint<std::uint8_t>(static_cast<std::uint8_t>(r.extents.size()));
    for (std::int64_t e : r.extents) w.uint<std::uint64_t>(static_cast<std::uint64_t>(e));
    w.uint<std::uint64_t>(r.payload.size());
    w.bytes(r.payload.data(), r.payload.size());
  }
  return w.take();
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::Format, "not an LPED checkpoint (bad magic)");
  }
  r.take(4);
  Checkpoint out;
  out.format_version = r.uint<std::uint32_t>();
  if (out.format_version != kFormatVersion) {
    fail(ErrorKind::Version, "unsupported checkpoint format version " +
                                 std::to_string(out.format_version) +
                                 " (expected " + std::to_string(kFormatVersion) + ")");
  }
  const auto meta_len = r.uint<std::uint64_t>();
  try {
    out.meta = nlohmann::json::parse(r.string(meta_len));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("checkpoint metadata: ") + e.what());
  }
  const auto count = r.uint<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Record rec;
    rec.name = r.string(r.uint<std::uint32_t>());
    const auto dtype = r.uint<std::uint8_t>();
    if (dtype != 1 && dtype != 2) fail(ErrorKind::Format, "unknown dtype in " + rec.name);
    rec.dtype = static_cast<DType>(dtype);
    const auto rank = r.uint<std::uint8_t>();
    for (int k = 0; k < rank; ++k) {
      rec.extents.push_back(static_cast<std::int64_t>(r.uint<std::uint64_t>()));
    }
    const auto len = r.uint<std::uint64_t>();
    auto payload = r.take(len);
    rec.payload.assign(payload.begin(), payload.end());
    out.add_record(std::move(rec));
  }
  if (!r.done()) fail(ErrorKind::Format, "trailing bytes after checkpoint records");
  return out;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = serialize(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void store_network(Checkpoint& checkpoint, const models::Network& net) {
  for (const auto& [name, var] : net.parameters()) checkpoint.put(name, var.value());
  for (const auto& [name, var] : net.buffers()) checkpoint.put(name, var.value());
  checkpoint.meta["networks"][net.name()]["architecture_hash"] =
      hex64(net.architecture_hash());
}

void restore_network(const Checkpoint& checkpoint, models::Network& net) {
  const auto& nets = checkpoint.meta.contains("networks")
                         ? checkpoint.meta["networks"]
                         : nlohmann::json::object();
  if (nets.contains(net.name())) {
    const std::string stored = nets[net.name()].value("architecture_hash", "");
    if (stored != hex64(net.architecture_hash())) {
      fail(ErrorKind::Format, "architecture hash mismatch for network " +
                                  net.name() + ": checkpoint " + stored +
                                  ", model " + hex64(net.architecture_hash()));
    }
  }
  auto copy_into = [&](const std::vector<models::NamedVar>& entries) {
    for (const auto& [name, var] : entries) {
      Tensor t = checkpoint.get(name);
      if (!(t.shape() == var.shape())) {
        fail(ErrorKind::Format, "tensor " + name + " has shape " + t.shape().str() +
                                    ", model expects " + var.shape().str());
      }
      Var handle = var;
      handle.mutable_value() = std::move(t);
    }
  };
  copy_into(net.parameters());
  copy_into(net.buffers());
}

}  // namespace lped::ckpt
