#include "deepscene/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "deepscene/errors.hpp"

namespace deepscene::nn {
namespace {

constexpr std::array<char, 8> kMagic{'D', 'S', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kFloat32 = 0;

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
  }
  void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
  [[nodiscard]] const std::vector<char>& bytes() const { return bytes_; }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    return v;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated");
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  Writer w;
  w.raw(std::string(kMagic.begin(), kMagic.end()));
  w.u32(kCheckpointVersion);
  const auto meta = checkpoint.metadata.dump();
  w.u64(meta.size());
  w.raw(meta);
  w.u64(checkpoint.tensors.size());
  for (const auto& t : checkpoint.tensors) {
    if (element_count(t.shape) != t.values.size()) {
      throw DimensionError("checkpoint tensor '" + t.name + "' has shape " +
                           shape_string(t.shape) + " but " + std::to_string(t.values.size()) +
                           " values");
    }
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.raw(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (const auto d : t.shape) w.u64(d);
    w.u32(kFloat32);
    for (const auto v : t.values) w.f32(v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  if (r.raw(kMagic.size()) != std::string(kMagic.begin(), kMagic.end())) {
    throw IoError("not a deepscene checkpoint: " + path.string());
  }
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto meta_len = r.u64();
  try {
    ckpt.metadata = nlohmann::json::parse(r.raw(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt checkpoint metadata: ") + e.what());
  }
  const auto count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.raw(r.u32());
    const auto rank = r.u32();
    for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(r.u64());
    if (r.u32() != kFloat32) throw IoError("unsupported dtype in tensor '" + t.name + "'");
    t.values.resize(element_count(t.shape));
    for (auto& v : t.values) v = r.f32();
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw IoError("trailing bytes in checkpoint: " + path.string());
  return ckpt;
}

void add_parameters(Checkpoint& checkpoint, const std::string& prefix,
                    std::span<const NamedParameter<float>> params) {
  for (const auto& p : params) {
    checkpoint.tensors.push_back(
        {prefix + "/" + p.name, p.tensor.shape(), {p.tensor.values().begin(), p.tensor.values().end()}});
  }
}

void restore_parameters(const Checkpoint& checkpoint, const std::string& prefix,
                        std::span<NamedParameter<float>> params) {
  for (auto& p : params) {
    const auto name = prefix + "/" + p.name;
    const auto* t = checkpoint.find(name);
    if (t == nullptr) throw ConfigError("checkpoint lacks parameter '" + name + "'");
    if (t->shape != p.tensor.shape()) {
      throw DimensionError("checkpoint parameter '" + name + "' has shape " +
                           shape_string(t->shape) + ", network expects " +
                           shape_string(p.tensor.shape()));
    }
    std::copy(t->values.begin(), t->values.end(), p.tensor.mutable_values().begin());
  }
}

}  // namespace deepscene::nn
