#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "srelu/errors.hpp"
#include "srelu/models.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

constexpr unsigned char kMagic[4] = {'S', 'R', 'L', 'U'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const unsigned char> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("parameter file truncated while reading ") + what);
    }
  }
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_params(const ParameterSet& params) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kParamFileVersion);
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put_u32(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (auto v : p.value.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

ParameterSet decode_params(std::span<const unsigned char> bytes, const ArchitectureSpec& spec) {
  Reader r(bytes);
  auto magic = r.take(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw FormatError("not a parameter file: bad magic (expected \"SRLU\")");
  }
  auto version = r.u32("version");
  if (version != kParamFileVersion) {
    throw FormatError("unsupported parameter file version " + std::to_string(version));
  }
  const auto expected = spec.parameters();
  auto count = r.u32("tensor count");
  ParameterSet params;
  for (std::uint32_t t = 0; t < count; ++t) {
    auto name_len = r.u32("name length");
    auto name_bytes = r.take(name_len, "tensor name");
    std::string name(name_bytes.begin(), name_bytes.end());
    auto rank = r.u32("rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32("dims"));
    if (t >= expected.size()) {
      throw ShapeError("parameter file has extra tensor '" + name + "' beyond the " +
                       std::to_string(expected.size()) + " that " +
                       std::string(architecture_name(spec.id)) + " needs");
    }
    const auto& want = expected[t];
    if (name != want.name) {
      throw ShapeError("parameter tensor " + std::to_string(t) + " is '" + name + "', " +
                       std::string(architecture_name(spec.id)) + " expects '" + want.name + "'");
    }
    if (shape != want.shape) {
      throw ShapeError("parameter tensor '" + name + "' has shape " + shape_to_string(shape) +
                       ", " + std::string(architecture_name(spec.id)) + " expects " +
                       shape_to_string(want.shape));
    }
    std::vector<Real> values(shape_numel(shape));
    auto raw = r.take(values.size() * 4, "tensor values");
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= std::uint32_t(raw[i * 4 + b]) << (8 * b);
      values[i] = static_cast<Real>(std::bit_cast<float>(bits));
    }
    params.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
  }
  if (count < expected.size()) {
    throw ShapeError("parameter file lacks tensor '" + expected[count].name + "' needed by " +
                     std::string(architecture_name(spec.id)));
  }
  if (!r.done()) throw FormatError("parameter file has trailing bytes");
  return params;
}

void save_params(const Model& model, const std::filesystem::path& path) {
  auto bytes = encode_params(model.params());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

Model load_params(const std::filesystem::path& path, const ArchitectureSpec& spec) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open parameter file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return Model(spec, decode_params(bytes, spec));
}

SRELU_NAMESPACE_END
