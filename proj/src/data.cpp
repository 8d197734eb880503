#include "srelu/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "srelu/errors.hpp"

SRELU_NAMESPACE_BEGIN

namespace {

std::uint32_t read_be32(std::span<const unsigned char> b, std::size_t off) {
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<unsigned char>(v >> s));
}

unsigned char to_byte(Real pixel) {
  double v = std::round(static_cast<double>(pixel) * 255.0);
  return static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
}

Real from_byte(unsigned char b) { return static_cast<Real>(b) / Real(255); }

}  // namespace

std::size_t LabeledImageSet::image_numel() const {
  std::size_t n = 1;
  for (std::size_t i = 1; i < images.rank(); ++i) n *= images.dim(i);
  return n;
}

Tensor LabeledImageSet::image_range(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) {
    throw std::out_of_range("image range [" + std::to_string(begin) + "," + std::to_string(end) +
                            ") outside set of " + std::to_string(size()));
  }
  const std::size_t per = image_numel();
  auto v = images.values();
  Shape shape = images.shape();
  shape[0] = end - begin;
  return Tensor(std::move(shape),
                std::vector<Real>(v.begin() + static_cast<std::ptrdiff_t>(begin * per),
                                  v.begin() + static_cast<std::ptrdiff_t>(end * per)));
}

LabeledImageSet LabeledImageSet::slice(std::size_t begin, std::size_t end) const {
  LabeledImageSet out;
  out.name = name;
  out.images = image_range(begin, end);
  out.labels.assign(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                    labels.begin() + static_cast<std::ptrdiff_t>(end));
  out.unit_range = unit_range;
  return out;
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

LabeledImageSet parse_mnist_idx(std::span<const unsigned char> image_bytes,
                                std::span<const unsigned char> label_bytes, std::string name) {
  if (image_bytes.size() < 16) throw FormatError("IDX image file truncated in header");
  if (label_bytes.size() < 8) throw FormatError("IDX label file truncated in header");
  auto img_magic = read_be32(image_bytes, 0);
  auto lab_magic = read_be32(label_bytes, 0);
  if (img_magic != kIdxImagesMagic) {
    throw FormatError("IDX image file has magic " + std::to_string(img_magic) + ", expected 2051");
  }
  if (lab_magic != kIdxLabelsMagic) {
    throw FormatError("IDX label file has magic " + std::to_string(lab_magic) + ", expected 2049");
  }
  const std::size_t n = read_be32(image_bytes, 4);
  const std::size_t rows = read_be32(image_bytes, 8), cols = read_be32(image_bytes, 12);
  const std::size_t n_labels = read_be32(label_bytes, 4);
  if (n != n_labels) {
    throw FormatError("IDX count mismatch: " + std::to_string(n) + " images vs " +
                      std::to_string(n_labels) + " labels");
  }
  if (image_bytes.size() != 16 + n * rows * cols) {
    throw FormatError("IDX image file length " + std::to_string(image_bytes.size()) +
                      " does not match header (" + std::to_string(16 + n * rows * cols) + ")");
  }
  if (label_bytes.size() != 8 + n) {
    throw FormatError("IDX label file length " + std::to_string(label_bytes.size()) +
                      " does not match header (" + std::to_string(8 + n) + ")");
  }
  std::vector<Real> pixels(n * rows * cols);
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = from_byte(image_bytes[16 + i]);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = label_bytes[8 + i];
    if (labels[i] > 9) {
      throw FormatError("IDX label " + std::to_string(labels[i]) + " at index " +
                        std::to_string(i) + " outside [0,10)");
    }
  }
  LabeledImageSet set;
  set.name = std::move(name);
  set.images = Tensor({n, 1, rows, cols}, std::move(pixels));
  set.labels = std::move(labels);
  return set;
}

LabeledImageSet load_mnist_idx(const std::filesystem::path& images_path,
                               const std::filesystem::path& labels_path) {
  return parse_mnist_idx(read_file(images_path), read_file(labels_path));
}

LabeledImageSet parse_cifar10_bin(std::span<const unsigned char> bytes, std::string name) {
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw FormatError("CIFAR-10 batch length " + std::to_string(bytes.size()) +
                      " is not a multiple of 3073");
  }
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  std::vector<Real> pixels(n * 3072);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* rec = bytes.data() + i * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw FormatError("CIFAR-10 record " + std::to_string(i) + " has label byte " +
                        std::to_string(rec[0]) + " > 9");
    }
    labels[i] = rec[0];
    for (std::size_t j = 0; j < 3072; ++j) pixels[i * 3072 + j] = from_byte(rec[1 + j]);
  }
  LabeledImageSet set;
  set.name = std::move(name);
  set.images = Tensor({n, 3, 32, 32}, std::move(pixels));
  set.labels = std::move(labels);
  return set;
}

LabeledImageSet load_cifar10_bin(const std::vector<std::filesystem::path>& batch_paths) {
  std::vector<unsigned char> all;
  for (const auto& p : batch_paths) {
    auto bytes = read_file(p);
    if (bytes.size() % kCifarRecordBytes != 0) {
      throw FormatError(p.string() + ": length " + std::to_string(bytes.size()) +
                        " is not a multiple of 3073");
    }
    all.insert(all.end(), bytes.begin(), bytes.end());
  }
  return parse_cifar10_bin(all);
}

std::vector<unsigned char> encode_mnist_images(const LabeledImageSet& set) {
  std::vector<unsigned char> out;
  put_be32(out, kIdxImagesMagic);
  put_be32(out, static_cast<std::uint32_t>(set.size()));
  put_be32(out, static_cast<std::uint32_t>(set.images.dim(2)));
  put_be32(out, static_cast<std::uint32_t>(set.images.dim(3)));
  for (auto v : set.images.values()) out.push_back(to_byte(v));
  return out;
}

std::vector<unsigned char> encode_mnist_labels(const LabeledImageSet& set) {
  std::vector<unsigned char> out;
  put_be32(out, kIdxLabelsMagic);
  put_be32(out, static_cast<std::uint32_t>(set.size()));
  for (int l : set.labels) out.push_back(static_cast<unsigned char>(l));
  return out;
}

std::vector<unsigned char> encode_cifar10_bin(const LabeledImageSet& set) {
  std::vector<unsigned char> out;
  out.reserve(set.size() * kCifarRecordBytes);
  auto v = set.images.values();
  for (std::size_t i = 0; i < set.size(); ++i) {
    out.push_back(static_cast<unsigned char>(set.labels[i]));
    for (std::size_t j = 0; j < 3072; ++j) out.push_back(to_byte(v[i * 3072 + j]));
  }
  return out;
}

MnistFiles mnist_files(const std::filesystem::path& dir, bool train) {
  const char* prefix = train ? "train" : "t10k";
  return {dir / (std::string(prefix) + "-images-idx3-ubyte"),
          dir / (std::string(prefix) + "-labels-idx1-ubyte")};
}

std::vector<std::filesystem::path> cifar10_files(const std::filesystem::path& dir, bool train) {
  if (!train) return {dir / "test_batch.bin"};
  std::vector<std::filesystem::path> out;
  for (int i = 1; i <= 5; ++i) out.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  return out;
}

LabeledImageSet take_first(const LabeledImageSet& set, std::size_t k) {
  if (k > set.size()) {
    throw std::out_of_range("take_first: asked for " + std::to_string(k) + " images of " +
                            std::to_string(set.size()));
  }
  return set.slice(0, k);
}

LabeledImageSet scale_pixels(const LabeledImageSet& set, double factor, bool clip) {
  if (!(factor >= 0)) {
    throw std::invalid_argument("scale_pixels: factor must be non-negative, got " +
                                std::to_string(factor));
  }
  std::vector<Real> v = set.images.to_vector();
  for (auto& p : v) {
    double s = static_cast<double>(p) * factor;
    p = static_cast<Real>(clip ? std::clamp(s, 0.0, 1.0) : s);
  }
  LabeledImageSet out;
  out.name = set.name;
  out.images = Tensor(set.images.shape(), std::move(v));
  out.labels = set.labels;
  out.unit_range = clip || (set.unit_range && factor <= 1.0);
  return out;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  // Explicit Fisher-Yates so the permutation does not depend on the standard
  // library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

BatchIterator::BatchIterator(const LabeledImageSet& set, std::size_t batch_size, Order order,
                             std::uint64_t seed, std::uint64_t epoch)
    : set_(&set), batch_size_(batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (order == Order::Sequential) {
    order_.resize(set.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  } else {
    order_ = shuffled_indices(set.size(), seed, epoch);
  }
}

std::size_t BatchIterator::batches() const { return (order_.size() + batch_size_ - 1) / batch_size_; }

bool BatchIterator::next(Batch& out) {
  if (pos_ >= order_.size()) return false;
  const std::size_t end = std::min(pos_ + batch_size_, order_.size());
  const std::size_t per = set_->image_numel();
  auto src = set_->images.values();
  std::vector<Real> pixels((end - pos_) * per);
  out.labels.clear();
  out.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(pos_),
                     order_.begin() + static_cast<std::ptrdiff_t>(end));
  for (std::size_t i = 0; i < out.indices.size(); ++i) {
    std::size_t idx = out.indices[i];
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx * per), per,
                pixels.begin() + static_cast<std::ptrdiff_t>(i * per));
    out.labels.push_back(set_->labels[idx]);
  }
  Shape shape = set_->images.shape();
  shape[0] = out.indices.size();
  out.images = Tensor(std::move(shape), std::move(pixels));
  pos_ = end;
  return true;
}

SRELU_NAMESPACE_END
