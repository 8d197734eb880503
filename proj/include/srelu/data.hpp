#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "srelu/tensor.hpp"

SRELU_NAMESPACE_BEGIN

/// Images N×C×H×W with integer labels in [0, 10).
///
/// Pixels lie in [0, 1] unless `unit_range` is false, which only
/// scale_pixels(..., clip = false) produces.
struct LabeledImageSet {
  std::string name;
  Tensor images;
  std::vector<int> labels;
  bool unit_range = true;

  std::size_t size() const { return labels.size(); }
  std::size_t image_numel() const;
  /// Images [begin, end) as a new N×C×H×W tensor.
  Tensor image_range(std::size_t begin, std::size_t end) const;
  LabeledImageSet slice(std::size_t begin, std::size_t end) const;
};

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;
inline constexpr std::size_t kCifarRecordBytes = 3073;

/// Big-endian IDX image/label pair. Pixels are divided by 255.
LabeledImageSet load_mnist_idx(const std::filesystem::path& images_path,
                               const std::filesystem::path& labels_path);
LabeledImageSet parse_mnist_idx(std::span<const unsigned char> image_bytes,
                                std::span<const unsigned char> label_bytes,
                                std::string name = "mnist");

/// Concatenation of CIFAR-10 binary batches in the given order.
LabeledImageSet load_cifar10_bin(const std::vector<std::filesystem::path>& batch_paths);
LabeledImageSet parse_cifar10_bin(std::span<const unsigned char> bytes,
                                  std::string name = "cifar10");

// Inverse encoders, byte-exact for sets parsed from files.
std::vector<unsigned char> encode_mnist_images(const LabeledImageSet& set);
std::vector<unsigned char> encode_mnist_labels(const LabeledImageSet& set);
std::vector<unsigned char> encode_cifar10_bin(const LabeledImageSet& set);

/// Standard file names inside a dataset directory.
struct MnistFiles {
  std::filesystem::path images, labels;
};
MnistFiles mnist_files(const std::filesystem::path& dir, bool train);
std::vector<std::filesystem::path> cifar10_files(const std::filesystem::path& dir, bool train);

std::vector<unsigned char> read_file(const std::filesystem::path& path);

/// First `k` images in file order.
LabeledImageSet take_first(const LabeledImageSet& set, std::size_t k);

/// Multiplies pixels by `factor`, clipping to [0, 1] iff `clip`.
LabeledImageSet scale_pixels(const LabeledImageSet& set, double factor, bool clip);

struct Batch {
  Tensor images;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

/// Walks a set in fixed-size batches (the last one may be short), either in
/// file order or in a permutation determined by (seed, epoch).
class BatchIterator {
 public:
  enum class Order { Sequential, Shuffled };

  BatchIterator(const LabeledImageSet& set, std::size_t batch_size, Order order,
                std::uint64_t seed = 0, std::uint64_t epoch = 0);

  bool next(Batch& out);
  const std::vector<std::size_t>& order() const { return order_; }
  std::size_t batches() const;

 private:
  const LabeledImageSet* set_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Deterministic permutation of 0..n-1 for (seed, epoch).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

SRELU_NAMESPACE_END
