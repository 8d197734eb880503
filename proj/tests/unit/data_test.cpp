#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "fixtures.hpp"
#include "srelu/data.hpp"
#include "srelu/errors.hpp"

using namespace srelu;

namespace {

std::filesystem::path write_fixture(const std::string& name, const std::vector<unsigned char>& bytes) {
  std::filesystem::create_directories(SRELU_TEST_TMP);
  const auto path = std::filesystem::path(SRELU_TEST_TMP) / name;
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                              static_cast<std::streamsize>(bytes.size()));
  return path;
}

LabeledImageSet numbered_set(std::size_t n) {
  std::vector<Real> px(n * 4);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 4; ++j) px[i * 4 + j] = static_cast<Real>(i) / Real(100);
    labels[i] = static_cast<int>(i % 10);
  }
  return {"numbered", Tensor({n, 1, 2, 2}, px), labels};
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("IDX fixture decodes to k/255") {
    const auto set = parse_mnist_idx(fixtures::mnist_images(), fixtures::mnist_labels());
    CHECK(set.images.shape() == Shape{2, 1, 28, 28});
    CHECK(set.labels == std::vector<int>{7, 2});
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t j = 0; j < 784; ++j) {
        const Real expected = static_cast<Real>((i * 131 + j * 7) % 256) / Real(255);
        REQUIRE(set.images[i * 784 + j] == expected);
      }
    }
  }

  TEST_CASE("IDX round-trip is byte-exact") {
    const auto img = fixtures::mnist_images();
    const auto lab = fixtures::mnist_labels();
    const auto set = load_mnist_idx(write_fixture("img.idx", img), write_fixture("lab.idx", lab));
    CHECK(encode_mnist_images(set) == img);
    CHECK(encode_mnist_labels(set) == lab);
  }

  TEST_CASE("IDX errors") {
    const auto img = fixtures::mnist_images();
    const auto lab = fixtures::mnist_labels();
    CHECK_THROWS_AS(parse_mnist_idx(img, img), FormatError);  // label file with image magic
    CHECK_THROWS_AS(parse_mnist_idx(lab, lab), FormatError);
    auto short_img = img;
    short_img.pop_back();
    CHECK_THROWS_AS(parse_mnist_idx(short_img, lab), FormatError);
    auto one_label = lab;
    one_label[7] = 1;
    one_label.pop_back();
    CHECK_THROWS_AS(parse_mnist_idx(img, one_label), FormatError);  // count mismatch
    auto bad_label = lab;
    bad_label.back() = 10;
    CHECK_THROWS_AS(parse_mnist_idx(img, bad_label), FormatError);
    CHECK_THROWS_AS(parse_mnist_idx(std::vector<unsigned char>(10), lab), FormatError);
  }

  TEST_CASE("CIFAR single record decodes to exact planes") {
    const auto set = parse_cifar10_bin(fixtures::cifar_records({4}));
    CHECK(set.images.shape() == Shape{1, 3, 32, 32});
    CHECK(set.labels == std::vector<int>{4});
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < 1024; ++j) {
        REQUIRE(set.images[c * 1024 + j] == static_cast<Real>((c * 85 + j) % 256) / Real(255));
      }
    }
  }

  TEST_CASE("CIFAR batches concatenate in file order and round-trip") {
    const auto a = fixtures::cifar_records({1, 9});
    const auto b = fixtures::cifar_records({0});
    const auto set = load_cifar10_bin({write_fixture("a.bin", a), write_fixture("b.bin", b)});
    CHECK(set.labels == std::vector<int>{1, 9, 0});
    auto joined = a;
    joined.insert(joined.end(), b.begin(), b.end());
    CHECK(encode_cifar10_bin(set) == joined);
  }

  TEST_CASE("CIFAR errors") {
    CHECK_THROWS_AS(parse_cifar10_bin(std::vector<unsigned char>(3072)), FormatError);
    CHECK_THROWS_AS(parse_cifar10_bin(fixtures::cifar_records({10})), FormatError);
    CHECK_THROWS_AS(load_cifar10_bin({write_fixture("short.bin", std::vector<unsigned char>(3074))}),
                    FormatError);
    CHECK_THROWS(load_cifar10_bin({std::filesystem::path(SRELU_TEST_TMP) / "missing.bin"}));
  }

  TEST_CASE("standard file names") {
    CHECK(mnist_files("d", false).images == std::filesystem::path("d/t10k-images-idx3-ubyte"));
    CHECK(mnist_files("d", true).labels == std::filesystem::path("d/train-labels-idx1-ubyte"));
    CHECK(cifar10_files("d", true).size() == 5);
    CHECK(cifar10_files("d", false).front() == std::filesystem::path("d/test_batch.bin"));
  }

  TEST_CASE("take_first keeps file order") {
    const auto set = numbered_set(10);
    CHECK(take_first(set, 10).images.same_values(set.images));
    CHECK(take_first(set, 0).size() == 0);
    const auto head = take_first(set, 3);
    CHECK(head.labels == std::vector<int>{0, 1, 2});
    CHECK(head.images[3 * 4 - 1] == Real(2) / Real(100));
    CHECK_THROWS_AS(take_first(set, 11), std::out_of_range);
  }

  TEST_CASE("scale_pixels examples") {
    LabeledImageSet set{"p", Tensor({1, 1, 1, 2}, {Real(0.6), Real(0.2)}), {3}};
    CHECK(scale_pixels(set, 1, true).images.same_values(set.images));
    const auto clipped = scale_pixels(set, 2, true);
    CHECK(clipped.images[0] == Real(1));
    CHECK(clipped.unit_range);
    const auto raw = scale_pixels(set, 2, false);
    CHECK(raw.images[0] == static_cast<Real>(static_cast<double>(Real(0.6)) * 2));
    CHECK_FALSE(raw.unit_range);
    CHECK_THROWS_AS(scale_pixels(set, -1, true), std::invalid_argument);
  }

  TEST_CASE("sequential batches visit every index once in order") {
    const auto set = numbered_set(10);
    BatchIterator it(set, 4, BatchIterator::Order::Sequential);
    CHECK(it.batches() == 3);
    Batch b;
    std::vector<std::size_t> seen;
    std::vector<std::size_t> sizes;
    while (it.next(b)) {
      sizes.push_back(b.labels.size());
      for (std::size_t k = 0; k < b.indices.size(); ++k) {
        CHECK(b.labels[k] == set.labels[b.indices[k]]);
        CHECK(b.images[k * 4] == set.images[b.indices[k] * 4]);
      }
      seen.insert(seen.end(), b.indices.begin(), b.indices.end());
    }
    CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
    CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK_THROWS_AS(BatchIterator(set, 0, BatchIterator::Order::Sequential), std::invalid_argument);
  }

  TEST_CASE("shuffled order is a permutation fixed by seed and epoch") {
    const auto a = shuffled_indices(100, 3, 0);
    CHECK(a == shuffled_indices(100, 3, 0));
    CHECK(a != shuffled_indices(100, 3, 1));
    CHECK(a != shuffled_indices(100, 4, 0));
    auto sorted = a;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) CHECK(sorted[i] == i);
  }
}
