#pragma once

// Hand-built dataset files with known bytes, shared by the unit and
// acceptance tests.

#include <cstdint>
#include <vector>

namespace fixtures {

inline void put_be32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<unsigned char>(v >> shift));
}

/// Two 28x28 images; pixel j of image i holds (i*131 + j*7) mod 256.
inline std::vector<unsigned char> mnist_images() {
  std::vector<unsigned char> out;
  put_be32(out, 0x00000803);
  put_be32(out, 2);
  put_be32(out, 28);
  put_be32(out, 28);
  for (std::uint32_t i = 0; i < 2; ++i) {
    for (std::uint32_t j = 0; j < 784; ++j) out.push_back(static_cast<unsigned char>((i * 131 + j * 7) % 256));
  }
  return out;
}

inline std::vector<unsigned char> mnist_labels() {
  std::vector<unsigned char> out;
  put_be32(out, 0x00000801);
  put_be32(out, 2);
  out.push_back(7);
  out.push_back(2);
  return out;
}

/// One record per label in `labels`; channel c, pixel j of record r holds
/// (r*17 + c*85 + j) mod 256.
inline std::vector<unsigned char> cifar_records(const std::vector<unsigned char>& labels) {
  std::vector<unsigned char> out;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    out.push_back(labels[r]);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < 1024; ++j) out.push_back(static_cast<unsigned char>((r * 17 + c * 85 + j) % 256));
    }
  }
  return out;
}

}  // namespace fixtures
