#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "radial/datasets.hpp"

namespace radial {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Malformed IDX content; `offset` is the byte position of the problem.
class IdxError : public std::runtime_error {
 public:
  IdxError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Unsigned-byte IDX array: big-endian magic, big-endian dims, then data.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

IdxArray parse_idx(const std::string& bytes, std::uint32_t expected_magic);
IdxArray read_idx(const std::filesystem::path& path, std::uint32_t expected_magic);
std::string encode_idx(const IdxArray& array, std::uint32_t magic);
void write_idx(const std::filesystem::path& path, const IdxArray& array, std::uint32_t magic);

/// Images scaled to [0, 1] and flattened, paired with their labels.
Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t classes = 10);

}  // namespace radial
