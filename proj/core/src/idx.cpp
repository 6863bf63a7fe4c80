#include "radial/idx.hpp"

#include <fstream>
#include <sstream>

namespace radial {

namespace {

std::uint32_t read_be32(const std::string& bytes, std::size_t offset) {
  if (bytes.size() < offset + 4) throw IdxError("IDX header truncated", bytes.size());
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i)
    v = (v << 8) | static_cast<std::uint8_t>(bytes[offset + i]);
  return v;
}

void write_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open IDX file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

IdxArray parse_idx(const std::string& bytes, std::uint32_t expected_magic) {
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected_magic) {
    std::ostringstream os;
    os << "IDX magic 0x" << std::hex << magic << ", expected 0x" << expected_magic;
    throw IdxError(os.str(), 0);
  }
  if ((magic >> 8) != 0x08)
    throw IdxError("IDX element type is not unsigned byte", 2);
  const std::size_t ndims = magic & 0xff;
  if (ndims == 0) throw IdxError("IDX array with zero dimensions", 3);
  IdxArray out;
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    const std::size_t offset = 4 + 4 * i;
    const std::uint32_t d = read_be32(bytes, offset);
    if (d == 0) throw IdxError("IDX dimension " + std::to_string(i) + " is zero", offset);
    out.dims.push_back(d);
    count *= d;
  }
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() != header + count)
    throw IdxError("IDX payload has " + std::to_string(bytes.size() - header) + " bytes, dims need " +
                       std::to_string(count),
                   std::min(bytes.size(), header + count));
  out.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header), bytes.end());
  return out;
}

IdxArray read_idx(const std::filesystem::path& path, std::uint32_t expected_magic) {
  try {
    return parse_idx(slurp(path), expected_magic);
  } catch (const IdxError& e) {
    throw IdxError(path.string() + ": " + e.what(), e.offset());
  }
}

std::string encode_idx(const IdxArray& array, std::uint32_t magic) {
  if ((magic & 0xff) != array.dims.size())
    throw std::invalid_argument("encode_idx: magic dimension count does not match dims");
  std::size_t count = 1;
  for (auto d : array.dims) count *= d;
  if (count != array.data.size()) throw std::invalid_argument("encode_idx: dims do not match data size");
  std::string out;
  write_be32(out, magic);
  for (auto d : array.dims) write_be32(out, d);
  out.append(array.data.begin(), array.data.end());
  return out;
}

void write_idx(const std::filesystem::path& path, const IdxArray& array, std::uint32_t magic) {
  const std::string bytes = encode_idx(array, magic);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

Dataset load_idx_dataset(const std::filesystem::path& images, const std::filesystem::path& labels,
                         std::size_t classes) {
  const IdxArray img = read_idx(images, kIdxImageMagic);
  const IdxArray lab = read_idx(labels, kIdxLabelMagic);
  if (img.dims.size() != 3) throw IdxError(images.string() + ": image file must have 3 dims", 3);
  if (lab.dims.size() != 1) throw IdxError(labels.string() + ": label file must have 1 dim", 3);
  if (img.dims[0] != lab.dims[0])
    throw std::invalid_argument(std::to_string(img.dims[0]) + " images but " +
                                std::to_string(lab.dims[0]) + " labels");
  Dataset d;
  d.dim = static_cast<std::size_t>(img.dims[1]) * img.dims[2];
  d.classes = classes;
  d.features.reserve(img.data.size());
  for (std::uint8_t px : img.data) d.features.push_back(static_cast<double>(px) / 255.0);
  for (std::size_t i = 0; i < lab.data.size(); ++i) {
    if (lab.data[i] >= classes)
      throw IdxError(labels.string() + ": label " + std::to_string(lab.data[i]) + " out of range", 8 + i);
    d.labels.push_back(lab.data[i]);
  }
  return d;
}

}  // namespace radial
