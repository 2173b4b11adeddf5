#include "rna/checkpoint_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "rna/error.hpp"

namespace rna {
namespace {

namespace fs = std::filesystem;

template <typename T>
void to_little_endian(T value, unsigned char* out) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<unsigned char>(bits & 0xFFu);
    bits = static_cast<U>(bits >> 8);
  }
}

template <typename T>
T from_little_endian(const unsigned char* in) {
  using U = std::conditional_t<sizeof(T) == 2, std::uint16_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  U bits = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) bits = static_cast<U>((bits << 8) | in[i]);
  return std::bit_cast<T>(bits);
}

std::ifstream open_for_read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return in;
}

CheckpointHeader parse_header(std::istream& in, const fs::path& path) {
  std::array<unsigned char, kCheckpointHeaderSize> raw{};
  if (!in.read(reinterpret_cast<char*>(raw.data()), raw.size())) {
    throw Error(ErrorKind::FormatError, path.string() + ": truncated header");
  }
  if (std::memcmp(raw.data(), kCheckpointMagic, 4) != 0) {
    throw Error(ErrorKind::FormatError, path.string() + ": bad magic");
  }
  const auto version = from_little_endian<std::uint16_t>(raw.data() + 4);
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::FormatError,
                path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto precision = from_little_endian<std::uint16_t>(raw.data() + 6);
  if (precision != 4 && precision != 8) {
    throw Error(ErrorKind::FormatError,
                path.string() + ": unknown precision code " + std::to_string(precision));
  }
  CheckpointHeader header;
  header.precision = static_cast<Precision>(precision);
  header.dim = from_little_endian<std::uint64_t>(raw.data() + 8);
  header.count = from_little_endian<std::uint64_t>(raw.data() + 16);
  if (header.count > 0 && header.dim == 0) {
    throw Error(ErrorKind::FormatError, path.string() + ": zero dimension");
  }
  return header;
}

std::uint64_t payload_bytes(const CheckpointHeader& h) {
  return h.dim * h.count * static_cast<std::uint64_t>(h.precision);
}

}  // namespace

void write_checkpoints(const fs::path& path, const IterateSequence<double>& seq, Precision precision) {
  if (!seq.matrix().allFinite()) {
    throw Error(ErrorKind::NumericalFailure, "refusing to write non-finite iterates");
  }
  const auto width = static_cast<std::size_t>(precision);
  const auto dim = static_cast<std::size_t>(seq.dim());
  const auto count = static_cast<std::size_t>(seq.size());

  std::vector<unsigned char> bytes(kCheckpointHeaderSize + dim * count * width);
  std::memcpy(bytes.data(), kCheckpointMagic, 4);
  to_little_endian(kCheckpointVersion, bytes.data() + 4);
  to_little_endian(static_cast<std::uint16_t>(precision), bytes.data() + 6);
  to_little_endian(static_cast<std::uint64_t>(dim), bytes.data() + 8);
  to_little_endian(static_cast<std::uint64_t>(count), bytes.data() + 16);

  unsigned char* out = bytes.data() + kCheckpointHeaderSize;
  // Column-major storage of the d x m matrix is already iterate-major.
  const double* values = seq.matrix().data();
  for (std::size_t i = 0; i < dim * count; ++i, out += width) {
    if (precision == Precision::F64) {
      to_little_endian(values[i], out);
    } else {
      to_little_endian(static_cast<float>(values[i]), out);
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

CheckpointHeader read_checkpoint_header(const fs::path& path) {
  auto in = open_for_read(path);
  return parse_header(in, path);
}

IterateSequence<double> read_checkpoints(const fs::path& path, std::optional<std::uint64_t> last) {
  auto in = open_for_read(path);
  const CheckpointHeader header = parse_header(in, path);

  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  if (file_size != kCheckpointHeaderSize + payload_bytes(header)) {
    throw Error(ErrorKind::FormatError,
                path.string() + ": payload of " + std::to_string(file_size - kCheckpointHeaderSize) +
                    " bytes does not match header (" + std::to_string(header.count) + " x " +
                    std::to_string(header.dim) + ")");
  }

  const std::uint64_t keep = last ? std::min(*last, header.count) : header.count;
  const auto width = static_cast<std::uint64_t>(header.precision);
  const std::uint64_t skip = (header.count - keep) * header.dim * width;
  in.seekg(static_cast<std::streamoff>(kCheckpointHeaderSize + skip), std::ios::beg);

  std::vector<unsigned char> raw(keep * header.dim * width);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw Error(ErrorKind::FormatError, path.string() + ": truncated payload");
  }

  Eigen::MatrixXd data(static_cast<Eigen::Index>(header.dim), static_cast<Eigen::Index>(keep));
  double* dst = data.data();
  const unsigned char* src = raw.data();
  for (std::uint64_t i = 0; i < keep * header.dim; ++i, src += width) {
    const double v = header.precision == Precision::F64
                         ? from_little_endian<double>(src)
                         : static_cast<double>(from_little_endian<float>(src));
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::NumericalFailure, path.string() + ": non-finite value in payload");
    }
    dst[i] = v;
  }
  return IterateSequence<double>(std::move(data));
}

IterateSequence<double> read_checkpoint_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  const fs::path manifest = dir / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + manifest.string());
    std::string line;
    while (std::getline(in, line)) {
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto end = line.find_last_not_of(" \t\r");
      files.push_back(dir / line.substr(first, end - first + 1));
    }
  } else {
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    if (ec) throw Error(ErrorKind::IoError, "cannot list " + dir.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
  }

  std::vector<IterateSequence<double>> parts;
  Eigen::Index dim = -1;
  Eigen::Index total = 0;
  for (const auto& f : files) {
    parts.push_back(read_checkpoints(f));
    const auto& part = parts.back();
    if (part.empty()) continue;
    if (dim >= 0 && part.dim() != dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  f.string() + " has dimension " + std::to_string(part.dim()) + ", expected " +
                      std::to_string(dim));
    }
    dim = part.dim();
    total += part.size();
  }
  if (total == 0) return {};

  Eigen::MatrixXd data(dim, total);
  Eigen::Index col = 0;
  for (const auto& part : parts) {
    if (part.empty()) continue;
    data.middleCols(col, part.size()) = part.matrix();
    col += part.size();
  }
  return IterateSequence<double>(std::move(data));
}

IterateSequence<double> load_sequence(const fs::path& path) {
  if (fs::is_directory(path)) return read_checkpoint_dir(path);
  return read_checkpoints(path);
}

}  // namespace rna
