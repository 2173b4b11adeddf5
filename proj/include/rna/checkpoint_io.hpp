#pragma once

// Binary checkpoint sequences.
//
// Layout (all integers and scalars little-endian):
//
//   offset  size  field
//        0     4  magic "RNAC"
//        4     2  version (1)
//        6     2  precision: 4 = float32, 8 = float64 (bytes per scalar)
//        8     8  dim
//       16     8  count
//       24     -  count * dim scalars, iterate-major (all of x_0, then x_1, ...)

#include <cstdint>
#include <filesystem>
#include <optional>

#include "rna/extrapolation.hpp"

namespace rna {

enum class Precision : std::uint16_t { F32 = 4, F64 = 8 };

inline constexpr char kCheckpointMagic[4] = {'R', 'N', 'A', 'C'};
inline constexpr std::uint16_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderSize = 24;

struct CheckpointHeader {
  Precision precision = Precision::F64;
  std::uint64_t dim = 0;
  std::uint64_t count = 0;
};

void write_checkpoints(const std::filesystem::path& path, const IterateSequence<double>& seq,
                       Precision precision = Precision::F64);

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Reads the whole sequence, or only the trailing `last` iterates (the file
/// is seeked, not scanned). Values are widened to double.
IterateSequence<double> read_checkpoints(const std::filesystem::path& path,
                                         std::optional<std::uint64_t> last = std::nullopt);

/// Concatenates every checkpoint file of a directory. Files are taken in
/// lexicographic order unless the directory holds a `manifest.txt`, which
/// lists file names (one per line, '#' comments allowed) in the order to use.
IterateSequence<double> read_checkpoint_dir(const std::filesystem::path& dir);

/// Dispatches to read_checkpoint_dir or read_checkpoints.
IterateSequence<double> load_sequence(const std::filesystem::path& path);

}  // namespace rna
