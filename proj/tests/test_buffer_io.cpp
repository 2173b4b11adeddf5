#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "rna/checkpoint_io.hpp"
#include "rna/error.hpp"
#include "rna/metrics.hpp"
#include "rna/sliding_buffer.hpp"
#include "temp_dir.hpp"

using namespace rna;
using rna::testing::TempDir;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an rna::Error";
  return ErrorKind::InvalidConfig;
}

std::vector<std::int64_t> epochs_of(const SlidingBuffer<double>& buf) {
  std::vector<std::int64_t> out;
  for (const auto& e : buf.entries()) out.push_back(e.epoch);
  return out;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

IterateSequence<double> random_sequence(Index dim, Index count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return IterateSequence<double>(oracle::random_matrix(dim, count, rng));
}

}  // namespace

// ------------------------------------------------------------ sliding buffer

TEST(SlidingBuffer, EvictsTheOldest) {
  SlidingBuffer<double> buf(3);
  for (std::int64_t e = 1; e <= 5; ++e) buf.push(e, VectorXd::Constant(2, static_cast<double>(e)));
  EXPECT_EQ(epochs_of(buf), (std::vector<std::int64_t>{3, 4, 5}));
  EXPECT_EQ(buf.snapshot()[0], VectorXd::Constant(2, 3.0));
}

TEST(SlidingBuffer, FirstPush) {
  SlidingBuffer<double> buf(4);
  buf.push(7, VectorXd::Zero(3));
  EXPECT_EQ(buf.size(), 1u);
}

TEST(SlidingBuffer, SteadyStateWindow) {
  SlidingBuffer<double> buf(11);
  for (std::int64_t e = 1; e <= 200; ++e) {
    buf.push(e, VectorXd::Constant(1, static_cast<double>(e)));
    EXPECT_EQ(buf.size(), static_cast<std::size_t>(std::min<std::int64_t>(e, 11)));
    if (e >= 11) EXPECT_EQ(buf.entries().front().epoch, e - 10);
  }
}

TEST(SlidingBuffer, HoldsTheLastInputsExhaustively) {
  for (std::size_t capacity = 1; capacity <= 5; ++capacity) {
    for (int n = 0; n <= 12; ++n) {
      SlidingBuffer<double> buf(capacity);
      for (int e = 0; e < n; ++e) buf.push(e, VectorXd::Constant(1, e * 1.5));
      const std::size_t kept = std::min<std::size_t>(static_cast<std::size_t>(n), capacity);
      ASSERT_EQ(buf.size(), kept);
      for (std::size_t i = 0; i < kept; ++i) {
        const int expected = n - static_cast<int>(kept) + static_cast<int>(i);
        EXPECT_EQ(buf.entries()[i].epoch, expected);
        EXPECT_EQ(buf.entries()[i].theta(0), expected * 1.5);
      }
    }
  }
}

TEST(SlidingBuffer, Errors) {
  SlidingBuffer<double> buf(3);
  buf.push(1, VectorXd::Zero(2));
  EXPECT_EQ(kind_of([&] { buf.push(2, VectorXd::Zero(3)); }), ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind_of([&] { buf.push(1, VectorXd::Zero(2)); }), ErrorKind::OrderingViolation);
  EXPECT_EQ(kind_of([] { SlidingBuffer<double>(0); }), ErrorKind::InvalidConfig);
}

TEST(SlidingBuffer, FlushKeepsTheLatest) {
  SlidingBuffer<float> buf(4);
  for (int e = 0; e < 4; ++e) buf.push(e, Eigen::VectorXf::Constant(2, static_cast<float>(e)));
  buf.flush_keep_latest();
  ASSERT_EQ(buf.size(), 1u);
  EXPECT_EQ(buf.entries().front().epoch, 3);
}

// ---------------------------------------------------------------- checkpoints

TEST(Checkpoints, DoubleRoundTripIsBitExact) {
  TempDir dir;
  const auto seq = random_sequence(3, 5, 1);
  write_checkpoints(dir / "seq.rnac", seq);
  const auto back = read_checkpoints(dir / "seq.rnac");
  ASSERT_EQ(back.size(), 5);
  EXPECT_EQ(std::memcmp(back.matrix().data(), seq.matrix().data(), sizeof(double) * 15), 0);
}

TEST(Checkpoints, FloatRoundTripWithinSinglePrecision) {
  TempDir dir;
  const auto seq = random_sequence(50, 4, 2);
  write_checkpoints(dir / "seq.rnac", seq, Precision::F32);
  EXPECT_EQ(read_checkpoint_header(dir / "seq.rnac").precision, Precision::F32);
  const auto back = read_checkpoints(dir / "seq.rnac");
  const double tol = std::numeric_limits<float>::epsilon();
  EXPECT_LE(((back.matrix() - seq.matrix()).array().abs() / seq.matrix().array().abs()).maxCoeff(), tol);
  // And exactly what a float cast gives.
  EXPECT_EQ(back.matrix(), seq.matrix().cast<float>().cast<double>());
}

TEST(Checkpoints, HeaderLayout) {
  TempDir dir;
  Eigen::MatrixXd m(2, 1);
  m << 1.0, -2.0;
  write_checkpoints(dir / "one.rnac", IterateSequence<double>(m));
  const auto bytes = read_bytes(dir / "one.rnac");
  ASSERT_EQ(bytes.size(), 24u + 16u);
  const std::vector<unsigned char> header = {'R', 'N', 'A', 'C', 1, 0, 8, 0, 2, 0, 0, 0, 0, 0, 0, 0,
                                             1, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin()));
  // 1.0 = 0x3FF0000000000000, little-endian.
  const std::vector<unsigned char> one = {0, 0, 0, 0, 0, 0, 0xF0, 0x3F};
  EXPECT_TRUE(std::equal(one.begin(), one.end(), bytes.begin() + 24));
}

TEST(Checkpoints, TrailingWindowIsSeeked) {
  TempDir dir;
  const auto seq = random_sequence(4, 9, 3);
  write_checkpoints(dir / "seq.rnac", seq);
  const auto tail = read_checkpoints(dir / "seq.rnac", 3);
  EXPECT_EQ(tail.matrix(), seq.matrix().rightCols(3));
  EXPECT_EQ(read_checkpoints(dir / "seq.rnac", 100).size(), 9);
}

TEST(Checkpoints, BadMagicOrVersion) {
  TempDir dir;
  write_checkpoints(dir / "seq.rnac", random_sequence(2, 2, 4));
  auto bytes = read_bytes(dir / "seq.rnac");
  auto bad = bytes;
  std::memcpy(bad.data(), "XXXX", 4);
  write_bytes(dir / "magic.rnac", bad);
  EXPECT_EQ(kind_of([&] { read_checkpoints(dir / "magic.rnac"); }), ErrorKind::FormatError);
  bad = bytes;
  bad[4] = 2;
  write_bytes(dir / "version.rnac", bad);
  EXPECT_EQ(kind_of([&] { read_checkpoints(dir / "version.rnac"); }), ErrorKind::FormatError);
  bad = bytes;
  bad[6] = 3;
  write_bytes(dir / "precision.rnac", bad);
  EXPECT_EQ(kind_of([&] { read_checkpoints(dir / "precision.rnac"); }), ErrorKind::FormatError);
  write_bytes(dir / "short.rnac", {'R', 'N', 'A'});
  EXPECT_EQ(kind_of([&] { read_checkpoints(dir / "short.rnac"); }), ErrorKind::FormatError);
}

TEST(Checkpoints, TruncatedPayload) {
  TempDir dir;
  write_checkpoints(dir / "seq.rnac", random_sequence(3, 10, 5));
  auto bytes = read_bytes(dir / "seq.rnac");
  bytes.resize(bytes.size() - 3 * sizeof(double));
  write_bytes(dir / "nine.rnac", bytes);
  EXPECT_EQ(kind_of([&] { read_checkpoints(dir / "nine.rnac"); }), ErrorKind::FormatError);
}

TEST(Checkpoints, NonFiniteValues) {
  TempDir dir;
  write_checkpoints(dir / "seq.rnac", random_sequence(2, 2, 6));
  auto bytes = read_bytes(dir / "seq.rnac");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(bytes.data() + 24 + 8, &nan, 8);
  write_bytes(dir / "nan.rnac", bytes);
  EXPECT_EQ(kind_of([&] { read_checkpoints(dir / "nan.rnac"); }), ErrorKind::NumericalFailure);
  EXPECT_EQ(kind_of([&] { read_checkpoints(dir / "missing.rnac"); }), ErrorKind::IoError);
}

TEST(Checkpoints, DirectoryInLexicographicOrder) {
  TempDir dir;
  const auto seq = random_sequence(3, 4, 7);
  // Written out of order on purpose.
  write_checkpoints(dir / "epoch_02.rnac", seq.latest(2).latest(1));
  write_checkpoints(dir / "epoch_00.rnac", IterateSequence<double>(seq.matrix().leftCols(2)));
  write_checkpoints(dir / "epoch_01.rnac", IterateSequence<double>(seq.matrix().col(2)));
  const auto all = load_sequence(dir.path());
  EXPECT_EQ(all.matrix(), seq.matrix());
}

TEST(Checkpoints, ManifestOverridesOrder) {
  TempDir dir;
  const auto seq = random_sequence(2, 3, 8);
  write_checkpoints(dir / "a.rnac", IterateSequence<double>(seq.matrix().col(2)));
  write_checkpoints(dir / "b.rnac", IterateSequence<double>(seq.matrix().col(0)));
  write_checkpoints(dir / "c.rnac", IterateSequence<double>(seq.matrix().col(1)));
  std::ofstream(dir / "manifest.txt") << "# oldest first\nb.rnac\nc.rnac\n\na.rnac\n";
  EXPECT_EQ(read_checkpoint_dir(dir.path()).matrix(), seq.matrix());
}

TEST(Checkpoints, DirectoryDimensionMismatch) {
  TempDir dir;
  write_checkpoints(dir / "a.rnac", random_sequence(2, 1, 1));
  write_checkpoints(dir / "b.rnac", random_sequence(3, 1, 1));
  EXPECT_EQ(kind_of([&] { read_checkpoint_dir(dir.path()); }), ErrorKind::DimensionMismatch);
}

// -------------------------------------------------------------------- metrics

TEST(Metrics, HeaderPlusOneLinePerRow) {
  TempDir dir;
  std::vector<MetricsRow> rows = {{1, 1.0, 2.0, 0.5, 1.5, 1e-8}, {2, 0.9, 1.8, 0.4, 1.2, 1e-8}, {3, 0.8, 1.6, 0.3, 1.0, 1e-8}};
  write_metrics(dir / "m.csv", rows);
  std::ifstream in(dir / "m.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0], kMetricsHeader);
}

TEST(Metrics, EmptyTableIsHeaderOnly) {
  TempDir dir;
  write_metrics(dir / "m.csv", {});
  const auto bytes = read_bytes(dir / "m.csv");
  EXPECT_EQ(std::string(bytes.begin(), bytes.end()), std::string(kMetricsHeader) + "\n");
}

TEST(Metrics, DecimalRoundTripIsExact) {
  TempDir dir;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<MetricsRow> rows;
  for (int i = 0; i < 50; ++i) rows.push_back({i, u(rng), std::exp(u(rng) / 20), u(rng) * 1e-9, 1.0 / 3.0 + i, 1e-8});
  rows.push_back({99, 1.0, 2.0, 1.0, 2.0, std::numeric_limits<double>::quiet_NaN()});
  write_metrics(dir / "m.csv", rows);
  const auto back = read_metrics(dir / "m.csv");
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    EXPECT_EQ(back[i].epoch, rows[i].epoch);
    EXPECT_EQ(back[i].objective, rows[i].objective);
    EXPECT_EQ(back[i].grad_norm, rows[i].grad_norm);
    EXPECT_EQ(back[i].objective_rna, rows[i].objective_rna);
    EXPECT_EQ(back[i].grad_norm_rna, rows[i].grad_norm_rna);
    EXPECT_EQ(back[i].lambda_used, rows[i].lambda_used);
  }
  EXPECT_TRUE(std::isnan(back.back().lambda_used));
}

TEST(Metrics, IoErrors) {
  EXPECT_EQ(kind_of([] { write_metrics("/nonexistent-dir/m.csv", {}); }), ErrorKind::IoError);
}
