#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <deque>
#include <string>
#include <utility>

#include "rna/error.hpp"
#include "rna/extrapolation.hpp"

namespace rna {

/// Fixed-capacity window of (epoch, parameters) pairs, oldest first. Pushing
/// into a full buffer evicts the oldest entry.
template <typename Scalar>
class SlidingBuffer {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Entry {
    std::int64_t epoch;
    Vector theta;
  };

  explicit SlidingBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error(ErrorKind::InvalidConfig, "buffer capacity must be >= 1");
  }

  void push(std::int64_t epoch, Vector theta) {
    if (!entries_.empty()) {
      if (theta.size() != entries_.back().theta.size()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "pushed vector has dimension " + std::to_string(theta.size()) + ", buffer holds " +
                        std::to_string(entries_.back().theta.size()));
      }
      if (epoch <= entries_.back().epoch) {
        throw Error(ErrorKind::OrderingViolation,
                    "epoch " + std::to_string(epoch) + " does not follow " +
                        std::to_string(entries_.back().epoch));
      }
    }
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back({epoch, std::move(theta)});
  }

  /// Drops everything except the most recent entry.
  void flush_keep_latest() {
    while (entries_.size() > 1) entries_.pop_front();
  }

  void clear() { entries_.clear(); }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::deque<Entry>& entries() const { return entries_; }

  /// Copy of the window as an iterate sequence (oldest first).
  IterateSequence<Scalar> snapshot() const {
    if (entries_.empty()) return {};
    typename IterateSequence<Scalar>::Matrix data(entries_.front().theta.size(),
                                                  static_cast<Eigen::Index>(entries_.size()));
    Eigen::Index k = 0;
    for (const auto& e : entries_) data.col(k++) = e.theta;
    return IterateSequence<Scalar>(std::move(data));
  }

 private:
  std::size_t capacity_;
  std::deque<Entry> entries_;
};

}  // namespace rna
