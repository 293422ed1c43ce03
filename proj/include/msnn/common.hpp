#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace msnn {

// ---------------------------------------------------------------------------
// Error hierarchy. Exit-code mapping (see tools/): InvalidArgument -> 2,
// DataError and subclasses -> 3, DivergenceError -> 4.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& msg) : Error(msg) {}
};

/// Non-finite value where a finite one is required (NaN fed to softmax etc).
class NonFiniteError : public InvalidArgument {
 public:
  explicit NonFiniteError(const std::string& msg) : InvalidArgument(msg) {}
};

class MissingKeypointError : public InvalidArgument {
 public:
  MissingKeypointError(const std::string& joint, double confidence)
      : InvalidArgument("keypoint '" + joint + "' below confidence threshold (confidence=" +
                        std::to_string(confidence) + ")"),
        joint_(joint) {}
  const std::string& joint() const { return joint_; }

 private:
  std::string joint_;
};

class DegenerateBoxError : public InvalidArgument {
 public:
  explicit DegenerateBoxError(const std::string& msg) : InvalidArgument(msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& msg, std::size_t row)
      : DataError(msg + " (row " + std::to_string(row) + ")"), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_ = 0;
};

class IoError : public DataError {
 public:
  explicit IoError(const std::string& msg) : DataError(msg) {}
};

class CorruptCheckpointError : public DataError {
 public:
  explicit CorruptCheckpointError(const std::string& msg) : DataError(msg) {}
};

class MissingArtifactError : public DataError {
 public:
  explicit MissingArtifactError(const std::string& msg) : DataError(msg) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

// ---------------------------------------------------------------------------
// Small shared value types.
// ---------------------------------------------------------------------------

/// (t, h, w) triple for strides, paddings and window sizes.
struct Triple {
  std::int64_t t = 1;
  std::int64_t h = 1;
  std::int64_t w = 1;

  friend bool operator==(const Triple&, const Triple&) = default;
};

inline std::string to_string(const Triple& v) {
  std::ostringstream os;
  os << "(" << v.t << "," << v.h << "," << v.w << ")";
  return os.str();
}

template <typename T>
std::string shape_string(const std::vector<T>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

/// FNV-1a over raw bytes; used for registry hashing and cache keys.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::vector<double>& v, std::uint64_t seed = 0xcbf29ce484222325ull) {
  return v.empty() ? seed : fnv1a(v.data(), v.size() * sizeof(double), seed);
}

}  // namespace msnn
