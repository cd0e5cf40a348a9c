#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace superscope {

using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = std::size_t;

enum class ErrorCode {
  BadMagic,
  UnsupportedDtype,
  ShapeMismatch,
  MissingActivations,
  RowCountMismatch,
  IoFailure,
  BadFormat,
  IndexOutOfRange,
  UnknownLayer,
  MissingBundleMember,
  KTooLarge,
  AllZeroRows,
  ConvergenceFailure,
  DivergedLoss,
  WidthMismatch,
  UnavailableCentroids,
  LengthMismatch,
  TooFewImages,
  DegenerateDirection,
  BandTooNarrow,
  EmptyTrials,
  IdenticalEndpoints,
  OracleUnavailable,
  AtSingularity,
  BadDistanceMatrix,
  InsufficientPoints,
  TooFewStimuli,
  DegenerateFactor,
  RangeTooNarrow,
  RowMismatch,
  SpecInvalid,
  DensityNotNormalized,
  IncomparableReports,
  ConfigInvalid,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingActivations: return "MissingActivations";
    case ErrorCode::RowCountMismatch: return "RowCountMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::BadFormat: return "BadFormat";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::UnknownLayer: return "UnknownLayer";
    case ErrorCode::MissingBundleMember: return "MissingBundleMember";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::AllZeroRows: return "AllZeroRows";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::UnavailableCentroids: return "UnavailableCentroids";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::TooFewImages: return "TooFewImages";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::BandTooNarrow: return "BandTooNarrow";
    case ErrorCode::EmptyTrials: return "EmptyTrials";
    case ErrorCode::IdenticalEndpoints: return "IdenticalEndpoints";
    case ErrorCode::OracleUnavailable: return "OracleUnavailable";
    case ErrorCode::AtSingularity: return "AtSingularity";
    case ErrorCode::BadDistanceMatrix: return "BadDistanceMatrix";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::TooFewStimuli: return "TooFewStimuli";
    case ErrorCode::DegenerateFactor: return "DegenerateFactor";
    case ErrorCode::RangeTooNarrow: return "RangeTooNarrow";
    case ErrorCode::RowMismatch: return "RowMismatch";
    case ErrorCode::SpecInvalid: return "SpecInvalid";
    case ErrorCode::DensityNotNormalized: return "DensityNotNormalized";
    case ErrorCode::IncomparableReports: return "IncomparableReports";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception; `code()` is the
/// machine-checkable part, `what()` carries "<Code>: detail".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

/// splitmix64 finalizer; used to derive independent stream seeds from a root.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_double(double v) {
  std::uint64_t bits = 0;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(v));
  return mix_seed(bits, 0x51ED);
}

/// Worker cap: SUPERSCOPE_THREADS if set, else hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("SUPERSCOPE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1U : hw;
}

/// Runs fn(i) for i in [0, n). Callers write to slot i only, so the result
/// does not depend on how the range is split across workers.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void check_finite(const RowMatrix& m, const std::string& what) {
  if (!m.allFinite()) fail(ErrorCode::BadFormat, what + " contains non-finite values");
}

}  // namespace superscope
