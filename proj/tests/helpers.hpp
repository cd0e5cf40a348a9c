#pragma once

#include "superscope/superscope.hpp"

#include <catch_amalgamated.hpp>

#include <random>

namespace testing {

using namespace superscope;

/// Fresh scratch directory under the system temp dir, removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("superscope_" + tag + "_" + std::to_string(std::random_device{}()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path operator/(const std::string& name) const { return path / name; }
};

/// Images filled with one RGB colour each, given in [0, 255].
inline ImageSet uniform_images(const std::vector<std::array<std::uint8_t, 3>>& colours, Index side = 4) {
  ImageSet s;
  s.count = colours.size();
  s.height = side;
  s.width = side;
  s.pixels.resize(s.count * s.image_stride());
  for (Index i = 0; i < s.count; ++i)
    for (Index p = 0; p < side * side; ++p)
      for (int c = 0; c < 3; ++c) s.pixels[i * s.image_stride() + 3 * p + c] = colours[i][c];
  return s;
}

inline RowMatrix random_matrix(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a superscope::Error");
  return ErrorCode::BadFormat;
}

}  // namespace testing
