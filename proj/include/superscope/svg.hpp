#pragma once

// Minimal SVG 1.1 figures on a fixed 800 x 600 canvas. Figures only draw;
// the numbers they show always come from a table written next to them.

#include "superscope/data_model.hpp"
#include "superscope/stats.hpp"

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include <cmath>
#include <cstdio>

namespace superscope::svg {

enum class Kind { Histogram, Box, Scatter, Line, Grid };

inline constexpr double kWidth = 800.0;
inline constexpr double kHeight = 600.0;

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct GridRow {
  std::string label;
  std::vector<Index> images;
};

struct Figure {
  Kind kind = Kind::Scatter;
  std::string title;
  std::string x_label;
  std::string y_label;
  // Histogram: x = bin edges (n + 1), y = counts (n). Box: y = raw values,
  // one series per box. Scatter/Line: paired x, y.
  std::vector<Series> series;
  std::vector<GridRow> grid;
  const ImageSet* images = nullptr;

  std::string render() const;
};

/// Five-number summary with whiskers at the most extreme points within
/// 1.5 IQR of the quartiles.
struct BoxStats {
  double median = 0.0, q1 = 0.0, q3 = 0.0, lo = 0.0, hi = 0.0;
};

inline BoxStats box_stats(const std::vector<double>& v) {
  BoxStats b;
  if (v.empty()) return b;
  b.q1 = stats::quantile(v, 0.25);
  b.median = stats::quantile(v, 0.5);
  b.q3 = stats::quantile(v, 0.75);
  const double reach = 1.5 * (b.q3 - b.q1);
  b.lo = b.q1;
  b.hi = b.q3;
  for (double x : v) {
    if (x >= b.q1 - reach) b.lo = std::min(b.lo, x);
    if (x <= b.q3 + reach) b.hi = std::max(b.hi, x);
  }
  return b;
}

// --- thumbnails ------------------------------------------------------------------

inline std::string base64(const std::string& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

/// 24-bit BMP of one image box-averaged down to at most `side` x `side`.
inline std::string thumbnail_bmp(const ImageSet& images, Index i, Index side = 32) {
  const Index h = std::min(side, images.height), w = std::min(side, images.width);
  const Index row_bytes = (3 * w + 3) / 4 * 4;
  const std::uint32_t data_size = static_cast<std::uint32_t>(row_bytes * h);
  std::string bmp(54 + data_size, '\0');
  auto put32 = [&](std::size_t at, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bmp[at + k] = static_cast<char>((v >> (8 * k)) & 0xff);
  };
  bmp[0] = 'B';
  bmp[1] = 'M';
  put32(2, 54 + data_size);
  put32(10, 54);
  put32(14, 40);
  put32(18, static_cast<std::uint32_t>(w));
  put32(22, static_cast<std::uint32_t>(h));
  bmp[26] = 1;
  bmp[28] = 24;
  put32(34, data_size);
  for (Index y = 0; y < h; ++y) {
    const Index y0 = y * images.height / h, y1 = std::max(y0 + 1, (y + 1) * images.height / h);
    for (Index x = 0; x < w; ++x) {
      const Index x0 = x * images.width / w, x1 = std::max(x0 + 1, (x + 1) * images.width / w);
      for (Index c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (Index yy = y0; yy < y1; ++yy)
          for (Index xx = x0; xx < x1; ++xx) acc += images.at(i, yy, xx, c);
        const auto v = static_cast<std::uint8_t>(std::lround(acc / static_cast<double>((y1 - y0) * (x1 - x0))));
        // rows bottom-up, BGR order
        bmp[54 + (h - 1 - y) * row_bytes + 3 * x + (2 - c)] = static_cast<char>(v);
      }
    }
  }
  return bmp;
}

// --- rendering -------------------------------------------------------------------

namespace detail {

inline constexpr double kLeft = 90.0, kRight = 30.0, kTop = 50.0, kBottom = 70.0;
inline const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

struct Axis {
  double lo = 0.0, hi = 1.0;

  static Axis over(const std::vector<double>& v) {
    Axis a{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (double x : v)
      if (std::isfinite(x)) {
        a.lo = std::min(a.lo, x);
        a.hi = std::max(a.hi, x);
      }
    if (!std::isfinite(a.lo)) return Axis{};
    if (a.hi - a.lo < 1e-12 * std::max(1.0, std::abs(a.lo))) {
      a.lo -= 0.5;
      a.hi += 0.5;
    }
    const double pad = 0.05 * (a.hi - a.lo);
    return Axis{a.lo - pad, a.hi + pad};
  }
};

inline double px(const Axis& a, double v) {
  return kLeft + (v - a.lo) / (a.hi - a.lo) * (kWidth - kLeft - kRight);
}

inline double py(const Axis& a, double v) {
  return kHeight - kBottom - (v - a.lo) / (a.hi - a.lo) * (kHeight - kTop - kBottom);
}

inline std::string text(double x, double y, const std::string& s, const std::string& extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"13\"" + extra + ">" +
         escape(s) + "</text>\n";
}

inline std::string line(double x1, double y1, double x2, double y2, const std::string& stroke = "#000") {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
         "\" stroke=\"" + stroke + "\"/>\n";
}

inline std::string frame(const Figure& f, const Axis& x, const Axis& y, bool x_ticks = true) {
  std::string out;
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  out += line(x0, y0, x1, y0) + line(x0, y0, x0, y1);
  for (int t = 0; t <= 4; ++t) {
    const double vy = y.lo + (y.hi - y.lo) * t / 4.0;
    out += line(x0 - 5, py(y, vy), x0, py(y, vy));
    out += text(x0 - 8, py(y, vy) + 4, num(vy), " text-anchor=\"end\"");
    if (x_ticks) {
      const double vx = x.lo + (x.hi - x.lo) * t / 4.0;
      out += line(px(x, vx), y0, px(x, vx), y0 + 5);
      out += text(px(x, vx), y0 + 20, num(vx), " text-anchor=\"middle\"");
    }
  }
  out += text(kWidth / 2, kHeight - 20, f.x_label, " text-anchor=\"middle\"");
  out += text(20, kHeight / 2, f.y_label, " text-anchor=\"middle\" transform=\"rotate(-90 20 " + num(kHeight / 2) + ")\"");
  return out;
}

inline std::string legend(const Figure& f) {
  std::string out;
  if (f.series.size() < 2) return out;
  for (std::size_t s = 0; s < f.series.size(); ++s) {
    const double y = kTop + 16.0 * static_cast<double>(s);
    out += "<rect x=\"" + num(kWidth - kRight - 150) + "\" y=\"" + num(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
           kPalette[s % 6] + "\"/>\n";
    out += text(kWidth - kRight - 135, y, f.series[s].name);
  }
  return out;
}

}  // namespace detail

inline std::string Figure::render() const {
  using namespace detail;
  std::string body;
  switch (kind) {
    case Kind::Histogram: {
      std::vector<double> xs, ys{0.0};
      for (const auto& s : series) {
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        ys.insert(ys.end(), s.y.begin(), s.y.end());
      }
      const Axis ax = Axis::over(xs), ay = Axis::over(ys);
      body += frame(*this, ax, ay);
      for (std::size_t s = 0; s < series.size(); ++s)
        for (std::size_t b = 0; b < series[s].y.size() && b + 1 < series[s].x.size(); ++b) {
          const double l = px(ax, series[s].x[b]), r = px(ax, series[s].x[b + 1]);
          const double top = py(ay, series[s].y[b]), base = py(ay, 0.0);
          body += "<rect x=\"" + num(l) + "\" y=\"" + num(top) + "\" width=\"" + num(std::max(0.0, r - l)) +
                  "\" height=\"" + num(std::max(0.0, base - top)) + "\" fill=\"" + kPalette[s % 6] +
                  "\" fill-opacity=\"0.6\" stroke=\"#fff\"/>\n";
        }
      body += legend(*this);
      break;
    }
    case Kind::Box: {
      std::vector<double> ys;
      for (const auto& s : series) ys.insert(ys.end(), s.y.begin(), s.y.end());
      const Axis ay = Axis::over(ys), ax{0.0, static_cast<double>(std::max<std::size_t>(series.size(), 1))};
      body += frame(*this, ax, ay, false);
      for (std::size_t s = 0; s < series.size(); ++s) {
        const auto b = box_stats(series[s].y);
        const double c = px(ax, static_cast<double>(s) + 0.5), half = 0.3 * (px(ax, 1.0) - px(ax, 0.0));
        const char* col = kPalette[s % 6];
        body += line(c, py(ay, b.lo), c, py(ay, b.q1), col) + line(c, py(ay, b.q3), c, py(ay, b.hi), col);
        body += line(c - half / 2, py(ay, b.lo), c + half / 2, py(ay, b.lo), col);
        body += line(c - half / 2, py(ay, b.hi), c + half / 2, py(ay, b.hi), col);
        body += "<rect x=\"" + num(c - half) + "\" y=\"" + num(py(ay, b.q3)) + "\" width=\"" + num(2 * half) +
                "\" height=\"" + num(py(ay, b.q1) - py(ay, b.q3)) + "\" fill=\"none\" stroke=\"" + col + "\"/>\n";
        body += line(c - half, py(ay, b.median), c + half, py(ay, b.median), col);
        body += text(c, kHeight - kBottom + 20, series[s].name, " text-anchor=\"middle\"");
      }
      break;
    }
    case Kind::Scatter:
    case Kind::Line: {
      std::vector<double> xs, ys;
      for (const auto& s : series) {
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        ys.insert(ys.end(), s.y.begin(), s.y.end());
      }
      const Axis ax = Axis::over(xs), ay = Axis::over(ys);
      body += frame(*this, ax, ay);
      for (std::size_t s = 0; s < series.size(); ++s) {
        const auto& sr = series[s];
        const std::size_t n = std::min(sr.x.size(), sr.y.size());
        if (kind == Kind::Line) {
          std::string pts;
          for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
            pts += (pts.empty() ? "" : " ") + num(px(ax, sr.x[i])) + "," + num(py(ay, sr.y[i]));
          }
          body += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + kPalette[s % 6] + "\" stroke-width=\"1.5\"/>\n";
        } else {
          for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(sr.x[i]) || !std::isfinite(sr.y[i])) continue;
            body += "<circle cx=\"" + num(px(ax, sr.x[i])) + "\" cy=\"" + num(py(ay, sr.y[i])) + "\" r=\"3\" fill=\"" +
                    kPalette[s % 6] + "\" fill-opacity=\"0.6\"/>\n";
          }
        }
      }
      body += legend(*this);
      break;
    }
    case Kind::Grid: {
      std::size_t cols = 1;
      for (const auto& r : grid) cols = std::max(cols, r.images.size());
      const double label_w = 140.0;
      const double cell = std::min((kWidth - label_w - 20.0) / static_cast<double>(cols),
                                   (kHeight - kTop - 20.0) / static_cast<double>(std::max<std::size_t>(grid.size(), 1)));
      for (std::size_t r = 0; r < grid.size(); ++r) {
        const double y = kTop + cell * static_cast<double>(r);
        body += text(10, y + cell / 2, grid[r].label);
        for (std::size_t c = 0; c < grid[r].images.size(); ++c) {
          const double x = label_w + cell * static_cast<double>(c);
          const Index idx = grid[r].images[c];
          if (images && idx < images->count) {
            body += "<image x=\"" + num(x + 2) + "\" y=\"" + num(y + 2) + "\" width=\"" + num(cell - 4) + "\" height=\"" +
                    num(cell - 4) + "\" preserveAspectRatio=\"none\" xlink:href=\"data:image/bmp;base64," +
                    base64(thumbnail_bmp(*images, idx)) + "\"/>\n";
          } else {
            body += "<rect x=\"" + num(x + 2) + "\" y=\"" + num(y + 2) + "\" width=\"" + num(cell - 4) + "\" height=\"" +
                    num(cell - 4) + "\" fill=\"#eee\" stroke=\"#999\"/>\n";
          }
          body += text(x + cell / 2, y + cell - 6, std::to_string(idx), " text-anchor=\"middle\" font-size=\"10\"");
        }
      }
      break;
    }
  }
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
         "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" version=\"1.1\" width=\"800\" "
         "height=\"600\" viewBox=\"0 0 800 600\">\n"
         "<rect width=\"800\" height=\"600\" fill=\"#fff\"/>\n" +
         detail::text(kWidth / 2, 28, title, " text-anchor=\"middle\" font-size=\"16\"") + body + "</svg>\n";
}

inline void save(const fs::path& path, const Figure& f) { write_text_atomic(path, f.render()); }

inline Figure histogram_figure(const std::string& title, const std::string& x_label, const stats::Histogram& h) {
  Figure f;
  f.kind = Kind::Histogram;
  f.title = title;
  f.x_label = x_label;
  f.y_label = "count";
  Series s;
  s.name = x_label;
  for (std::size_t b = 0; b <= h.counts.size(); ++b) s.x.push_back(h.lo + h.bin_width() * static_cast<double>(b));
  for (auto c : h.counts) s.y.push_back(static_cast<double>(c));
  f.series.push_back(std::move(s));
  return f;
}

}  // namespace superscope::svg
