#include "srunit/evaluation/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "srunit/data/synthetic.hpp"

namespace srunit {

namespace {

const std::map<char, std::array<std::uint8_t, 7>>& glyphs() {
  static const std::map<char, std::array<std::uint8_t, 7>> g = {
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}}, {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}}, {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}}, {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}}, {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}}, {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}}, {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}}, {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}}, {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}}, {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}}, {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}}, {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}}, {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}}, {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}}, {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}}, {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}}, {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}}, {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'.', {0, 0, 0, 0, 0, 0x0C, 0x0C}},                 {'-', {0, 0, 0, 0x1F, 0, 0, 0}},
      {'_', {0, 0, 0, 0, 0, 0, 0x1F}},                    {':', {0, 0x0C, 0x0C, 0, 0x0C, 0x0C, 0}},
      {'=', {0, 0, 0x1F, 0, 0x1F, 0, 0}},                 {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}}, {'/', {0, 0x01, 0x02, 0x04, 0x08, 0x10, 0}},
      {'+', {0, 0x04, 0x04, 0x1F, 0x04, 0x04, 0}},
  };
  return g;
}

const std::vector<Rgb>& series_colors() {
  static const std::vector<Rgb> c = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},
                                     {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
                                     {188, 189, 34},  {23, 190, 207}};
  return c;
}

void put(Image8& img, Index x, Index y, const Rgb& c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (Index ch = 0; ch < 3; ++ch) img.at(y, x, ch) = static_cast<std::uint8_t>(c[static_cast<size_t>(ch)]);
}

void line(Image8& img, double x0, double y0, double x1, double y1, const Rgb& c) {
  const double steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1.0});
  for (int i = 0; i <= static_cast<int>(steps); ++i) {
    const double t = i / steps;
    const Index x = static_cast<Index>(std::lround(x0 + t * (x1 - x0)));
    const Index y = static_cast<Index>(std::lround(y0 + t * (y1 - y0)));
    put(img, x, y, c);
    put(img, x, y + 1, c);
  }
}

void rect(Image8& img, Index x0, Index y0, Index x1, Index y1, const Rgb& c) {
  for (Index y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
    for (Index x = std::min(x0, x1); x <= std::max(x0, x1); ++x) put(img, x, y, c);
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

constexpr Index kLeft = 70, kRight = 20, kTop = 20, kBottom = 40;
const Rgb kBlack{0, 0, 0}, kGrey{200, 200, 200};

}  // namespace

void draw_text(Image8& img, Index x, Index y, const std::string& text, const Rgb& color, Index s) {
  Index cx = x;
  for (char ch : text) {
    const char u = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    const auto it = glyphs().find(u);
    if (it != glyphs().end())
      for (Index r = 0; r < 7; ++r)
        for (Index col = 0; col < 5; ++col)
          if (it->second[static_cast<size_t>(r)] & (0x10 >> col)) rect(img, cx + col * s, y + r * s, cx + col * s + s - 1, y + r * s + s - 1, color);
    cx += 6 * s;
  }
}

Image8 line_plot(const std::vector<Series>& series, Index width, Index height) {
  Image8 img(width, height, 3, 255);
  double lo = INFINITY, hi = -INFINITY;
  size_t n = 0;
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (double v : s.y)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) hi = lo + 1;
  const Index pw = width - kLeft - kRight, ph = height - kTop - kBottom;
  auto px = [&](double i) { return kLeft + (n > 1 ? i / double(n - 1) : 0.5) * pw; };
  auto py = [&](double v) { return kTop + (1 - (v - lo) / (hi - lo)) * ph; };

  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4;
    line(img, kLeft, py(v), kLeft + pw, py(v), kGrey);
    draw_text(img, 4, static_cast<Index>(py(v)) - 3, short_number(v), kBlack);
  }
  line(img, kLeft, kTop, kLeft, kTop + ph, kBlack);
  line(img, kLeft, kTop + ph, kLeft + pw, kTop + ph, kBlack);
  draw_text(img, kLeft, kTop + ph + 8, "0", kBlack);
  draw_text(img, kLeft + pw - 30, kTop + ph + 8, std::to_string(n > 0 ? n - 1 : 0), kBlack);
  draw_text(img, kLeft + pw / 2 - 12, kTop + ph + 22, "STEP", kBlack);

  for (size_t k = 0; k < series.size(); ++k) {
    const Rgb& c = series_colors()[k % series_colors().size()];
    const auto& y = series[k].y;
    for (size_t i = 1; i < y.size(); ++i)
      if (std::isfinite(y[i - 1]) && std::isfinite(y[i])) line(img, px(double(i - 1)), py(y[i - 1]), px(double(i)), py(y[i]), c);
    rect(img, kLeft + pw - 150, kTop + 4 + static_cast<Index>(k) * 12, kLeft + pw - 142, kTop + 10 + static_cast<Index>(k) * 12, c);
    draw_text(img, kLeft + pw - 136, kTop + 4 + static_cast<Index>(k) * 12, series[k].name, kBlack);
  }
  return img;
}

Image8 bar_plot(const std::vector<std::pair<std::string, double>>& bars, Index width, Index height) {
  Image8 img(width, height, 3, 255);
  double hi = 0;
  for (const auto& b : bars)
    if (std::isfinite(b.second)) hi = std::max(hi, b.second);
  if (hi <= 0) hi = 1;
  const Index pw = width - kLeft - kRight, ph = height - kTop - kBottom;
  line(img, kLeft, kTop, kLeft, kTop + ph, kBlack);
  line(img, kLeft, kTop + ph, kLeft + pw, kTop + ph, kBlack);
  draw_text(img, 4, kTop - 3, short_number(hi), kBlack);
  draw_text(img, 4, kTop + ph - 3, "0", kBlack);
  const Index n = static_cast<Index>(bars.size());
  if (n == 0) return img;
  const Index slot = pw / n;
  for (Index i = 0; i < n; ++i) {
    const double v = std::isfinite(bars[static_cast<size_t>(i)].second) ? bars[static_cast<size_t>(i)].second : 0;
    const Index top = kTop + ph - static_cast<Index>(std::lround(v / hi * static_cast<double>(ph)));
    const Rgb& c = series_colors()[static_cast<size_t>(i) % series_colors().size()];
    rect(img, kLeft + i * slot + slot / 6, top, kLeft + (i + 1) * slot - slot / 6, kTop + ph - 1, c);
    draw_text(img, kLeft + i * slot + 2, kTop + ph + 6, bars[static_cast<size_t>(i)].first, kBlack);
    draw_text(img, kLeft + i * slot + slot / 6, std::max<Index>(0, top - 10), short_number(v), kBlack);
  }
  return img;
}

std::vector<Series> read_csv_series(const std::string& path, const std::vector<std::string>& skip) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line_text;
  if (!std::getline(in, line_text)) return {};
  std::vector<std::string> names;
  {
    std::stringstream ss(line_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) names.push_back(tok);
  }
  std::vector<Series> cols(names.size());
  for (size_t i = 0; i < names.size(); ++i) cols[i].name = names[i];
  while (std::getline(in, line_text)) {
    std::stringstream ss(line_text);
    std::string tok;
    for (size_t i = 0; i < names.size() && std::getline(ss, tok, ','); ++i) cols[i].y.push_back(std::strtod(tok.c_str(), nullptr));
  }
  std::vector<Series> out;
  for (auto& c : cols)
    if (std::find(skip.begin(), skip.end(), c.name) == skip.end()) out.push_back(std::move(c));
  return out;
}

}  // namespace srunit
