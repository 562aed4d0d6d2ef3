#pragma once

#include <string>
#include <vector>

#include "srunit/data/synthetic.hpp"
#include "srunit/io/image.hpp"

namespace srunit {

struct Series {
  std::string name;
  std::vector<double> y;
};

/// Line chart of each series against its index, drawn on a white canvas with
/// axes and a legend.
Image8 line_plot(const std::vector<Series>& series, Index width = 640, Index height = 360);

/// One bar per value, all in [0, max(values)].
Image8 bar_plot(const std::vector<std::pair<std::string, double>>& bars, Index width = 640, Index height = 360);

/// Draws `text` (upper-cased, 5x7 glyphs) at (x, y) with scale `s`.
void draw_text(Image8& img, Index x, Index y, const std::string& text, const Rgb& color, Index s = 1);

/// Series from a CSV with a header row; columns named in `skip` are ignored.
std::vector<Series> read_csv_series(const std::string& path, const std::vector<std::string>& skip);

}  // namespace srunit
