#include "srunit/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace srunit {

std::string to_string(ShapeFamily s) {
  switch (s) {
    case ShapeFamily::Disc: return "disc";
    case ShapeFamily::Square: return "square";
    case ShapeFamily::Triangle: return "triangle";
    case ShapeFamily::Stripe: return "stripe";
  }
  return "disc";
}

ShapeFamily parse_shape_family(const std::string& s) {
  if (s == "disc") return ShapeFamily::Disc;
  if (s == "square") return ShapeFamily::Square;
  if (s == "triangle") return ShapeFamily::Triangle;
  if (s == "stripe") return ShapeFamily::Stripe;
  throw ArgumentError("unknown shape family '" + s + "'");
}

Rgb StyleTransform::apply(const Rgb& c) const {
  Rgb out{};
  for (int i = 0; i < 3; ++i) {
    double v = offset[static_cast<size_t>(i)];
    for (int j = 0; j < 3; ++j) v += matrix[static_cast<size_t>(3 * i + j)] * c[static_cast<size_t>(j)];
    out[static_cast<size_t>(i)] = static_cast<int>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
  return out;
}

bool StyleTransform::invertible() const {
  const auto& m = matrix;
  const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                     m[2] * (m[3] * m[7] - m[4] * m[6]);
  return std::abs(det) > 1e-9;
}

int max_channel_distance(const Rgb& a, const Rgb& b) {
  int d = 0;
  for (size_t i = 0; i < 3; ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::vector<Rgb> SyntheticDomainSpec::rendered_palette() const {
  std::vector<Rgb> out{style.apply(background_color)};
  for (const auto& c : class_palette) out.push_back(style.apply(c));
  return out;
}

void SyntheticDomainSpec::validate() const {
  const Index c = num_classes();
  if (c < 1 || c > 254) throw ArgumentError("class count must be in 1..254");
  if (static_cast<Index>(class_histogram.size()) != c)
    throw ArgumentError("class_histogram has " + std::to_string(class_histogram.size()) + " entries for " +
                        std::to_string(c) + " classes");
  if (static_cast<Index>(shape_family.size()) != c) throw ArgumentError("need one shape family per class");
  if (image_size < 4) throw ArgumentError("image_size must be >= 4");
  double total = 0;
  for (double f : class_histogram) {
    if (!(f >= 0)) throw ArgumentError("class_histogram entries must be >= 0");
    total += f;
  }
  if (total > 1 + 1e-9) throw ArgumentError("class_histogram sums to " + std::to_string(total) + " > 1");
  if (!style.invertible()) throw ArgumentError("style transform is not invertible");
  for (const auto& col : class_palette)
    for (int v : col)
      if (v < 0 || v > 255) throw ArgumentError("palette values must be 0..255");
  const auto pal = rendered_palette();
  for (size_t i = 0; i < pal.size(); ++i)
    for (size_t j = i + 1; j < pal.size(); ++j)
      if (max_channel_distance(pal[i], pal[j]) < kPaletteSeparation)
        throw ArgumentError("rendered colors " + std::to_string(i) + " and " + std::to_string(j) +
                            " are closer than " + std::to_string(kPaletteSeparation));
}

namespace {

bool inside(ShapeFamily f, double cy, double cx, double r, bool vertical, Index y, Index x) {
  const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
  switch (f) {
    case ShapeFamily::Disc: return dx * dx + dy * dy <= r * r;
    case ShapeFamily::Square: return std::abs(dx) <= r && std::abs(dy) <= r;
    case ShapeFamily::Triangle:
      // Upward isosceles triangle with base 2r and height 2r.
      return dy >= -r && dy <= r && std::abs(dx) <= (dy + r) / 2;
    case ShapeFamily::Stripe: return vertical ? std::abs(dx) <= r : std::abs(dy) <= r;
  }
  return false;
}

double radius_for(ShapeFamily f, double area, Index size) {
  switch (f) {
    case ShapeFamily::Disc: return std::sqrt(area / M_PI);
    case ShapeFamily::Square: return std::sqrt(area / 4);
    case ShapeFamily::Triangle: return std::sqrt(area / 2);
    case ShapeFamily::Stripe: return area / (2 * static_cast<double>(size));
  }
  return 0;
}

}  // namespace

std::vector<SyntheticSample> synthesize_domain(const SyntheticDomainSpec& spec, Index count, Rng& rng) {
  spec.validate();
  if (count < 0) throw ArgumentError("count must be >= 0");
  const Index s = spec.image_size, px = s * s, C = spec.num_classes();

  // Largest-remainder rounding so the per-class counts add up to round(sum * px).
  std::vector<Index> target(static_cast<size_t>(C + 1), 0);
  double total = 0;
  for (double h : spec.class_histogram) total += h;
  Index fg = 0;
  std::vector<std::pair<double, Index>> rem;
  for (Index c = 0; c < C; ++c) {
    const double exact = spec.class_histogram[static_cast<size_t>(c)] * static_cast<double>(px);
    const Index whole = static_cast<Index>(std::floor(exact));
    target[static_cast<size_t>(c + 1)] = whole;
    fg += whole;
    rem.emplace_back(exact - static_cast<double>(whole), c + 1);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  const Index want_fg = std::min<Index>(px, std::lround(total * static_cast<double>(px)));
  for (size_t i = 0; fg < want_fg && i < rem.size(); ++i, ++fg) ++target[static_cast<size_t>(rem[i].second)];
  if (fg > px) throw GenerationError("class targets exceed the image area");
  for (Index c = 0; c < C; ++c) {
    const double got = static_cast<double>(target[static_cast<size_t>(c + 1)]) / static_cast<double>(px);
    if (std::abs(got - spec.class_histogram[static_cast<size_t>(c)]) > 0.02)
      throw GenerationError("class " + std::to_string(c + 1) + " fraction cannot be realized at image size " +
                            std::to_string(s));
  }

  std::vector<SyntheticSample> out;
  out.reserve(static_cast<size_t>(count));
  for (Index i = 0; i < count; ++i) {
    Image8 mask(s, s, 1, kBackgroundId);
    std::vector<Index> have(static_cast<size_t>(C + 1), 0);

    // Shapes, in a random class order per image.
    std::vector<Index> order(static_cast<size_t>(C));
    for (Index c = 0; c < C; ++c) order[static_cast<size_t>(c)] = c + 1;
    rng.shuffle(order);
    for (Index cls : order) {
      const ShapeFamily fam = spec.shape_family[static_cast<size_t>(cls - 1)];
      const Index want = target[static_cast<size_t>(cls)];
      for (int attempt = 0; attempt < 64 && have[static_cast<size_t>(cls)] < want; ++attempt) {
        const double remaining = static_cast<double>(want - have[static_cast<size_t>(cls)]);
        // One shape covers between a third and all of what is left, capped at a quarter image.
        const double area = std::min(remaining, static_cast<double>(px) / 4) * rng.uniform(0.34, 1.0);
        const double r = std::max(1.0, radius_for(fam, area, s));
        const double cy = rng.uniform(0, static_cast<double>(s)), cx = rng.uniform(0, static_cast<double>(s));
        const bool vertical = rng.uniform() < 0.5;
        for (Index y = 0; y < s && have[static_cast<size_t>(cls)] < want; ++y)
          for (Index x = 0; x < s && have[static_cast<size_t>(cls)] < want; ++x)
            if (mask.at(y, x) == kBackgroundId && inside(fam, cy, cx, r, vertical, y, x)) {
              mask.at(y, x) = static_cast<std::uint8_t>(cls);
              ++have[static_cast<size_t>(cls)];
            }
      }
    }

    // Growth: breadth-first from existing pixels of classes below target.
    for (Index cls : order) {
      const Index want = target[static_cast<size_t>(cls)];
      if (have[static_cast<size_t>(cls)] >= want) continue;
      std::deque<std::pair<Index, Index>> frontier;
      for (Index y = 0; y < s; ++y)
        for (Index x = 0; x < s; ++x)
          if (mask.at(y, x) == cls) frontier.emplace_back(y, x);
      if (frontier.empty()) {
        // No seed: start at a random background pixel.
        std::vector<std::pair<Index, Index>> bg;
        for (Index y = 0; y < s; ++y)
          for (Index x = 0; x < s; ++x)
            if (mask.at(y, x) == kBackgroundId) bg.emplace_back(y, x);
        if (bg.empty()) throw GenerationError("no background left to place class " + std::to_string(cls));
        const auto p = bg[static_cast<size_t>(rng.below(bg.size()))];
        mask.at(p.first, p.second) = static_cast<std::uint8_t>(cls);
        ++have[static_cast<size_t>(cls)];
        frontier.push_back(p);
      }
      static constexpr Index dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
      while (!frontier.empty() && have[static_cast<size_t>(cls)] < want) {
        const auto [y, x] = frontier.front();
        frontier.pop_front();
        for (int d = 0; d < 4 && have[static_cast<size_t>(cls)] < want; ++d) {
          const Index ny = y + dy[d], nx = x + dx[d];
          if (ny < 0 || nx < 0 || ny >= s || nx >= s || mask.at(ny, nx) != kBackgroundId) continue;
          mask.at(ny, nx) = static_cast<std::uint8_t>(cls);
          ++have[static_cast<size_t>(cls)];
          frontier.emplace_back(ny, nx);
        }
      }
      if (have[static_cast<size_t>(cls)] < want) {
        // The class is walled in; jump to another background component.
        for (Index y = 0; y < s && have[static_cast<size_t>(cls)] < want; ++y)
          for (Index x = 0; x < s && have[static_cast<size_t>(cls)] < want; ++x)
            if (mask.at(y, x) == kBackgroundId) {
              mask.at(y, x) = static_cast<std::uint8_t>(cls);
              ++have[static_cast<size_t>(cls)];
            }
      }
      if (have[static_cast<size_t>(cls)] != want)
        throw GenerationError("could not reach the pixel target for class " + std::to_string(cls));
    }

    SyntheticSample sample;
    sample.mask = std::move(mask);
    sample.image = render_mask(sample.mask, spec);
    out.push_back(std::move(sample));
  }
  return out;
}

Image8 render_mask(const Image8& mask, const SyntheticDomainSpec& spec) {
  const auto pal = spec.rendered_palette();
  Image8 img(mask.width, mask.height, 3);
  for (Index y = 0; y < mask.height; ++y)
    for (Index x = 0; x < mask.width; ++x) {
      const auto id = mask.at(y, x);
      const Rgb& c = id < pal.size() ? pal[id] : pal[0];
      for (Index ch = 0; ch < 3; ++ch) img.at(y, x, ch) = static_cast<std::uint8_t>(c[static_cast<size_t>(ch)]);
    }
  return img;
}

std::vector<Rgb> default_palette(Index classes, int domain) {
  // Corners and edge midpoints of the RGB cube, spaced >= 100 apart and away from black.
  static const std::vector<Rgb> a = {{220, 40, 40},  {40, 200, 40},  {40, 60, 220},  {230, 220, 40},
                                     {200, 40, 210}, {40, 210, 210}, {240, 240, 240}, {130, 130, 130}};
  static const std::vector<Rgb> b = {{240, 140, 20}, {20, 120, 90},  {150, 80, 230}, {120, 230, 160},
                                     {250, 110, 170}, {140, 160, 40}, {90, 200, 250}, {200, 190, 120}};
  const auto& src = domain == 0 ? a : b;
  if (classes > static_cast<Index>(src.size()))
    throw ArgumentError("default palettes hold at most " + std::to_string(src.size()) + " classes");
  return {src.begin(), src.begin() + classes};
}

}  // namespace srunit
