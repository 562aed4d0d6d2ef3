#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "srunit/core/rng.hpp"
#include "srunit/io/image.hpp"

namespace srunit {

using Rgb = std::array<int, 3>;

inline constexpr std::uint8_t kBackgroundId = 0;
inline constexpr std::uint8_t kIgnoreId = 255;

enum class ShapeFamily { Disc, Square, Triangle, Stripe };

std::string to_string(ShapeFamily s);
ShapeFamily parse_shape_family(const std::string& s);

/// Affine channel map out = M * rgb + b, clamped and rounded to 8 bits.
struct StyleTransform {
  std::array<double, 9> matrix{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> offset{0, 0, 0};

  Rgb apply(const Rgb& c) const;
  bool invertible() const;
};

struct SyntheticDomainSpec {
  std::vector<Rgb> class_palette;          // one color per class, ids 1..C
  std::vector<double> class_histogram;     // fraction of all pixels per class
  std::vector<ShapeFamily> shape_family;   // one per class
  StyleTransform style;
  Index image_size = 64;
  Rgb background_color{0, 0, 0};

  Index num_classes() const { return static_cast<Index>(class_palette.size()); }
  /// Colors after the style transform; index 0 is the background, i the class id.
  std::vector<Rgb> rendered_palette() const;
  /// Throws ArgumentError on any violated invariant.
  void validate() const;
};

/// Minimum pairwise max-channel distance among rendered colors (incl. background).
inline constexpr int kPaletteSeparation = 60;

int max_channel_distance(const Rgb& a, const Rgb& b);

struct SyntheticSample {
  Image8 image;  // RGB
  Image8 mask;   // class ids, 0 = background
};

/// Paints `count` images. Class pixel counts are fraction * pixels rounded by
/// largest remainder (so they add up exactly): random shapes are pasted onto
/// background only, then classes still short of their target grow into
/// adjacent background pixels.
std::vector<SyntheticSample> synthesize_domain(const SyntheticDomainSpec& spec, Index count, Rng& rng);

/// Renders a mask with the spec's palette (the ground-truth translation).
Image8 render_mask(const Image8& mask, const SyntheticDomainSpec& spec);

/// Canonical well-separated palettes used by the CLI; domain 0 and 1 differ.
std::vector<Rgb> default_palette(Index classes, int domain);

}  // namespace srunit
