#pragma once

// Cube and label ingestion, band standardization, seeded train/test
// partitioning, patch extraction with zero fill and mirror augmentation.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hsicnn/tensor.hpp"

namespace hsicnn {

// H x W x B reflectance cube, stored band-interleaved-by-pixel.
struct HSICube {
  int H = 0, W = 0, B = 0;
  std::vector<float> values;  // H*W*B, row-major spatially

  float& at(int y, int x, int b) {
    return values[(static_cast<std::size_t>(y) * W + x) * B + b];
  }
  float at(int y, int x, int b) const {
    return values[(static_cast<std::size_t>(y) * W + x) * B + b];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(H) * W; }
};

// Ground-truth class raster. 0 = unlabeled, 1..C = classes.
struct LabelMap {
  int H = 0, W = 0, C = 0;
  std::vector<std::uint16_t> labels;  // H*W row-major
  std::vector<std::string> class_names;

  std::uint16_t at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * W + x];
  }
};

// ---- ENVI ingestion (text header + raw binary companion) ----
// Supported: interleave bip/bil/bsq, data types 4 (float32) and 12 (u16),
// little-endian byte order.
HSICube read_envi_cube(const std::string& header_path, const std::string& raw_path);
LabelMap read_envi_labels(const std::string& header_path, const std::string& raw_path);

// ---- native binary formats ----
// HSIC: magic "HSIC", u32 version=1, u32 H, W, B, f32 values (LE).
// HSIL: magic "HSIL", u32 version=1, u32 H, W, C, u16 labels (LE).
void write_hsic(const HSICube& cube, const std::string& path);
HSICube read_hsic(const std::string& path);
void write_hsil(const LabelMap& labels, const std::string& path);
LabelMap read_hsil(const std::string& path);

struct BandStats {
  std::vector<float> mean, stddev;  // per band
};

// In-place per-band zero-mean/unit-variance scaling with statistics taken
// over the given training pixels only. Bands with stddev < 1e-12 are
// divided by 1 instead.
BandStats standardize(HSICube& cube, const std::vector<std::size_t>& train_pixels);

struct SplitSpec {
  std::uint32_t seed = 0;
  int n_train_per_class = 200;
  std::vector<int> classes;  // original 1-based label ids, ascending
  // Parallel to `classes`: flat pixel indices (y*W + x).
  std::vector<std::vector<std::size_t>> train, test;

  std::size_t train_total() const;
  std::size_t test_total() const;
};

// Uniform without-replacement sampling of min(n_per_class, class size)
// training pixels per selected class; the rest of each class's labeled
// pixels become test. Deterministic in the seed.
SplitSpec sample_split(const LabelMap& labels, const std::vector<int>& classes,
                       int n_per_class, std::uint32_t seed);

// The `n` largest classes of the map, by pixel count (ties to lower id).
std::vector<int> largest_classes(const LabelMap& labels, int n);

// Patch mirror variants: original, horizontal flip, vertical flip,
// diagonal flip (transpose). The spectral axis is untouched.
enum class MirrorVariant { orig, horizontal, vertical, diagonal };
inline constexpr MirrorVariant kAllVariants[] = {
    MirrorVariant::orig, MirrorVariant::horizontal, MirrorVariant::vertical,
    MirrorVariant::diagonal};

// (2r+1) x (2r+1) x B patch centered on the pixel, zero-filled outside the
// image (consistent with the network's zero padding).
Tensor extract_patch(const HSICube& cube, int y, int x, int radius);

Tensor apply_mirror(const Tensor& patch, MirrorVariant v);

}  // namespace hsicnn
