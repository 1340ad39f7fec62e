#pragma once

// Synthetic noisy-label datasets for exercising the loop at desk scale.
//
// Ground truth is blob-structured at superpixel resolution: each image is an
// g x g grid of cells, and every cell takes the class of its nearest random
// seed cell, so each superpixel is single-class in ground truth. Image colors
// are class-conditional (palette colour plus Gaussian noise). Pseudo labels
// are the ground truth with round(eta * cells) randomly chosen cells flipped
// to a uniformly random wrong class.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "alc/core.hpp"
#include "alc/rng.hpp"
#include "alc/tensor_io.hpp"

namespace alc {

struct SynthSpec {
  std::uint32_t images = 10;
  std::uint32_t height = 64;
  std::uint32_t width = 64;
  std::uint32_t classes = 4;
  double noise = 0.4;  // fraction of superpixels whose pseudo label is flipped
  std::uint32_t grid = 8;
  std::uint64_t seed = 7;
  double color_sigma = 0.04;

  void validate() const {
    if (images < 1 || height < 1 || width < 1 || classes < 1 || grid < 1)
      throw Error(Errc::InvalidArgument, "images, size, classes and grid must be >= 1");
    if (!(noise >= 0.0 && noise <= 1.0)) throw Error(Errc::InvalidArgument, "noise must lie in [0, 1]");
    if (grid > height || grid > width) throw Error(Errc::InvalidArgument, "grid finer than the image");
    if (classes > 0xFFFF) throw Error(Errc::InvalidArgument, "too many classes");
    if (noise > 0.0 && classes < 2) throw Error(Errc::InvalidArgument, "label noise needs at least 2 classes");
  }
};

struct SynthResult {
  DatasetManifest manifest;
  fs::path manifest_path;
  std::vector<SegmentKey> noisy_segments;  // sorted
};

inline std::array<double, 3> synth_class_color(std::uint32_t c, std::uint32_t num_classes) {
  static constexpr std::array<std::array<double, 3>, 8> kCorners{{{0.9, 0.1, 0.1},
                                                                  {0.1, 0.8, 0.1},
                                                                  {0.1, 0.2, 0.9},
                                                                  {0.9, 0.9, 0.1},
                                                                  {0.8, 0.1, 0.8},
                                                                  {0.1, 0.8, 0.8},
                                                                  {0.9, 0.9, 0.9},
                                                                  {0.1, 0.1, 0.1}}};
  if (num_classes <= kCorners.size()) return kCorners[c];
  // Evenly spaced hues, alternating brightness.
  const double h = 6.0 * c / num_classes;
  const double v = (c % 2) ? 0.95 : 0.6;
  const double f = h - std::floor(h);
  const double p = 0.1 * v, q = v * (1 - 0.9 * f), t = v * (1 - 0.9 * (1 - f));
  switch (static_cast<int>(h) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

inline std::string synth_image_id(std::uint32_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%04u", i);
  return buf;
}

/// Writes a complete dataset (tensors + manifest.json) into `dir`.
inline SynthResult synthesize(const SynthSpec& spec, const fs::path& dir) {
  spec.validate();
  const std::uint32_t g = spec.grid, H = spec.height, W = spec.width, C = spec.classes;
  const std::uint32_t cells = g * g;
  Rng rng(mix_seed(spec.seed, 0x5EED));

  auto cell_of = [&](std::uint32_t x, std::uint32_t y) { return (y * g / H) * g + (x * g / W); };

  std::vector<std::vector<ClassId>> cell_gt(spec.images, std::vector<ClassId>(cells));
  for (std::uint32_t i = 0; i < spec.images; ++i) {
    const std::uint32_t seeds = std::max<std::uint32_t>(2, std::min(C + 1, cells));
    std::vector<std::uint32_t> seed_cell(seeds);
    std::vector<ClassId> seed_class(seeds);
    for (std::uint32_t s = 0; s < seeds; ++s) {
      seed_cell[s] = static_cast<std::uint32_t>(rng.below(cells));
      // Cycle classes from a random offset so every class shows up across images.
      seed_class[s] = static_cast<ClassId>((s + rng.below(C)) % C);
    }
    for (std::uint32_t cell = 0; cell < cells; ++cell) {
      const int cx = static_cast<int>(cell % g), cy = static_cast<int>(cell / g);
      std::uint32_t best = 0;
      long best_d = -1;
      for (std::uint32_t s = 0; s < seeds; ++s) {
        const int sx = static_cast<int>(seed_cell[s] % g), sy = static_cast<int>(seed_cell[s] / g);
        const long d = static_cast<long>(sx - cx) * (sx - cx) + static_cast<long>(sy - cy) * (sy - cy);
        if (best_d < 0 || d < best_d) {
          best_d = d;
          best = s;
        }
      }
      cell_gt[i][cell] = seed_class[best];
    }
  }

  // Choose exactly round(noise * total) cells across the dataset to flip.
  const std::size_t total = std::size_t{spec.images} * cells;
  const auto flips = static_cast<std::size_t>(std::llround(spec.noise * static_cast<double>(total)));
  std::vector<std::size_t> order(total);
  for (std::size_t k = 0; k < total; ++k) order[k] = k;
  for (std::size_t k = total; k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
  std::vector<std::vector<ClassId>> cell_pseudo = cell_gt;
  SynthResult result;
  for (std::size_t k = 0; k < flips; ++k) {
    const auto i = static_cast<std::uint32_t>(order[k] / cells);
    const auto cell = static_cast<std::uint32_t>(order[k] % cells);
    const ClassId truth = cell_gt[i][cell];
    const auto offset = static_cast<ClassId>(1 + rng.below(C - 1));
    cell_pseudo[i][cell] = static_cast<ClassId>((truth + offset) % C);
    result.noisy_segments.push_back({synth_image_id(i), cell});
  }
  std::sort(result.noisy_segments.begin(), result.noisy_segments.end());

  DatasetManifest& m = result.manifest;
  for (std::uint32_t c = 0; c < C; ++c) m.class_names.push_back("class_" + std::to_string(c));
  m.base_dir = fs::absolute(dir);

  for (std::uint32_t i = 0; i < spec.images; ++i) {
    const std::string id = synth_image_id(i);
    std::vector<std::uint8_t> rgb(std::size_t{H} * W * 3);
    std::vector<std::uint16_t> gt(std::size_t{H} * W), pseudo(std::size_t{H} * W);
    std::vector<std::uint32_t> sp(std::size_t{H} * W);
    for (std::uint32_t y = 0; y < H; ++y) {
      for (std::uint32_t x = 0; x < W; ++x) {
        const std::size_t p = std::size_t{y} * W + x;
        const auto cell = cell_of(x, y);
        sp[p] = cell;
        gt[p] = cell_gt[i][cell];
        pseudo[p] = cell_pseudo[i][cell];
        const auto base = synth_class_color(gt[p], C);
        for (int ch = 0; ch < 3; ++ch) {
          const double v = std::clamp(base[ch] + spec.color_sigma * rng.normal(), 0.0, 1.0);
          rgb[3 * p + ch] = static_cast<std::uint8_t>(std::lround(v * 255.0));
        }
      }
    }
    ManifestImage e;
    e.image_id = id;
    e.width = W;
    e.height = H;
    e.image_path = "images/" + id + ".alct";
    e.gt_label_path = "gt/" + id + ".alct";
    e.pseudo_label_path = "pseudo/" + id + ".alct";
    e.superpixel_path = "superpixels/" + id + ".alct";
    write_tensor(dir / e.image_path, DenseTensor::from_values<std::uint8_t>({H, W, 3}, rgb));
    write_tensor(dir / *e.gt_label_path, DenseTensor::from_values<std::uint16_t>({H, W}, gt));
    write_tensor(dir / e.pseudo_label_path, DenseTensor::from_values<std::uint16_t>({H, W}, pseudo));
    write_tensor(dir / e.superpixel_path, DenseTensor::from_values<std::uint32_t>({H, W}, sp));
    m.images.push_back(std::move(e));
  }
  result.manifest_path = dir / "manifest.json";
  m.source = fs::absolute(result.manifest_path);
  save_manifest(result.manifest_path, m);
  return result;
}

}  // namespace alc
