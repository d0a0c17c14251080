#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dismax/tensor.hpp"

namespace dismax {

// Immutable bag of examples; labels are absent for OOD sets. Examples share
// one shape: rank 1 (dim) for point clouds, rank 3 (H,W,C) for images, with
// pixel data normalized to [0,1].
struct Dataset {
  std::string name;
  std::string split_tag;  // train / val / test / ood
  std::vector<Tensor> examples;
  std::vector<std::size_t> labels;

  bool has_labels() const { return !labels.empty(); }
  std::size_t size() const { return examples.size(); }
  std::size_t flat_dim() const {
    return examples.empty() ? 0 : examples.front().size();
  }
};

// Gaussian clusters at seeded random centers; deterministic per seed.
Dataset synth_blobs(std::size_t n_classes, std::size_t dim,
                    std::size_t n_per_class, double spread,
                    std::uint64_t seed);

// Unlabeled standard-normal points displaced by `offset` along a seeded
// random unit direction.
Dataset synth_ood(std::size_t dim, std::size_t n, double offset,
                  std::uint64_t seed);

// Stroke-glyph image corpus: every class renders a fixed pair of oriented
// Gaussian strokes whose geometry is derived from (family, class) only, so
// different seeds draw fresh examples of the same classes. Distinct families
// are disjoint corpora.
Dataset synth_images(std::size_t n_classes, std::size_t height,
                     std::size_t width, std::size_t n_per_class,
                     std::uint64_t seed, std::uint64_t family = 0);

// IDX ingestion (big-endian, unsigned-byte payload, rank 3 for images and
// rank 1 for labels); pixels scaled to [0,1]. Pass an empty labels path for
// unlabeled data.
Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path = "");

// IDX emission; pixels quantized to bytes by round(v*255). Pass an empty
// labels path to skip labels.
void write_idx(const std::string& images_path, const std::string& labels_path,
               const Dataset& dataset);

// Internal cache format (JSON with base64 float payloads); round-trips
// bit-exactly.
void save_dataset(const std::string& path, const Dataset& dataset);
Dataset load_dataset(const std::string& path);

}  // namespace dismax
