// IDX (MNIST-style) binary image/label files, a writer for producing them,
// and a synthetic glyph generator that emits the same format when the real
// dataset is not on disk.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splinelab/dataset.hpp"

namespace splinelab {

struct ImageDataset {
  size_t count = 0, rows = 0, cols = 0;
  std::vector<double> pixels;  // count x rows x cols, scaled to [0,1]
  std::vector<int> labels;
};

// Magic numbers 0x00000803 (images) / 0x00000801 (labels), big-endian
// dimensions, unsigned byte pixels. Throws FormatError with the byte offset
// on bad magic, truncation, or image/label count mismatch.
ImageDataset load_mnist_idx(const std::string& images_path,
                            const std::string& labels_path);

void write_idx_images(const std::string& path, size_t count, size_t rows,
                      size_t cols, const std::vector<uint8_t>& pixels);
void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels);

// Procedural 28x28 digit glyphs (0-9) with random placement, thickness and
// noise; a stand-in with the same file format and label structure as MNIST
// for environments without the real files.
void write_synth_digit_idx(const std::string& images_path,
                           const std::string& labels_path, size_t count,
                           uint64_t seed);

// Conversion to the training Dataset type; input shape {1, rows, cols},
// optionally truncated to the first `limit` images.
Dataset to_dataset(const ImageDataset& im, size_t limit = 0);

}  // namespace splinelab
