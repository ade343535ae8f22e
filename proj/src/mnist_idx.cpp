#include "splinelab/mnist_idx.hpp"

#include <algorithm>
#include <fstream>

#include "splinelab/rng.hpp"

namespace splinelab {

namespace {

uint32_t read_be32(std::istream& is, size_t& offset, const std::string& what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4)
    throw FormatError(what + ": truncated at byte " + std::to_string(offset));
  offset += 4;
  return (static_cast<uint32_t>(b[0]) << 24) | (static_cast<uint32_t>(b[1]) << 16) |
         (static_cast<uint32_t>(b[2]) << 8) | static_cast<uint32_t>(b[3]);
}

void write_be32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

ImageDataset load_mnist_idx(const std::string& images_path,
                            const std::string& labels_path) {
  ImageDataset out;
  {
    std::ifstream is(images_path, std::ios::binary);
    if (!is) throw Error("cannot open: " + images_path);
    size_t offset = 0;
    const uint32_t magic = read_be32(is, offset, images_path);
    if (magic != 0x00000803u)
      throw FormatError(images_path + ": bad magic 0x" + [&] {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%08x", magic);
        return std::string(buf);
      }() + " at byte 0 (want 0x00000803)");
    out.count = read_be32(is, offset, images_path);
    out.rows = read_be32(is, offset, images_path);
    out.cols = read_be32(is, offset, images_path);
    const size_t n = out.count * out.rows * out.cols;
    std::vector<unsigned char> raw(n);
    is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n)
      throw FormatError(images_path + ": truncated at byte " +
                        std::to_string(offset + static_cast<size_t>(is.gcount())) +
                        " (want " + std::to_string(n) + " pixel bytes)");
    out.pixels.resize(n);
    for (size_t i = 0; i < n; ++i) out.pixels[i] = raw[i] / 255.0;
  }
  {
    std::ifstream is(labels_path, std::ios::binary);
    if (!is) throw Error("cannot open: " + labels_path);
    size_t offset = 0;
    const uint32_t magic = read_be32(is, offset, labels_path);
    if (magic != 0x00000801u)
      throw FormatError(labels_path + ": bad magic at byte 0 (want 0x00000801)");
    const uint32_t n = read_be32(is, offset, labels_path);
    if (n != out.count)
      throw FormatError(labels_path + ": label count " + std::to_string(n) +
                        " != image count " + std::to_string(out.count));
    std::vector<unsigned char> raw(n);
    is.read(reinterpret_cast<char*>(raw.data()), n);
    if (static_cast<size_t>(is.gcount()) != n)
      throw FormatError(labels_path + ": truncated at byte " +
                        std::to_string(offset + static_cast<size_t>(is.gcount())));
    out.labels.assign(raw.begin(), raw.end());
  }
  return out;
}

void write_idx_images(const std::string& path, size_t count, size_t rows,
                      size_t cols, const std::vector<uint8_t>& pixels) {
  if (pixels.size() != count * rows * cols)
    throw ArgumentError("pixel buffer does not match dims");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for write: " + path);
  write_be32(os, 0x00000803u);
  write_be32(os, static_cast<uint32_t>(count));
  write_be32(os, static_cast<uint32_t>(rows));
  write_be32(os, static_cast<uint32_t>(cols));
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
}

void write_idx_labels(const std::string& path, const std::vector<uint8_t>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for write: " + path);
  write_be32(os, 0x00000801u);
  write_be32(os, static_cast<uint32_t>(labels.size()));
  os.write(reinterpret_cast<const char*>(labels.data()),
           static_cast<std::streamsize>(labels.size()));
}

namespace {

// 5x7 bitmap font for digits 0-9, one byte per row, low 5 bits used.
const uint8_t kGlyphs[10][7] = {
    {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e},  // 0
    {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e},  // 1
    {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f},  // 2
    {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e},  // 3
    {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02},  // 4
    {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e},  // 5
    {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e},  // 6
    {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},  // 7
    {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e},  // 8
    {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c},  // 9
};

}  // namespace

void write_synth_digit_idx(const std::string& images_path,
                           const std::string& labels_path, size_t count,
                           uint64_t seed) {
  const size_t R = 28, C = 28;
  Rng rng(seed);
  std::vector<uint8_t> pixels(count * R * C, 0);
  std::vector<uint8_t> labels(count);
  for (size_t i = 0; i < count; ++i) {
    const int digit = static_cast<int>(rng.index(10));
    labels[i] = static_cast<uint8_t>(digit);
    uint8_t* img = pixels.data() + i * R * C;
    // scale the 5x7 glyph by 3 -> 15x21 block, place with a random offset
    const int sx = 3 + static_cast<int>(rng.index(8));   // col offset 3..10
    const int sy = 2 + static_cast<int>(rng.index(5));   // row offset 2..6
    const double intensity = rng.uniform(0.65, 1.0);
    for (int gy = 0; gy < 7; ++gy)
      for (int gx = 0; gx < 5; ++gx) {
        if (!((kGlyphs[digit][gy] >> (4 - gx)) & 1)) continue;
        for (int dy = 0; dy < 3; ++dy)
          for (int dx = 0; dx < 3; ++dx) {
            const int y = sy + gy * 3 + dy, x = sx + gx * 3 + dx;
            const double v = intensity * rng.uniform(0.8, 1.0);
            img[y * static_cast<int>(C) + x] =
                static_cast<uint8_t>(std::min(255.0, v * 255.0));
          }
      }
    // light background noise
    for (size_t p = 0; p < R * C; ++p) {
      const double noise = rng.uniform(0.0, 0.12) * 255.0;
      img[p] = static_cast<uint8_t>(std::min(255.0, img[p] + noise));
    }
  }
  write_idx_images(images_path, count, R, C, pixels);
  write_idx_labels(labels_path, labels);
}

Dataset to_dataset(const ImageDataset& im, size_t limit) {
  Dataset d;
  d.x_shape = {1, im.rows, im.cols};
  const size_t n = limit == 0 ? im.count : std::min(limit, im.count);
  d.xs.assign(im.pixels.begin(),
              im.pixels.begin() + static_cast<long>(n * im.rows * im.cols));
  d.labels.assign(im.labels.begin(), im.labels.begin() + static_cast<long>(n));
  return d;
}

}  // namespace splinelab
