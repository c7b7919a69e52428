#include <cstdint>
#include <fstream>
#include <vector>

#include "coneflow/dataset.hpp"

namespace coneflow {

namespace {

constexpr uint32_t kImagesMagic = 0x00000803;
constexpr uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(f),
                                    std::istreambuf_iterator<char>());
}

uint32_t be32(const std::vector<unsigned char>& b, std::size_t off,
              const std::string& path) {
  if (off + 4 > b.size()) {
    throw FormatError(path + ": truncated, expected 4 bytes at offset " +
                      std::to_string(off) + ", file has " +
                      std::to_string(b.size()));
  }
  return (uint32_t(b[off]) << 24) | (uint32_t(b[off + 1]) << 16) |
         (uint32_t(b[off + 2]) << 8) | uint32_t(b[off + 3]);
}

std::string hex32(uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 int digit_pos, int digit_neg, int max_per_class) {
  if (digit_pos == digit_neg) {
    throw PreconditionError("digit_pos and digit_neg must differ");
  }
  if (digit_pos < 0 || digit_pos > 9 || digit_neg < 0 || digit_neg > 9) {
    throw PreconditionError("digits must be in 0..9");
  }
  if (max_per_class < 0) throw PreconditionError("max_per_class must be >= 0");

  const auto img = read_all(images_path);
  const auto lab = read_all(labels_path);

  const uint32_t im = be32(img, 0, images_path);
  if (im != kImagesMagic) {
    throw FormatError(images_path + ": bad magic " + hex32(im) +
                      " at byte 0, expected " + hex32(kImagesMagic));
  }
  const uint32_t lm = be32(lab, 0, labels_path);
  if (lm != kLabelsMagic) {
    throw FormatError(labels_path + ": bad magic " + hex32(lm) +
                      " at byte 0, expected " + hex32(kLabelsMagic));
  }
  const uint32_t n_img = be32(img, 4, images_path);
  const uint32_t rows = be32(img, 8, images_path);
  const uint32_t cols = be32(img, 12, images_path);
  const uint32_t n_lab = be32(lab, 4, labels_path);
  if (n_img != n_lab) {
    throw FormatError("record count mismatch: " + images_path + " has " +
                      std::to_string(n_img) + " images, " + labels_path +
                      " has " + std::to_string(n_lab) + " labels");
  }
  const std::size_t pix = std::size_t(rows) * cols;
  if (pix == 0) throw FormatError(images_path + ": zero image dimensions");
  const std::size_t need_img = 16 + pix * n_img;
  if (img.size() < need_img) {
    throw FormatError(images_path + ": truncated, expected " +
                      std::to_string(need_img - 16) +
                      " bytes of pixel data at offset 16, found " +
                      std::to_string(img.size() - 16));
  }
  const std::size_t need_lab = 8 + std::size_t(n_lab);
  if (lab.size() < need_lab) {
    throw FormatError(labels_path + ": truncated, expected " +
                      std::to_string(std::size_t(n_lab)) +
                      " bytes of label data at offset 8, found " +
                      std::to_string(lab.size() - 8));
  }

  std::vector<LabeledPoint> pts;
  int kept_pos = 0, kept_neg = 0;
  bool seen_pos = false, seen_neg = false;
  for (uint32_t r = 0; r < n_img; ++r) {
    const int label = lab[8 + r];
    if (label > 9) {
      throw FormatError(labels_path + ": label value " + std::to_string(label) +
                        " at byte " + std::to_string(8 + r));
    }
    int y = 0;
    if (label == digit_pos) {
      seen_pos = true;
      if (kept_pos >= max_per_class) continue;
      ++kept_pos;
      y = 1;
    } else if (label == digit_neg) {
      seen_neg = true;
      if (kept_neg >= max_per_class) continue;
      ++kept_neg;
      y = -1;
    } else {
      continue;
    }
    LabeledPoint p;
    p.y = y;
    p.x.resize(static_cast<int>(pix));
    const std::size_t off = 16 + pix * r;
    for (std::size_t k = 0; k < pix; ++k) {
      p.x[static_cast<int>(k)] = static_cast<double>(img[off + k]) / 255.0;
    }
    pts.push_back(std::move(p));
  }
  if (!seen_pos) {
    throw FormatError(images_path + ": digit " + std::to_string(digit_pos) +
                      " not present in the label file");
  }
  if (!seen_neg) {
    throw FormatError(images_path + ": digit " + std::to_string(digit_neg) +
                      " not present in the label file");
  }
  return Dataset::build(std::move(pts));  // empty when max_per_class == 0
}

}  // namespace coneflow
