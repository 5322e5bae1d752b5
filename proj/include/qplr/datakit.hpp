#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qplr/neural.hpp"

namespace qplr::datakit {

/// Grayscale image set. Pixels are stored row-major per image, scaled to
/// [0, 1] on load; unclamped noise may push corrupted copies outside that
/// range, which the corrupted flag records.
struct ImageDataset {
    int rows = 0;
    int cols = 0;
    std::vector<float> pixels; // [N * rows * cols]
    std::vector<int> labels;
    std::string name;
    std::string split;
    bool corrupted = false;

    std::size_t size() const { return labels.size(); }
    std::size_t pixels_per_image() const {
        return static_cast<std::size_t>(rows) * cols;
    }
    std::span<const float> image(std::size_t i) const {
        return {pixels.data() + i * pixels_per_image(), pixels_per_image()};
    }
    /// FNV-1a over one image's pixel bytes; keys per-image RNG streams so
    /// derived randomness is independent of dataset order.
    std::uint64_t content_hash(std::size_t i) const;
};

struct CorruptionSpec {
    double gaussian_std = 0.0;
    double rotation_degrees = 0.0;
    bool clamp = true;

    nlohmann::json to_json() const;
    static CorruptionSpec from_json(const nlohmann::json &j);
};

/// Reads an IDX image/label pair (big-endian headers, magic 0x803/0x801).
/// Transparently accepts gzip-compressed files.
ImageDataset load_idx(const std::string &images_path,
                      const std::string &labels_path);

/// Resolves the canonical file names for a split ("train" or "test") under
/// dir, accepting .gz variants.
ImageDataset load_mnist_split(const std::string &dir, const std::string &split);

/// pixel' = pixel + N(0, std^2), clamped to [0, 1] when clamp is set.
/// Per-image noise streams are derived from seed and the image index.
ImageDataset add_gaussian_noise(const ImageDataset &ds, double std_dev,
                                std::uint64_t seed, bool clamp = true);

/// Rotation about the image center, bilinear interpolation, zero fill.
/// Positive angles turn the content counterclockwise on screen.
ImageDataset rotate(const ImageDataset &ds, double degrees);

/// Applies a full corruption spec: rotation first, then noise.
ImageDataset corrupt(const ImageDataset &ds, const CorruptionSpec &spec,
                     std::uint64_t seed);

/// Toy dataset: each class is a bright rectangular patch at a
/// class-specific location plus small noise; linearly separable. Sample i
/// belongs to class i mod num_classes so every prefix is balanced.
ImageDataset synthetic_blobs(int num_classes, int samples_per_class,
                             int image_size, std::uint64_t seed);

/// First count samples in stored order.
ImageDataset subset(const ImageDataset &ds, std::size_t count);

/// Writes the images back out as an IDX pair (debug dumps of corrupted
/// sets); pixels are clamped to [0,1] and quantized to bytes.
void dump_idx(const ImageDataset &ds, const std::string &images_path,
              const std::string &labels_path);

/// [B, 1, rows, cols] tensor for convolutional models.
neural::Tensor image_batch(const ImageDataset &ds, std::span<const int> idx);
/// [B, rows*cols] tensor for dense models.
neural::Tensor flat_batch(const ImageDataset &ds, std::span<const int> idx);

} // namespace qplr::datakit
