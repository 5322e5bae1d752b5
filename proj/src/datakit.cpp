#include "qplr/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <zlib.h>

#include "qplr/errors.hpp"
#include "qplr/rng.hpp"

namespace qplr::datakit {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

/// Reads a whole file through zlib, which passes uncompressed bytes through
/// unchanged, so both raw and .gz IDX files work.
std::vector<unsigned char> read_file(const std::string &path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) throw IngestionError("cannot open file: " + path);
    std::vector<unsigned char> bytes;
    unsigned char buf[1 << 16];
    int got = 0;
    while ((got = gzread(f, buf, sizeof buf)) > 0)
        bytes.insert(bytes.end(), buf, buf + got);
    const bool failed = got < 0;
    gzclose(f);
    if (failed) throw IngestionError("decompression failed: " + path);
    return bytes;
}

std::uint32_t read_be_u32(const std::vector<unsigned char> &bytes,
                          std::size_t offset, const std::string &what) {
    if (offset + 4 > bytes.size())
        throw IngestionError("truncated header reading " + what);
    return (std::uint32_t(bytes[offset]) << 24) |
           (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) |
           std::uint32_t(bytes[offset + 3]);
}

void write_be_u32(std::ofstream &out, std::uint32_t v) {
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(v >> 24),
        static_cast<unsigned char>(v >> 16),
        static_cast<unsigned char>(v >> 8),
        static_cast<unsigned char>(v),
    };
    out.write(reinterpret_cast<const char *>(bytes), 4);
}

std::string resolve_existing(const std::string &dir, const std::string &name) {
    namespace fs = std::filesystem;
    const fs::path plain = fs::path(dir) / name;
    if (fs::exists(plain)) return plain.string();
    const fs::path gz = fs::path(dir) / (name + ".gz");
    if (fs::exists(gz)) return gz.string();
    throw IngestionError("missing dataset file: " + plain.string() +
                         " (also tried .gz)");
}

} // namespace

std::uint64_t ImageDataset::content_hash(std::size_t i) const {
    const std::span<const float> img = image(i);
    return rng::fnv1a64(img.data(), img.size() * sizeof(float));
}

nlohmann::json CorruptionSpec::to_json() const {
    return {{"gaussian_std", gaussian_std},
            {"rotation_degrees", rotation_degrees},
            {"clamp", clamp}};
}

CorruptionSpec CorruptionSpec::from_json(const nlohmann::json &j) {
    CorruptionSpec spec;
    try {
        spec.gaussian_std = j.value("gaussian_std", 0.0);
        spec.rotation_degrees = j.value("rotation_degrees", 0.0);
        spec.clamp = j.value("clamp", true);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("malformed corruption spec: ") +
                          e.what());
    }
    if (spec.gaussian_std < 0.0)
        throw ConfigError("gaussian_std must be >= 0");
    return spec;
}

ImageDataset load_idx(const std::string &images_path,
                      const std::string &labels_path) {
    const auto img_bytes = read_file(images_path);
    const auto lbl_bytes = read_file(labels_path);

    if (read_be_u32(img_bytes, 0, "images magic") != kImagesMagic)
        throw IngestionError("images magic mismatch in " + images_path);
    if (read_be_u32(lbl_bytes, 0, "labels magic") != kLabelsMagic)
        throw IngestionError("labels magic mismatch in " + labels_path);

    const std::uint32_t n_images = read_be_u32(img_bytes, 4, "image count");
    const std::uint32_t rows = read_be_u32(img_bytes, 8, "image rows");
    const std::uint32_t cols = read_be_u32(img_bytes, 12, "image cols");
    const std::uint32_t n_labels = read_be_u32(lbl_bytes, 4, "label count");

    if (n_images != n_labels)
        throw IngestionError("count mismatch: " + std::to_string(n_images) +
                             " images vs " + std::to_string(n_labels) +
                             " labels");
    const std::size_t pixel_count =
        std::size_t(n_images) * rows * cols;
    if (img_bytes.size() != 16 + pixel_count)
        throw IngestionError("truncated image payload in " + images_path);
    if (lbl_bytes.size() != 8 + n_labels)
        throw IngestionError("truncated label payload in " + labels_path);

    ImageDataset ds;
    ds.rows = static_cast<int>(rows);
    ds.cols = static_cast<int>(cols);
    ds.pixels.resize(pixel_count);
    for (std::size_t i = 0; i < pixel_count; ++i)
        ds.pixels[i] = static_cast<float>(img_bytes[16 + i]) / 255.0f;
    ds.labels.resize(n_labels);
    for (std::size_t i = 0; i < n_labels; ++i)
        ds.labels[i] = lbl_bytes[8 + i];
    return ds;
}

ImageDataset load_mnist_split(const std::string &dir,
                              const std::string &split) {
    std::string img_name, lbl_name;
    if (split == "train") {
        img_name = "train-images-idx3-ubyte";
        lbl_name = "train-labels-idx1-ubyte";
    } else if (split == "test") {
        img_name = "t10k-images-idx3-ubyte";
        lbl_name = "t10k-labels-idx1-ubyte";
    } else {
        throw ConfigError("split must be 'train' or 'test', got " + split);
    }
    ImageDataset ds = load_idx(resolve_existing(dir, img_name),
                               resolve_existing(dir, lbl_name));
    ds.name = std::filesystem::path(dir).filename().string();
    ds.split = split;
    return ds;
}

ImageDataset add_gaussian_noise(const ImageDataset &ds, double std_dev,
                                std::uint64_t seed, bool clamp) {
    if (std_dev < 0.0) throw ConfigError("noise std must be >= 0");
    ImageDataset out = ds;
    if (std_dev == 0.0) return out;
    out.corrupted = true;
    const std::size_t ppi = ds.pixels_per_image();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        rng::Stream noise(rng::derive_seed(seed, "noise", i));
        float *img = out.pixels.data() + i * ppi;
        for (std::size_t p = 0; p < ppi; ++p) {
            double v = img[p] + std_dev * noise.next_normal();
            if (clamp) v = std::clamp(v, 0.0, 1.0);
            img[p] = static_cast<float>(v);
        }
    }
    return out;
}

ImageDataset rotate(const ImageDataset &ds, double degrees) {
    ImageDataset out = ds;
    if (degrees == 0.0) return out;
    out.corrupted = true;
    const double rad = degrees * kPi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const int rows = ds.rows, cols = ds.cols;
    const double cy = (rows - 1) / 2.0, cx = (cols - 1) / 2.0;
    const std::size_t ppi = ds.pixels_per_image();

    for (std::size_t i = 0; i < ds.size(); ++i) {
        const float *src = ds.pixels.data() + i * ppi;
        float *dst = out.pixels.data() + i * ppi;
        auto sample = [&](int r, int col) -> double {
            if (r < 0 || r >= rows || col < 0 || col >= cols) return 0.0;
            return src[static_cast<std::size_t>(r) * cols + col];
        };
        for (int r = 0; r < rows; ++r) {
            for (int col = 0; col < cols; ++col) {
                // Inverse map: where in the source does this output pixel
                // come from.
                const double dx = col - cx, dy = r - cy;
                const double src_c = c * dx - s * dy + cx;
                const double src_r = s * dx + c * dy + cy;
                const int r0 = static_cast<int>(std::floor(src_r));
                const int c0 = static_cast<int>(std::floor(src_c));
                const double fr = src_r - r0, fc = src_c - c0;
                const double v =
                    (1 - fr) * ((1 - fc) * sample(r0, c0) +
                                fc * sample(r0, c0 + 1)) +
                    fr * ((1 - fc) * sample(r0 + 1, c0) +
                          fc * sample(r0 + 1, c0 + 1));
                dst[static_cast<std::size_t>(r) * cols + col] =
                    static_cast<float>(v);
            }
        }
    }
    return out;
}

ImageDataset corrupt(const ImageDataset &ds, const CorruptionSpec &spec,
                     std::uint64_t seed) {
    ImageDataset out =
        spec.rotation_degrees != 0.0 ? rotate(ds, spec.rotation_degrees) : ds;
    if (spec.gaussian_std > 0.0)
        out = add_gaussian_noise(out, spec.gaussian_std, seed, spec.clamp);
    return out;
}

ImageDataset synthetic_blobs(int num_classes, int samples_per_class,
                             int image_size, std::uint64_t seed) {
    if (num_classes < 1 || samples_per_class < 1 || image_size < 1)
        throw ConfigError("synthetic_blobs parameters must be >= 1");
    // Class k's template: a bright patch in cell k of a grid_dim x grid_dim
    // layout. Disjoint patches keep classes linearly separable.
    int grid_dim = 1;
    while (grid_dim * grid_dim < num_classes) ++grid_dim;
    const int cell = std::max(1, image_size / grid_dim);
    const int patch = std::max(1, cell / 2 + (cell > 1 ? 1 : 0));

    ImageDataset ds;
    ds.rows = ds.cols = image_size;
    ds.name = "synthetic_blobs";
    ds.split = "train";
    const int total = num_classes * samples_per_class;
    ds.labels.resize(total);
    ds.pixels.assign(static_cast<std::size_t>(total) * image_size * image_size,
                     0.0f);
    const std::size_t ppi = ds.pixels_per_image();

    for (int i = 0; i < total; ++i) {
        const int klass = i % num_classes;
        ds.labels[i] = klass;
        rng::Stream noise(rng::derive_seed(seed, "blob", i));
        float *img = ds.pixels.data() + static_cast<std::size_t>(i) * ppi;
        const int r_base = std::min((klass / grid_dim) * cell,
                                    image_size - patch);
        const int c_base = std::min((klass % grid_dim) * cell,
                                    image_size - patch);
        for (int r = 0; r < patch; ++r)
            for (int c = 0; c < patch; ++c)
                img[static_cast<std::size_t>(r_base + r) * image_size +
                    (c_base + c)] = 0.9f;
        for (std::size_t p = 0; p < ppi; ++p) {
            const double v = img[p] + 0.05 * noise.next_normal();
            img[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return ds;
}

ImageDataset subset(const ImageDataset &ds, std::size_t count) {
    if (count > ds.size())
        throw ConfigError("subset of " + std::to_string(count) +
                          " from a dataset of " + std::to_string(ds.size()));
    ImageDataset out;
    out.rows = ds.rows;
    out.cols = ds.cols;
    out.name = ds.name;
    out.split = ds.split;
    out.corrupted = ds.corrupted;
    out.pixels.assign(ds.pixels.begin(),
                      ds.pixels.begin() +
                          static_cast<std::ptrdiff_t>(count *
                                                      ds.pixels_per_image()));
    out.labels.assign(ds.labels.begin(),
                      ds.labels.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
}

void dump_idx(const ImageDataset &ds, const std::string &images_path,
              const std::string &labels_path) {
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw IngestionError("cannot write " + images_path);
    write_be_u32(img, kImagesMagic);
    write_be_u32(img, static_cast<std::uint32_t>(ds.size()));
    write_be_u32(img, static_cast<std::uint32_t>(ds.rows));
    write_be_u32(img, static_cast<std::uint32_t>(ds.cols));
    for (float p : ds.pixels) {
        const double clamped = std::clamp(static_cast<double>(p), 0.0, 1.0);
        const unsigned char byte =
            static_cast<unsigned char>(std::lround(clamped * 255.0));
        img.write(reinterpret_cast<const char *>(&byte), 1);
    }
    std::ofstream lbl(labels_path, std::ios::binary);
    if (!lbl) throw IngestionError("cannot write " + labels_path);
    write_be_u32(lbl, kLabelsMagic);
    write_be_u32(lbl, static_cast<std::uint32_t>(ds.size()));
    for (int label : ds.labels) {
        const unsigned char byte = static_cast<unsigned char>(label);
        lbl.write(reinterpret_cast<const char *>(&byte), 1);
    }
}

neural::Tensor image_batch(const ImageDataset &ds, std::span<const int> idx) {
    neural::Tensor t = neural::Tensor::zeros(
        {static_cast<int>(idx.size()), 1, ds.rows, ds.cols});
    const std::size_t ppi = ds.pixels_per_image();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::span<const float> img =
            ds.image(static_cast<std::size_t>(idx[i]));
        double *dst = t.data.data() + i * ppi;
        for (std::size_t p = 0; p < ppi; ++p) dst[p] = img[p];
    }
    return t;
}

neural::Tensor flat_batch(const ImageDataset &ds, std::span<const int> idx) {
    neural::Tensor t = image_batch(ds, idx);
    t.shape = {static_cast<int>(idx.size()),
               static_cast<int>(ds.pixels_per_image())};
    return t;
}

} // namespace qplr::datakit
