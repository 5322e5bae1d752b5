#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <vector>

#include "qplr/datakit.hpp"
#include "qplr/errors.hpp"
#include "qplr/neural.hpp"
#include "qplr/rng.hpp"

using namespace qplr;
using datakit::ImageDataset;

namespace {

std::string data_dir() {
    const char *env = std::getenv("QPLR_DATA_DIR");
    return env != nullptr ? env : "data/mnist";
}

} // namespace

TEST_CASE("mnist loads with canonical counts and ranges") {
    const ImageDataset train = datakit::load_mnist_split(data_dir(), "train");
    CHECK(train.size() == 60000);
    CHECK(train.rows == 28);
    CHECK(train.cols == 28);
    const std::vector<int> first10(train.labels.begin(),
                                   train.labels.begin() + 10);
    CHECK(first10 == std::vector<int>{5, 0, 4, 1, 9, 2, 1, 3, 1, 4});
    for (std::size_t i = 0; i < 10000; ++i) {
        CHECK(train.pixels[i] >= 0.0f);
        CHECK(train.pixels[i] <= 1.0f);
    }

    const ImageDataset test = datakit::load_mnist_split(data_dir(), "test");
    CHECK(test.size() == 10000);
}

TEST_CASE("idx loader rejects malformed files") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path();
    const fs::path bad_images = dir / "qplr_bad_images";
    const fs::path bad_labels = dir / "qplr_bad_labels";
    {
        std::ofstream f(bad_images, std::ios::binary);
        const char junk[] = "\x00\x00\x08\x99" "extra";
        f.write(junk, sizeof junk - 1);
        std::ofstream g(bad_labels, std::ios::binary);
        const char ljunk[] = "\x00\x00\x08\x01\x00\x00\x00\x01\x05";
        g.write(ljunk, sizeof ljunk - 1);
    }
    CHECK_THROWS_AS(datakit::load_idx(bad_images.string(),
                                      bad_labels.string()),
                    IngestionError);
    CHECK_THROWS_AS(datakit::load_idx((dir / "qplr_missing").string(),
                                      bad_labels.string()),
                    IngestionError);
    fs::remove(bad_images);
    fs::remove(bad_labels);
}

TEST_CASE("idx loader reports count mismatches") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path();
    const fs::path images = dir / "qplr_mismatch_images";
    const fs::path labels = dir / "qplr_mismatch_labels";
    {
        // 2 images of 2x2.
        std::ofstream f(images, std::ios::binary);
        const unsigned char header[] = {0, 0, 8, 3, 0, 0, 0, 2,
                                        0, 0, 0, 2, 0, 0, 0, 2};
        f.write(reinterpret_cast<const char *>(header), sizeof header);
        const unsigned char px[8] = {0, 64, 128, 255, 1, 2, 3, 4};
        f.write(reinterpret_cast<const char *>(px), sizeof px);
        // ... but 3 labels.
        std::ofstream g(labels, std::ios::binary);
        const unsigned char lheader[] = {0, 0, 8, 1, 0, 0, 0, 3};
        g.write(reinterpret_cast<const char *>(lheader), sizeof lheader);
        const unsigned char lb[3] = {0, 1, 0};
        g.write(reinterpret_cast<const char *>(lb), sizeof lb);
    }
    CHECK_THROWS_WITH_AS(
        datakit::load_idx(images.string(), labels.string()),
        doctest::Contains("count mismatch"), IngestionError);
    fs::remove(images);
    fs::remove(labels);
}

TEST_CASE("zero-std noise is the identity") {
    const ImageDataset blobs = datakit::synthetic_blobs(2, 5, 8, 3);
    const ImageDataset same = datakit::add_gaussian_noise(blobs, 0.0, 9);
    CHECK(same.pixels == blobs.pixels);
    CHECK_FALSE(same.corrupted);
}

TEST_CASE("gaussian noise has the requested moments before clamping") {
    // 1600 images of 28x28 > 1e6 pixels, constant 0.5 so the deltas are
    // exactly the noise draws.
    ImageDataset flat;
    flat.rows = flat.cols = 28;
    flat.labels.assign(1600, 0);
    flat.pixels.assign(1600 * 784, 0.5f);

    const ImageDataset noisy =
        datakit::add_gaussian_noise(flat, 0.3, 2024, /*clamp=*/false);
    CHECK(noisy.corrupted);
    const std::size_t n = noisy.pixels.size();
    REQUIRE(n >= 1000000);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = noisy.pixels[i] - flat.pixels[i];
        sum += d;
        sum_sq += d * d;
    }
    const double mean = sum / n;
    const double stddev = std::sqrt(sum_sq / n - mean * mean);
    // 5 sigma band for the mean of n draws of std 0.3.
    CHECK(std::abs(mean) < 5.0 * 0.3 / std::sqrt(static_cast<double>(n)));
    CHECK(stddev == doctest::Approx(0.3).epsilon(0.02));

    const ImageDataset again =
        datakit::add_gaussian_noise(flat, 0.3, 2024, false);
    CHECK(again.pixels == noisy.pixels);
    const ImageDataset other =
        datakit::add_gaussian_noise(flat, 0.3, 2025, false);
    CHECK(other.pixels != noisy.pixels);
}

TEST_CASE("clamped noise stays in pixel range") {
    const ImageDataset blobs = datakit::synthetic_blobs(2, 10, 8, 5);
    const ImageDataset noisy =
        datakit::add_gaussian_noise(blobs, 0.5, 11, /*clamp=*/true);
    for (float p : noisy.pixels) {
        CHECK(p >= 0.0f);
        CHECK(p <= 1.0f);
    }
}

TEST_CASE("rotation by zero and a full turn is the identity") {
    const ImageDataset blobs = datakit::synthetic_blobs(3, 4, 12, 7);
    const ImageDataset same = datakit::rotate(blobs, 0.0);
    CHECK(same.pixels == blobs.pixels);

    const ImageDataset full = datakit::rotate(blobs, 360.0);
    for (std::size_t i = 0; i < blobs.pixels.size(); ++i)
        CHECK(std::abs(full.pixels[i] - blobs.pixels[i]) < 1e-6);
}

TEST_CASE("quarter turn matches the hand-rotated 3x3 probe") {
    ImageDataset probe;
    probe.rows = probe.cols = 3;
    probe.labels = {0};
    probe.pixels = {0.1f, 0.2f, 0.3f,
                    0.4f, 0.5f, 0.6f,
                    0.7f, 0.8f, 0.9f};
    const ImageDataset turned = datakit::rotate(probe, 90.0);
    // Counterclockwise: the top row [1 2 3] becomes the left column read
    // bottom-to-top.
    const std::vector<float> want = {0.3f, 0.6f, 0.9f,
                                     0.2f, 0.5f, 0.8f,
                                     0.1f, 0.4f, 0.7f};
    for (int i = 0; i < 9; ++i)
        CHECK(turned.pixels[i] == doctest::Approx(want[i]).epsilon(1e-9));
}

TEST_CASE("combined corruption is pure in (spec, seed)") {
    const ImageDataset blobs = datakit::synthetic_blobs(4, 5, 10, 13);
    datakit::CorruptionSpec spec;
    spec.gaussian_std = 0.2;
    spec.rotation_degrees = 20.0;
    const ImageDataset a = datakit::corrupt(blobs, spec, 31);
    const ImageDataset b = datakit::corrupt(blobs, spec, 31);
    CHECK(a.pixels == b.pixels);
    CHECK(a.corrupted);

    const std::string json = spec.to_json().dump();
    const datakit::CorruptionSpec back =
        datakit::CorruptionSpec::from_json(nlohmann::json::parse(json));
    CHECK(back.to_json().dump() == json);
}

TEST_CASE("synthetic blobs are linearly separable") {
    const ImageDataset blobs = datakit::synthetic_blobs(2, 50, 8, 17);
    REQUIRE(blobs.size() == 100);
    for (float p : blobs.pixels) {
        CHECK(p >= 0.0f);
        CHECK(p <= 1.0f);
    }
    const ImageDataset blobs2 = datakit::synthetic_blobs(2, 50, 8, 17);
    CHECK(blobs2.pixels == blobs.pixels);

    // Logistic-regression oracle: a single dense layer must reach 100%.
    neural::Model lr = neural::make_mlp({64, 2}, 4242);
    neural::Adam opt(0.05);
    std::vector<int> all(blobs.size());
    std::iota(all.begin(), all.end(), 0);
    const neural::Tensor x = datakit::flat_batch(blobs, all);
    const neural::Tensor y = neural::one_hot_batch(blobs.labels, 2);
    for (int step = 0; step < 100; ++step) {
        lr.zero_grad();
        const neural::Tensor logits = lr.forward(x, true);
        const auto lg = neural::softmax_cross_entropy(logits, y);
        lr.backward(lg.dlogits);
        opt.step(lr.parameters());
    }
    const neural::Tensor logits = lr.forward(x, false);
    int correct = 0;
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        const std::span<const double> row(logits.data.data() + i * 2, 2);
        if (neural::argmax(row) == blobs.labels[i]) ++correct;
    }
    CHECK(correct == 100);
}

TEST_CASE("subset keeps the leading samples") {
    const ImageDataset blobs = datakit::synthetic_blobs(2, 10, 6, 19);
    const ImageDataset head = datakit::subset(blobs, 7);
    CHECK(head.size() == 7);
    CHECK(std::equal(head.pixels.begin(), head.pixels.end(),
                     blobs.pixels.begin()));
    CHECK_THROWS_AS(datakit::subset(head, 100), ConfigError);
}

TEST_CASE("content hash distinguishes images and ignores order") {
    const ImageDataset blobs = datakit::synthetic_blobs(3, 5, 8, 23);
    CHECK(blobs.content_hash(0) != blobs.content_hash(1));
    const ImageDataset tail = datakit::subset(blobs, 10);
    CHECK(blobs.content_hash(4) == tail.content_hash(4));
}

TEST_CASE("idx dump round-trips within quantization error") {
    namespace fs = std::filesystem;
    const ImageDataset blobs = datakit::synthetic_blobs(2, 6, 8, 29);
    const fs::path dir = fs::temp_directory_path();
    const std::string images = (dir / "qplr_dump_images").string();
    const std::string labels = (dir / "qplr_dump_labels").string();
    datakit::dump_idx(blobs, images, labels);
    const ImageDataset back = datakit::load_idx(images, labels);
    CHECK(back.labels == blobs.labels);
    REQUIRE(back.pixels.size() == blobs.pixels.size());
    for (std::size_t i = 0; i < back.pixels.size(); ++i)
        CHECK(std::abs(back.pixels[i] - blobs.pixels[i]) <= 0.5f / 255.0f);
    fs::remove(images);
    fs::remove(labels);
}

TEST_CASE("batch tensors have model-facing shapes") {
    const ImageDataset blobs = datakit::synthetic_blobs(2, 4, 8, 31);
    const std::vector<int> idx{0, 3, 5};
    const neural::Tensor conv = datakit::image_batch(blobs, idx);
    CHECK(conv.shape == std::vector<int>{3, 1, 8, 8});
    const neural::Tensor flat = datakit::flat_batch(blobs, idx);
    CHECK(flat.shape == std::vector<int>{3, 64});
    CHECK(flat.data == conv.data);
    CHECK(flat.data[0] == doctest::Approx(blobs.pixels[0]));
}
