#include "cxrkit/data/synthetic.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cxrkit/common.hpp"
#include "cxrkit/data/image.hpp"
#include "cxrkit/data/labels.hpp"
#include "cxrkit/data/png_io.hpp"
#include "cxrkit/rng.hpp"

namespace cxrkit::data {

namespace {

constexpr int kSide = 64;
constexpr int kCell = 16;  // 4x4 grid of candidate finding positions

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError(path.string() + ": cannot open for writing");
    }
    out << content;
}

} // namespace

void generate_synthetic_fixture(const std::filesystem::path& root, int n_images,
                                std::uint64_t seed) {
    if (n_images < 1) {
        throw std::invalid_argument("generate_synthetic_fixture: n_images must be >= 1");
    }
    std::filesystem::create_directories(root / "images");

    std::string csv = "Image Index,Finding Labels,Patient ID,View Position\n";
    std::string train_val_list;
    std::string test_list;
    const int train_val_count = n_images * 5 / 8;

    for (int i = 0; i < n_images; ++i) {
        char id[32];
        std::snprintf(id, sizeof(id), "synth_%03d.png", i);
        char patient[16];
        std::snprintf(patient, sizeof(patient), "P%04d", i / 2);

        // Every 16th image is finding-free; otherwise one primary finding,
        // with a second one on every 5th image.
        std::vector<int> classes;
        if (i % 16 != 15) {
            const int primary = i % kNumClasses;
            classes.push_back(primary);
            if (i % 5 == 0) {
                classes.push_back((primary + 3) % kNumClasses);
            }
        }

        std::string label_field;
        if (classes.empty()) {
            label_field = "No Finding";
        } else {
            for (std::size_t k = 0; k < classes.size(); ++k) {
                if (k > 0) label_field += '|';
                label_field += disease_names()[static_cast<std::size_t>(classes[k])];
            }
        }

        Image image = Image::zeros(1, kSide, kSide);
        Rng rng(derive_seed(seed, "fixture", i));
        for (float& v : image.data) {
            v = static_cast<float>(rng.uniform(0.15, 0.35));
        }
        for (int c : classes) {
            const int y0 = (c / 4) * kCell;
            const int x0 = (c % 4) * kCell;
            for (int y = y0; y < y0 + kCell; ++y) {
                for (int x = x0; x < x0 + kCell; ++x) {
                    image.at(0, y, x) = static_cast<float>(rng.uniform(0.85, 0.95));
                }
            }
        }
        write_png(root / "images" / id, image);

        csv += std::string(id) + "," + label_field + "," + patient + ",PA\n";
        ((i < train_val_count) ? train_val_list : test_list) += std::string(id) + "\n";
    }

    write_text(root / "Data_Entry_2017.csv", csv);
    write_text(root / "train_val_list.txt", train_val_list);
    write_text(root / "test_list.txt", test_list);
}

} // namespace cxrkit::data
