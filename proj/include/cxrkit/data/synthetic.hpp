#pragma once

#include <cstdint>
#include <filesystem>

namespace cxrkit::data {

// Writes a small self-contained dataset in the NIH directory layout
// (Data_Entry_2017.csv, train_val_list.txt, test_list.txt, images/).
// Each finding is rendered as a bright square in a class-specific cell of
// a 4x4 grid over noise, so labels are recoverable from pixels and short
// training runs can reach high AUC. Deterministic in (n_images, seed).
void generate_synthetic_fixture(const std::filesystem::path& root, int n_images = 64,
                                std::uint64_t seed = 7);

} // namespace cxrkit::data
