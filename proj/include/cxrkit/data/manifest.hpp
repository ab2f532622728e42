#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cxrkit/data/labels.hpp"

namespace cxrkit::data {

enum class Split { train, val, test, unassigned };

std::string_view split_name(Split s);

struct StudyRecord {
    std::string image_id;
    std::string patient_id;
    std::array<std::uint8_t, kNumClasses> labels{};  // multi-hot; all-zero means no finding
    std::string view;
    Split split = Split::unassigned;

    bool positive(int cls) const { return labels[static_cast<std::size_t>(cls)] != 0; }
};

struct DatasetManifest {
    std::vector<StudyRecord> records;
    std::array<std::int64_t, kNumClasses> class_counts{};

    void recount();
    std::int64_t count(Split s) const;
};

// CSV with a header row; required columns "Image Index", "Finding Labels"
// (pipe-separated names or "No Finding") and "Patient ID". "View Position"
// is kept when present; other columns are ignored.
DatasetManifest parse_manifest(std::istream& csv);
DatasetManifest parse_manifest(const std::string& csv_text);
DatasetManifest load_manifest_file(const std::filesystem::path& path);

std::string manifest_to_csv(const DatasetManifest& manifest);

// One image filename per line.
std::vector<std::string> load_id_list(const std::filesystem::path& path);

// Marks test ids as test and partitions train_val ids into train/val by
// patient so no patient straddles the two; val receives ~val_fraction of
// the patients. Ids absent from both lists become unassigned.
void assign_splits(DatasetManifest& manifest,
                   const std::vector<std::string>& train_val_ids,
                   const std::vector<std::string>& test_ids,
                   double val_fraction,
                   std::uint64_t seed);

DatasetManifest restrict_to_split(const DatasetManifest& manifest, Split s);

} // namespace cxrkit::data
