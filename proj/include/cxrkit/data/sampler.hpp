#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cxrkit/data/manifest.hpp"

namespace cxrkit::data {

struct FewShotSubset {
    int n_shots = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> record_ids;  // sorted, unique
    std::array<std::int64_t, kNumClasses> per_class_positives{};
    std::vector<std::string> skipped_classes;  // zero positives in the pool

    bool contains(std::string_view id) const;
};

// Per class, uniformly samples min(n_shots, available) positive records
// without replacement and unions the picks; an image positive for several
// classes counts toward each, so per-class positives can exceed n_shots.
FewShotSubset sample_few_shot(const DatasetManifest& pool, int n_shots, std::uint64_t seed);

// One id per line, plus a JSON sidecar (n_shots, seed, per-class counts).
void write_subset(const FewShotSubset& subset,
                  const std::filesystem::path& ids_path,
                  const std::filesystem::path& sidecar_path);

DatasetManifest restrict_to_subset(const DatasetManifest& manifest, const FewShotSubset& subset);

} // namespace cxrkit::data
