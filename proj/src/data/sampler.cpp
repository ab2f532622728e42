#include "cxrkit/data/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "cxrkit/common.hpp"
#include "cxrkit/rng.hpp"

namespace cxrkit::data {

bool FewShotSubset::contains(std::string_view id) const {
    return std::binary_search(record_ids.begin(), record_ids.end(), id);
}

FewShotSubset sample_few_shot(const DatasetManifest& pool, int n_shots, std::uint64_t seed) {
    if (n_shots < 1) {
        throw std::invalid_argument("n_shots must be >= 1");
    }
    if (pool.records.empty()) {
        throw DataError("few-shot sampling pool is empty");
    }
    FewShotSubset subset;
    subset.n_shots = n_shots;
    subset.seed = seed;

    std::set<std::string> chosen;
    Rng rng(derive_seed(seed, "few_shot_sampler"));
    for (int c = 0; c < kNumClasses; ++c) {
        std::vector<const StudyRecord*> positives;
        for (const StudyRecord& r : pool.records) {
            if (r.positive(c)) positives.push_back(&r);
        }
        if (positives.empty()) {
            subset.skipped_classes.push_back(disease_names()[static_cast<std::size_t>(c)]);
            continue;
        }
        const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n_shots),
                                                       positives.size());
        // Partial Fisher-Yates: first `take` entries are a uniform draw
        // without replacement.
        for (std::size_t i = 0; i < take; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng.uniform_int(positives.size() - i));
            std::swap(positives[i], positives[j]);
            chosen.insert(positives[i]->image_id);
        }
    }
    subset.record_ids.assign(chosen.begin(), chosen.end());
    for (const StudyRecord& r : pool.records) {
        if (!subset.contains(r.image_id)) continue;
        for (int c = 0; c < kNumClasses; ++c) {
            subset.per_class_positives[static_cast<std::size_t>(c)] += r.labels[static_cast<std::size_t>(c)];
        }
    }
    return subset;
}

void write_subset(const FewShotSubset& subset,
                  const std::filesystem::path& ids_path,
                  const std::filesystem::path& sidecar_path) {
    std::ofstream ids(ids_path);
    if (!ids) throw DataError("cannot write subset id list: " + ids_path.string());
    for (const std::string& id : subset.record_ids) {
        ids << id << '\n';
    }
    nlohmann::json counts;
    for (int c = 0; c < kNumClasses; ++c) {
        counts[disease_names()[static_cast<std::size_t>(c)]] =
            subset.per_class_positives[static_cast<std::size_t>(c)];
    }
    const nlohmann::json sidecar = {
        {"n_shots", subset.n_shots},
        {"seed", subset.seed},
        {"num_records", subset.record_ids.size()},
        {"per_class_positives", counts},
        {"skipped_classes", subset.skipped_classes},
    };
    std::ofstream side(sidecar_path);
    if (!side) throw DataError("cannot write subset sidecar: " + sidecar_path.string());
    side << sidecar.dump(2) << '\n';
}

DatasetManifest restrict_to_subset(const DatasetManifest& manifest, const FewShotSubset& subset) {
    DatasetManifest out;
    for (const StudyRecord& r : manifest.records) {
        if (subset.contains(r.image_id)) out.records.push_back(r);
    }
    out.recount();
    return out;
}

} // namespace cxrkit::data
