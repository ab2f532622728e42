#include "cxrkit/data/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cxrkit/common.hpp"
#include "cxrkit/rng.hpp"

namespace cxrkit::data {

namespace {

// Minimal CSV line split with support for double-quoted fields.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::array<std::uint8_t, kNumClasses> parse_finding_labels(const std::string& field, int line_no) {
    std::array<std::uint8_t, kNumClasses> labels{};
    const std::string text = trim(field);
    if (text == "No Finding") {
        return labels;
    }
    for (const std::string& raw : split(text, '|')) {
        const std::string token = trim(raw);
        const auto idx = disease_index(token);
        if (!idx) {
            throw DataError("line " + std::to_string(line_no) + ": unknown finding token \"" +
                            token + "\"");
        }
        labels[static_cast<std::size_t>(*idx)] = 1;
    }
    return labels;
}

} // namespace

std::string_view split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::unassigned: return "unassigned";
    }
    return "unassigned";
}

void DatasetManifest::recount() {
    class_counts.fill(0);
    for (const StudyRecord& r : records) {
        for (int c = 0; c < kNumClasses; ++c) {
            class_counts[static_cast<std::size_t>(c)] += r.labels[static_cast<std::size_t>(c)];
        }
    }
}

std::int64_t DatasetManifest::count(Split s) const {
    return std::count_if(records.begin(), records.end(),
                         [s](const StudyRecord& r) { return r.split == s; });
}

DatasetManifest parse_manifest(std::istream& csv) {
    std::string header_line;
    if (!std::getline(csv, header_line)) {
        throw DataError("manifest CSV is empty");
    }
    const std::vector<std::string> header = split_csv_line(header_line);
    auto column = [&header](std::string_view name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return static_cast<int>(i);
        }
        return -1;
    };
    const int col_image = column("Image Index");
    const int col_labels = column("Finding Labels");
    const int col_patient = column("Patient ID");
    const int col_view = column("View Position");
    std::string missing;
    if (col_image < 0) missing += " \"Image Index\"";
    if (col_labels < 0) missing += " \"Finding Labels\"";
    if (col_patient < 0) missing += " \"Patient ID\"";
    if (!missing.empty()) {
        throw DataError("manifest CSV is missing required column(s):" + missing);
    }

    DatasetManifest manifest;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    int line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> fields = split_csv_line(line);
        const int needed = std::max({col_image, col_labels, col_patient});
        if (static_cast<int>(fields.size()) <= needed) {
            throw DataError("line " + std::to_string(line_no) + ": expected at least " +
                            std::to_string(needed + 1) + " fields, got " +
                            std::to_string(fields.size()));
        }
        StudyRecord rec;
        rec.image_id = trim(fields[static_cast<std::size_t>(col_image)]);
        rec.patient_id = trim(fields[static_cast<std::size_t>(col_patient)]);
        rec.labels = parse_finding_labels(fields[static_cast<std::size_t>(col_labels)], line_no);
        if (col_view >= 0 && col_view < static_cast<int>(fields.size())) {
            rec.view = trim(fields[static_cast<std::size_t>(col_view)]);
        }
        if (rec.image_id.empty()) {
            throw DataError("line " + std::to_string(line_no) + ": empty image id");
        }
        if (!seen_ids.insert(rec.image_id).second) {
            throw DataError("line " + std::to_string(line_no) + ": duplicate image id \"" +
                            rec.image_id + "\"");
        }
        manifest.records.push_back(std::move(rec));
    }
    manifest.recount();
    return manifest;
}

DatasetManifest parse_manifest(const std::string& csv_text) {
    std::istringstream stream(csv_text);
    return parse_manifest(stream);
}

DatasetManifest load_manifest_file(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        throw DataError("cannot open manifest file: " + path.string());
    }
    try {
        return parse_manifest(file);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string manifest_to_csv(const DatasetManifest& manifest) {
    std::ostringstream out;
    out << "Image Index,Finding Labels,Patient ID,View Position\n";
    for (const StudyRecord& r : manifest.records) {
        std::string findings;
        for (int c = 0; c < kNumClasses; ++c) {
            if (!r.positive(c)) continue;
            if (!findings.empty()) findings += '|';
            findings += disease_names()[static_cast<std::size_t>(c)];
        }
        if (findings.empty()) findings = "No Finding";
        out << r.image_id << ',' << findings << ',' << r.patient_id << ',' << r.view << '\n';
    }
    return out.str();
}

std::vector<std::string> load_id_list(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        throw DataError("cannot open split list: " + path.string());
    }
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(file, line)) {
        const std::string id = trim(line);
        if (!id.empty()) ids.push_back(id);
    }
    return ids;
}

void assign_splits(DatasetManifest& manifest,
                   const std::vector<std::string>& train_val_ids,
                   const std::vector<std::string>& test_ids,
                   double val_fraction,
                   std::uint64_t seed) {
    if (val_fraction < 0.0 || val_fraction >= 1.0) {
        throw std::invalid_argument("val_fraction must be in [0, 1)");
    }
    std::unordered_map<std::string_view, StudyRecord*> by_id;
    by_id.reserve(manifest.records.size());
    for (StudyRecord& r : manifest.records) {
        by_id.emplace(r.image_id, &r);
        r.split = Split::unassigned;
    }
    std::unordered_set<std::string_view> test_set;
    for (const std::string& id : test_ids) {
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw DataError("test list id not in manifest: " + id);
        }
        it->second->split = Split::test;
        test_set.insert(id);
    }
    // Patients in first-appearance order, then a seeded shuffle picks the
    // validation patients.
    std::vector<std::string_view> patients;
    std::unordered_map<std::string_view, std::vector<StudyRecord*>> by_patient;
    for (const std::string& id : train_val_ids) {
        if (test_set.count(id)) {
            throw DataError("id in both train_val and test lists: " + id);
        }
        auto it = by_id.find(id);
        if (it == by_id.end()) {
            throw DataError("train_val list id not in manifest: " + id);
        }
        StudyRecord* rec = it->second;
        auto [pit, inserted] = by_patient.try_emplace(rec->patient_id);
        if (inserted) patients.push_back(rec->patient_id);
        pit->second.push_back(rec);
    }
    Rng rng(derive_seed(seed, "val_split"));
    for (std::size_t i = patients.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
        std::swap(patients[i - 1], patients[j]);
    }
    const auto n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(patients.size())));
    for (std::size_t i = 0; i < patients.size(); ++i) {
        const Split target = i < n_val ? Split::val : Split::train;
        for (StudyRecord* rec : by_patient[patients[i]]) {
            rec->split = target;
        }
    }
}

DatasetManifest restrict_to_split(const DatasetManifest& manifest, Split s) {
    DatasetManifest out;
    for (const StudyRecord& r : manifest.records) {
        if (r.split == s) out.records.push_back(r);
    }
    out.recount();
    return out;
}

} // namespace cxrkit::data
