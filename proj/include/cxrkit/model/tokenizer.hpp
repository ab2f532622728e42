#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

namespace cxrkit::model {

// Byte-pair-encoding tokenizer compatible with published CLIP merge lists.
// Accepts plain or gzip-compressed merges files. Text cleaning is ASCII
// scoped: input is lowercased and runs of whitespace collapse to single
// spaces before tokenization.
class BpeTokenizer {
public:
    explicit BpeTokenizer(const std::filesystem::path& merges_path);

    // Token ids without start/end markers.
    std::vector<std::int32_t> encode(const std::string& text) const;
    // <start> + ids + <end>, zero-padded (or truncated, keeping <end> last)
    // to exactly context_length entries.
    std::vector<std::int32_t> encode_context(const std::string& text, int context_length) const;

    int vocab_size() const { return static_cast<int>(token_to_id_.size()) + 2; }
    std::int32_t sot_id() const { return static_cast<std::int32_t>(token_to_id_.size()); }
    std::int32_t eot_id() const { return static_cast<std::int32_t>(token_to_id_.size()) + 1; }

private:
    std::vector<std::string> bpe(const std::string& token) const;

    std::unordered_map<std::string, std::int32_t> token_to_id_;
    std::map<std::pair<std::string, std::string>, int> merge_rank_;
    std::string byte_symbol_[256];
};

} // namespace cxrkit::model
