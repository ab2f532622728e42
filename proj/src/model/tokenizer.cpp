#include "cxrkit/model/tokenizer.hpp"

#include <array>
#include <cctype>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <zlib.h>

#include "cxrkit/common.hpp"

namespace cxrkit::model {

namespace {

constexpr int kMaxMerges = 48894;  // published CLIP list length

std::string codepoint_to_utf8(int cp) {
    std::string out;
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
    return out;
}

// Reversible byte -> printable-codepoint table shared with the published
// vocabularies, in insertion order: it determines both the per-byte BPE
// symbols and the first 512 vocab ids.
std::vector<std::pair<int, int>> byte_symbol_order() {
    std::vector<int> bytes;
    for (int b = '!'; b <= '~'; ++b) bytes.push_back(b);
    for (int b = 0xA1; b <= 0xAC; ++b) bytes.push_back(b);
    for (int b = 0xAE; b <= 0xFF; ++b) bytes.push_back(b);
    std::set<int> present(bytes.begin(), bytes.end());
    std::vector<int> codes = bytes;
    int next = 0;
    for (int b = 0; b < 256; ++b) {
        if (present.count(b) == 0) {
            bytes.push_back(b);
            codes.push_back(256 + next++);
        }
    }
    std::vector<std::pair<int, int>> out;
    out.reserve(256);
    for (std::size_t i = 0; i < bytes.size(); ++i) out.emplace_back(bytes[i], codes[i]);
    return out;
}

std::string read_maybe_gzip(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw cxrkit::DataError(path.string() + ": cannot open merges file");
    std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (raw.size() < 2 || static_cast<unsigned char>(raw[0]) != 0x1f ||
        static_cast<unsigned char>(raw[1]) != 0x8b) {
        return raw;
    }

    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) {
        throw cxrkit::DataError(path.string() + ": zlib initialization failed");
    }
    std::string out;
    zs.next_in = reinterpret_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    std::array<char, 1 << 16> buffer;
    int status = Z_OK;
    while (status != Z_STREAM_END) {
        zs.next_out = reinterpret_cast<Bytef*>(buffer.data());
        zs.avail_out = static_cast<uInt>(buffer.size());
        status = inflate(&zs, Z_NO_FLUSH);
        if (status != Z_OK && status != Z_STREAM_END) {
            inflateEnd(&zs);
            throw cxrkit::DataError(path.string() + ": gzip decompression failed");
        }
        out.append(buffer.data(), buffer.size() - zs.avail_out);
    }
    inflateEnd(&zs);
    return out;
}

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Lowercase + collapse whitespace, then split into word pieces the way the
// published tokenizer's pattern does over ASCII: contraction suffixes,
// letter runs, single digits, punctuation runs.
std::vector<std::string> split_words(const std::string& text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    bool pending_space = false;
    for (char raw : text) {
        const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
        if (is_space(c)) {
            pending_space = !cleaned.empty();
            continue;
        }
        if (pending_space) {
            cleaned.push_back(' ');
            pending_space = false;
        }
        cleaned.push_back(c);
    }

    static const std::array<std::string, 7> kContractions = {"'s", "'t",  "'re", "'ve",
                                                             "'m", "'ll", "'d"};
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < cleaned.size()) {
        if (cleaned[i] == ' ') {
            ++i;
            continue;
        }
        bool matched = false;
        for (const auto& suffix : kContractions) {
            if (cleaned.compare(i, suffix.size(), suffix) == 0) {
                words.push_back(suffix);
                i += suffix.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;
        if (is_letter(cleaned[i])) {
            std::size_t j = i;
            while (j < cleaned.size() && is_letter(cleaned[j])) ++j;
            words.push_back(cleaned.substr(i, j - i));
            i = j;
        } else if (is_digit(cleaned[i])) {
            words.push_back(cleaned.substr(i, 1));
            ++i;
        } else {
            std::size_t j = i;
            while (j < cleaned.size() && cleaned[j] != ' ' && !is_letter(cleaned[j]) &&
                   !is_digit(cleaned[j])) {
                ++j;
            }
            words.push_back(cleaned.substr(i, j - i));
            i = j;
        }
    }
    return words;
}

} // namespace

BpeTokenizer::BpeTokenizer(const std::filesystem::path& merges_path) {
    const auto order = byte_symbol_order();
    for (const auto& [byte, code] : order) {
        byte_symbol_[static_cast<std::size_t>(byte)] = codepoint_to_utf8(code);
    }
    std::int32_t next_id = 0;
    for (const auto& [byte, code] : order) {
        (void)byte;
        token_to_id_.emplace(codepoint_to_utf8(code), next_id++);
    }
    for (const auto& [byte, code] : order) {
        (void)byte;
        token_to_id_.emplace(codepoint_to_utf8(code) + "</w>", next_id++);
    }

    std::istringstream lines(read_maybe_gzip(merges_path));
    std::string line;
    int rank = 0;
    bool first = true;
    while (std::getline(lines, line) && rank < kMaxMerges) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const bool banner = first && line.rfind("#version", 0) == 0;
        first = false;
        if (banner || line.empty()) continue;
        const auto sep = line.find(' ');
        if (sep == std::string::npos || sep == 0 || sep + 1 >= line.size() ||
            line.find(' ', sep + 1) != std::string::npos) {
            throw cxrkit::DataError(merges_path.string() + ": malformed merge line \"" + line +
                                    "\"");
        }
        std::string left = line.substr(0, sep);
        std::string right = line.substr(sep + 1);
        merge_rank_.emplace(std::make_pair(left, right), rank++);
        token_to_id_.emplace(left + right, next_id++);
    }
    if (merge_rank_.empty()) {
        throw cxrkit::DataError(merges_path.string() + ": no merge rules found");
    }
    // sot/eot ids sit just past the merge vocabulary; see sot_id()/eot_id().
}

std::vector<std::string> BpeTokenizer::bpe(const std::string& token) const {
    std::vector<std::string> symbols;
    for (std::size_t i = 0; i < token.size(); ++i) {
        symbols.push_back(byte_symbol_[static_cast<unsigned char>(token[i])]);
    }
    if (symbols.empty()) return symbols;
    symbols.back() += "</w>";

    while (symbols.size() >= 2) {
        int best_rank = std::numeric_limits<int>::max();
        std::size_t best_pos = 0;
        for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
            const auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
            if (it != merge_rank_.end() && it->second < best_rank) {
                best_rank = it->second;
                best_pos = i;
            }
        }
        if (best_rank == std::numeric_limits<int>::max()) break;

        const std::string left = symbols[best_pos];
        const std::string right = symbols[best_pos + 1];
        std::vector<std::string> merged;
        merged.reserve(symbols.size());
        for (std::size_t i = 0; i < symbols.size();) {
            if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
                merged.push_back(left + right);
                i += 2;
            } else {
                merged.push_back(symbols[i]);
                ++i;
            }
        }
        symbols = std::move(merged);
    }
    return symbols;
}

std::vector<std::int32_t> BpeTokenizer::encode(const std::string& text) const {
    std::vector<std::int32_t> ids;
    for (const auto& word : split_words(text)) {
        for (const auto& symbol : bpe(word)) {
            const auto it = token_to_id_.find(symbol);
            if (it == token_to_id_.end()) {
                throw cxrkit::DataError("tokenizer produced unknown symbol \"" + symbol + "\"");
            }
            ids.push_back(it->second);
        }
    }
    return ids;
}

std::vector<std::int32_t> BpeTokenizer::encode_context(const std::string& text,
                                                       int context_length) const {
    if (context_length < 2) throw std::invalid_argument("context_length must be at least 2");
    std::vector<std::int32_t> ids = encode(text);
    std::vector<std::int32_t> out;
    out.reserve(static_cast<std::size_t>(context_length));
    out.push_back(sot_id());
    for (std::int32_t id : ids) {
        if (out.size() + 1 >= static_cast<std::size_t>(context_length)) break;
        out.push_back(id);
    }
    out.push_back(eot_id());
    out.resize(static_cast<std::size_t>(context_length), 0);
    return out;
}

} // namespace cxrkit::model
