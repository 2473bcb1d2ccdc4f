#ifndef TAXOTAG_CORPUS_HPP
#define TAXOTAG_CORPUS_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace taxotag {

struct ProductRecord {
  std::string id;
  std::string title;
  std::string description;
  std::string category_id;
  std::map<std::string, std::vector<std::string>> attributes;
};

// Whitespace-tokenized text. Surface forms keep their original case;
// `normalized` is the lowercased view used for matching.
struct TokenizedText {
  std::vector<std::string> tokens;
  std::vector<std::string> normalized;
  std::size_t size() const { return tokens.size(); }
};

enum class Tag : int { B = 0, I = 1, O = 2, E = 3 };

using TagSequence = std::vector<Tag>;

char tag_char(Tag t);

TokenizedText tokenize(const std::string& text);

// Lowercase + collapse internal whitespace; used for value matching.
std::string normalize_value(const std::string& value);

// Distant supervision: mark non-overlapping token-span matches of the given
// values. Longer matches win, then leftmost. Single-token match is a lone B,
// longer ones B I* E. Everything else O.
TagSequence label_distant(const TokenizedText& text,
                          const std::vector<std::string>& values);

// True iff the sequence obeys the span grammar (I/E only continue B/I,
// I never ends the sequence).
bool tags_valid(const TagSequence& tags);

struct LoadResult {
  std::vector<ProductRecord> records;
  std::size_t skipped = 0;
};

// JSON-lines loader; malformed lines are reported to stderr with their line
// number and skipped.
LoadResult load_products(const std::string& path);

struct DatasetSplit {
  std::vector<ProductRecord> train, val, test;
};

DatasetSplit split_dataset(const std::vector<ProductRecord>& records,
                           double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed);

}  // namespace taxotag

#endif  // TAXOTAG_CORPUS_HPP
