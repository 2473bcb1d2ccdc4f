#include "taxotag/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace taxotag {

char tag_char(Tag t) {
  switch (t) {
    case Tag::B: return 'B';
    case Tag::I: return 'I';
    case Tag::O: return 'O';
    case Tag::E: return 'E';
  }
  return '?';
}

static std::string to_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

TokenizedText tokenize(const std::string& text) {
  TokenizedText out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    out.normalized.push_back(to_lower(tok));
    out.tokens.push_back(std::move(tok));
  }
  return out;
}

std::string normalize_value(const std::string& value) {
  TokenizedText t = tokenize(value);
  std::string out;
  for (std::size_t i = 0; i < t.normalized.size(); ++i) {
    if (i) out += ' ';
    out += t.normalized[i];
  }
  return out;
}

TagSequence label_distant(const TokenizedText& text,
                          const std::vector<std::string>& values) {
  const std::size_t n = text.size();
  TagSequence tags(n, Tag::O);

  struct Match {
    std::size_t start, len;
  };
  std::vector<Match> matches;
  for (const auto& value : values) {
    TokenizedText vt = tokenize(value);
    const std::size_t m = vt.size();
    if (m == 0 || m > n) continue;
    for (std::size_t s = 0; s + m <= n; ++s) {
      bool ok = true;
      for (std::size_t k = 0; k < m && ok; ++k)
        ok = text.normalized[s + k] == vt.normalized[k];
      if (ok) matches.push_back({s, m});
    }
  }
  // Longest match first, then leftmost; greedy non-overlapping assignment.
  std::sort(matches.begin(), matches.end(), [](const Match& a, const Match& b) {
    if (a.len != b.len) return a.len > b.len;
    return a.start < b.start;
  });
  std::vector<bool> taken(n, false);
  for (const auto& m : matches) {
    bool free = true;
    for (std::size_t k = m.start; k < m.start + m.len && free; ++k)
      free = !taken[k];
    if (!free) continue;
    // a B may not directly follow a lone B, on either side of this match
    if (m.start > 0 && tags[m.start - 1] == Tag::B) continue;
    if (m.len == 1 && m.start + 1 < n && tags[m.start + 1] == Tag::B) continue;
    for (std::size_t k = m.start; k < m.start + m.len; ++k) taken[k] = true;
    tags[m.start] = Tag::B;
    if (m.len >= 2) {
      for (std::size_t k = m.start + 1; k + 1 < m.start + m.len; ++k)
        tags[k] = Tag::I;
      tags[m.start + m.len - 1] = Tag::E;
    }
  }
  return tags;
}

bool tags_valid(const TagSequence& tags) {
  Tag prev = Tag::O;  // sequence start behaves like O for continuation rules
  bool open = false;  // inside a B I* run awaiting E or end-of-span
  for (std::size_t t = 0; t < tags.size(); ++t) {
    Tag cur = tags[t];
    switch (cur) {
      case Tag::B:
        if (prev == Tag::B || prev == Tag::I) return false;
        open = true;
        break;
      case Tag::I:
      case Tag::E:
        if (!open) return false;
        if (cur == Tag::E) open = false;
        break;
      case Tag::O:
        if (open && prev == Tag::I) return false;
        open = false;
        break;
    }
    prev = cur;
  }
  return prev != Tag::I;
}

LoadResult load_products(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open product file: " + path);
  LoadResult res;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      ProductRecord r;
      r.id = j.at("id").get<std::string>();
      r.title = j.at("title").get<std::string>();
      r.description = j.value("description", std::string());
      r.category_id = j.at("category_id").get<std::string>();
      if (j.contains("attributes")) {
        for (auto& [k, v] : j.at("attributes").items())
          r.attributes[k] = v.get<std::vector<std::string>>();
      }
      if (r.id.empty()) throw std::runtime_error("empty id");
      res.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      std::cerr << path << ":" << lineno << ": skipping malformed record ("
                << e.what() << ")\n";
      ++res.skipped;
    }
  }
  return res;
}

DatasetSplit split_dataset(const std::vector<ProductRecord>& records,
                           double train_ratio, double val_ratio,
                           double test_ratio, std::uint64_t seed) {
  const double total = train_ratio + val_ratio + test_ratio;
  if (std::abs(total - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must sum to 1");

  std::vector<std::size_t> idx(records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng() % i]);

  // Largest-remainder apportionment, ties resolved toward the earlier split.
  const std::size_t n = records.size();
  const double ratios[3] = {train_ratio, val_ratio, test_ratio};
  std::size_t sizes[3];
  double rem[3];
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    double exact = n * ratios[s];
    sizes[s] = static_cast<std::size_t>(exact);
    rem[s] = exact - static_cast<double>(sizes[s]);
    assigned += sizes[s];
  }
  while (assigned < n) {
    int best = 0;
    for (int s = 1; s < 3; ++s)
      if (rem[s] > rem[best] + 1e-12) best = s;
    ++sizes[best];
    rem[best] = -1.0;
    ++assigned;
  }

  DatasetSplit out;
  std::size_t pos = 0;
  auto take = [&](std::vector<ProductRecord>& dst, std::size_t count) {
    for (std::size_t k = 0; k < count; ++k) dst.push_back(records[idx[pos++]]);
  };
  take(out.train, sizes[0]);
  take(out.val, sizes[1]);
  take(out.test, sizes[2]);
  return out;
}

}  // namespace taxotag
