#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "taxotag/corpus.hpp"
#include "taxotag/crf.hpp"

using namespace taxotag;

TEST_CASE("tokenize keeps punctuation attached and lowercases") {
  auto t = tokenize("Ben & Jerry's black cherry cheesecake ice cream");
  REQUIRE(t.size() == 8);
  CHECK(t.tokens[0] == "Ben");
  CHECK(t.tokens[1] == "&");
  CHECK(t.tokens[2] == "Jerry's");
  CHECK(t.normalized[2] == "jerry's");
  CHECK(t.normalized[0] == "ben");
}

TEST_CASE("tokenize of empty and whitespace-heavy input") {
  CHECK(tokenize("").size() == 0);
  auto t = tokenize("  A  B ");
  REQUIRE(t.size() == 2);
  CHECK(t.tokens[0] == "A");
  CHECK(t.tokens[1] == "B");
}

TEST_CASE("distant labels reproduce the flavor span") {
  auto t = tokenize("Ben & Jerry's black cherry cheesecake ice cream");
  auto tags = label_distant(t, {"black cherry cheesecake"});
  TagSequence expected = {Tag::O, Tag::O, Tag::O, Tag::B,
                          Tag::I, Tag::E, Tag::O, Tag::O};
  CHECK(tags == expected);
}

TEST_CASE("no values means all O") {
  auto t = tokenize("some random title");
  auto tags = label_distant(t, {});
  for (Tag tag : tags) CHECK(tag == Tag::O);
}

TEST_CASE("longer match wins over shorter") {
  auto t = tokenize("chocolate fudge");
  auto tags = label_distant(t, {"fudge", "chocolate fudge"});
  REQUIRE(tags.size() == 2);
  CHECK(tags[0] == Tag::B);
  CHECK(tags[1] == Tag::E);
}

TEST_CASE("single-token value is a lone B") {
  auto t = tokenize("acme vanilla pack");
  auto tags = label_distant(t, {"vanilla"});
  TagSequence expected = {Tag::O, Tag::B, Tag::O};
  CHECK(tags == expected);
}

TEST_CASE("matching is case-insensitive on both sides") {
  auto t = tokenize("Acme VANILLA Bean pack");
  auto tags = label_distant(t, {"Vanilla bean"});
  TagSequence expected = {Tag::O, Tag::B, Tag::E, Tag::O};
  CHECK(tags == expected);
}

TEST_CASE("label_distant output always satisfies the tag grammar") {
  std::mt19937_64 rng(123);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e", "f"};
  for (int iter = 0; iter < 500; ++iter) {
    std::string text;
    const int T = static_cast<int>(rng() % 12);
    for (int i = 0; i < T; ++i) {
      if (i) text += ' ';
      text += words[rng() % words.size()];
    }
    std::vector<std::string> values;
    const int nv = static_cast<int>(rng() % 4);
    for (int v = 0; v < nv; ++v) {
      std::string val = words[rng() % words.size()];
      if (rng() % 2) val += " " + words[rng() % words.size()];
      values.push_back(val);
    }
    auto t = tokenize(text);
    auto tags = label_distant(t, values);
    CHECK(tags_valid(tags));

    // round-trip containment: everything extracted was a requested value
    std::set<std::string> requested;
    for (const auto& v : values) requested.insert(normalize_value(v));
    for (const auto& span : crf::extract_spans(t, tags))
      CHECK(requested.count(normalize_value(span)) == 1);
  }
}

static std::vector<ProductRecord> make_records(int n) {
  std::vector<ProductRecord> out;
  for (int i = 0; i < n; ++i) {
    ProductRecord r;
    r.id = "p" + std::to_string(i);
    r.title = "title " + std::to_string(i);
    r.category_id = "c";
    out.push_back(r);
  }
  return out;
}

TEST_CASE("split is deterministic and proportional") {
  auto records = make_records(10);
  auto s1 = split_dataset(records, 0.6, 0.2, 0.2, 7);
  auto s2 = split_dataset(records, 0.6, 0.2, 0.2, 7);
  CHECK(s1.train.size() == 6);
  CHECK(s1.val.size() == 2);
  CHECK(s1.test.size() == 2);
  for (std::size_t i = 0; i < s1.train.size(); ++i)
    CHECK(s1.train[i].id == s2.train[i].id);
}

TEST_CASE("two records go 1/1/0 by largest remainder with early-split ties") {
  auto s = split_dataset(make_records(2), 0.6, 0.2, 0.2, 3);
  CHECK(s.train.size() == 1);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 0);
}

TEST_CASE("split partitions the input") {
  auto records = make_records(1000);
  auto s = split_dataset(records, 0.6, 0.2, 0.2, 42);
  std::set<std::string> seen;
  auto absorb = [&](const std::vector<ProductRecord>& part) {
    for (const auto& r : part) CHECK(seen.insert(r.id).second);
  };
  absorb(s.train);
  absorb(s.val);
  absorb(s.test);
  CHECK(seen.size() == records.size());
}

TEST_CASE("bad ratio rejected") {
  CHECK_THROWS(split_dataset(make_records(4), 0.5, 0.2, 0.2, 1));
}

TEST_CASE("loader skips malformed lines and counts them") {
  const char* path = "test_products_tmp.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"a","title":"t","category_id":"c"})" << "\n";
    out << "this is not json\n";
    out << R"({"id":"b","title":"t2","category_id":"c","attributes":{"flavor":["x"]}})"
        << "\n";
    out << R"({"title":"missing id","category_id":"c"})" << "\n";
  }
  auto res = load_products(path);
  std::remove(path);
  CHECK(res.records.size() == 2);
  CHECK(res.skipped == 2);
  CHECK(res.records[1].attributes.at("flavor") ==
        std::vector<std::string>{"x"});
}
