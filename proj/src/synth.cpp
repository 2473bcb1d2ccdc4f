#include "taxotag/synth.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace taxotag {

namespace {

const std::vector<std::pair<std::string, std::string>> kEdges = {
    {"grocery", "product"},      {"home", "product"},
    {"frozen", "grocery"},       {"snacks", "grocery"},
    {"drinks", "grocery"},       {"candles", "home"},
    {"cleaning", "home"},        {"bath", "home"},
    {"ice-cream", "frozen"},     {"frozen-yogurt", "frozen"},
    {"cookies", "snacks"},       {"candy", "snacks"},
    {"soda", "drinks"},          {"tea", "drinks"},
    {"jar-candle", "candles"},   {"pillar-candle", "candles"},
    {"spray-cleaner", "cleaning"}, {"dish-soap", "cleaning"},
    {"bubble-bath", "bath"},     {"body-wash", "bath"},
};

const std::vector<std::string> kGroceryLeaves = {
    "ice-cream", "frozen-yogurt", "cookies", "candy", "soda", "tea"};
const std::vector<std::string> kHomeLeaves = {
    "jar-candle", "pillar-candle", "spray-cleaner", "dish-soap",
    "bubble-bath", "body-wash"};

// Unambiguous flavor values; several are multi-token.
const std::vector<std::string> kGroceryValues = {
    "chocolate",     "strawberry", "black cherry", "peanut butter",
    "mango",         "banana",     "raspberry",    "cookie dough",
    "salted caramel fudge", "green apple"};

// Flavor values in grocery, plain scent words in home. The first group
// shows up mostly in grocery, the second mostly in home.
const std::vector<std::string> kAmbGroceryHeavy = {"vanilla", "caramel",
                                                   "mint"};
const std::vector<std::string> kAmbHomeHeavy = {"lemon", "coconut",
                                                "lavender"};

const std::vector<std::string> kHomeScents = {"ocean", "linen", "rose",
                                              "cedar"};

const std::vector<std::string> kBrands = {"acme",    "polar", "sunrise",
                                          "meadow",  "lumen", "orchard"};
const std::vector<std::string> kSharedNouns = {"pack", "jar", "box", "set"};
const std::vector<std::string> kGroceryNouns = {
    "ice cream", "cookies", "soda", "iced tea", "yogurt", "candy"};
const std::vector<std::string> kHomeNouns = {"candle", "cleaner", "soap",
                                             "body wash"};
const std::vector<std::string> kSizes = {"small", "large", "12 oz", "6 count",
                                         "family size"};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[rng() % v.size()];
}

}  // namespace

SynthCorpus generate_synth_corpus(std::uint64_t seed, std::size_t n_products) {
  SynthCorpus corpus;
  corpus.root = "product";
  corpus.taxonomy_edges = kEdges;

  std::mt19937_64 rng(seed);
  std::size_t next_id = 0;

  auto add = [&](const std::string& title, const std::string& category,
                 const std::vector<std::string>& values, bool is_ambiguous) {
    ProductRecord r;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%05zu", next_id++);
    r.id = buf;
    r.title = title;
    r.category_id = category;
    if (!values.empty()) r.attributes[kSynthAttribute] = values;
    corpus.products.push_back(std::move(r));
    corpus.ambiguous.push_back(is_ambiguous);
  };

  // Mix of product kinds, scaled to the requested corpus size.
  const std::size_t n_grocery_plain = n_products * 35 / 100;
  const std::size_t n_ambiguous = n_products * 40 / 100;
  const std::size_t n_home_plain = n_products * 15 / 100;
  const std::size_t n_noise =
      n_products - n_grocery_plain - n_ambiguous - n_home_plain;

  for (std::size_t i = 0; i < n_grocery_plain; ++i) {
    const std::string& value = pick(kGroceryValues, rng);
    const std::string title = pick(kBrands, rng) + " " + value + " " +
                              pick(kGroceryNouns, rng) + " " + pick(kSizes, rng);
    add(title, pick(kGroceryLeaves, rng), {value}, false);
  }

  // Ambiguous products share one template pool across both domains, so the
  // text alone cannot settle the category.
  for (std::size_t i = 0; i < n_ambiguous; ++i) {
    const bool grocery_heavy_term = rng() % 2 == 0;
    const std::string& term = grocery_heavy_term ? pick(kAmbGroceryHeavy, rng)
                                                 : pick(kAmbHomeHeavy, rng);
    // grocery-heavy terms: 70% grocery; home-heavy terms: 30% grocery
    const bool in_grocery = (rng() % 10) < (grocery_heavy_term ? 7u : 3u);
    const std::string title = pick(kBrands, rng) + " " + term + " " +
                              pick(kSharedNouns, rng) + " " + pick(kSizes, rng);
    if (in_grocery)
      add(title, pick(kGroceryLeaves, rng), {term}, true);
    else
      add(title, pick(kHomeLeaves, rng), {}, true);
  }

  for (std::size_t i = 0; i < n_home_plain; ++i) {
    const std::string title = pick(kBrands, rng) + " " + pick(kHomeScents, rng) +
                              " " + pick(kHomeNouns, rng) + " " +
                              pick(kSizes, rng);
    add(title, pick(kHomeLeaves, rng), {}, false);
  }

  for (std::size_t i = 0; i < n_noise; ++i) {
    const bool grocery = rng() % 2 == 0;
    const std::string title = pick(kBrands, rng) + " " +
                              (grocery ? pick(kGroceryNouns, rng)
                                       : pick(kHomeNouns, rng)) +
                              " " + pick(kSizes, rng);
    add(title, grocery ? pick(kGroceryLeaves, rng) : pick(kHomeLeaves, rng), {},
        false);
  }

  return corpus;
}

TaxonomyTree synth_taxonomy(const SynthCorpus& corpus) {
  return TaxonomyTree::from_edges(corpus.taxonomy_edges, corpus.root);
}

void write_synth_corpus(const SynthCorpus& corpus, const std::string& dir) {
  std::filesystem::create_directories(dir);

  std::ofstream tax(dir + "/taxonomy.jsonl");
  if (!tax) throw std::runtime_error("cannot write " + dir + "/taxonomy.jsonl");
  {
    nlohmann::json j;
    j["id"] = corpus.root;
    j["parent"] = nullptr;
    tax << j.dump() << "\n";
  }
  for (const auto& [child, parent] : corpus.taxonomy_edges) {
    nlohmann::json j;
    j["id"] = child;
    j["parent"] = parent;
    tax << j.dump() << "\n";
  }

  std::ofstream prod(dir + "/products.jsonl");
  if (!prod) throw std::runtime_error("cannot write " + dir + "/products.jsonl");
  for (std::size_t i = 0; i < corpus.products.size(); ++i) {
    const auto& r = corpus.products[i];
    nlohmann::json j;
    j["id"] = r.id;
    j["title"] = r.title;
    j["description"] = r.description;
    j["category_id"] = r.category_id;
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& [k, v] : r.attributes) attrs[k] = v;
    j["attributes"] = attrs;
    j["ambiguous"] = static_cast<bool>(corpus.ambiguous[i]);
    prod << j.dump() << "\n";
  }
}

}  // namespace taxotag
