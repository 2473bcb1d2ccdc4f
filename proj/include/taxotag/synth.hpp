#ifndef TAXOTAG_SYNTH_HPP
#define TAXOTAG_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "taxotag/corpus.hpp"
#include "taxotag/taxonomy.hpp"

namespace taxotag {

// Seeded synthetic benchmark: a two-domain taxonomy and templated products
// for the "flavor" attribute. Some surface terms are flavor values in the
// grocery domain but mere scent words in the home domain, where the
// attribute does not apply, so category-aware and category-blind taggers
// are separable by construction.
struct SynthCorpus {
  std::string root;
  std::vector<std::pair<std::string, std::string>> taxonomy_edges;
  std::vector<ProductRecord> products;
  std::vector<bool> ambiguous;  // parallel to products
};

inline constexpr const char* kSynthAttribute = "flavor";

SynthCorpus generate_synth_corpus(std::uint64_t seed,
                                  std::size_t n_products = 2000);

TaxonomyTree synth_taxonomy(const SynthCorpus& corpus);

// Writes dir/taxonomy.jsonl and dir/products.jsonl (products carry an extra
// "ambiguous" flag the loader ignores).
void write_synth_corpus(const SynthCorpus& corpus, const std::string& dir);

}  // namespace taxotag

#endif  // TAXOTAG_SYNTH_HPP
