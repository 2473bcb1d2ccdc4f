#ifndef TAXOTAG_MODEL_HPP
#define TAXOTAG_MODEL_HPP

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "taxotag/corpus.hpp"
#include "taxotag/crf.hpp"
#include "taxotag/nn.hpp"
#include "taxotag/taxonomy.hpp"

namespace taxotag {

enum class Mode {
  None,        // plain BiLSTM-CRF tagger, category-blind
  PrefixId,    // category id prepended as artificial tokens
  PrefixName,
  PrefixPath,
  ConcatWemb,  // category embedding appended to word embeddings
  ConcatLstm,  // ... or to BiLSTM outputs
  Gate,        // elementwise gate from category embedding
  CondSelfAtt  // pairwise sigmoid attention conditioned on the category
};

enum class Multitask { Off, Flat, Hier };

Mode parse_mode(const std::string& s);
Multitask parse_multitask(const std::string& s);
std::string mode_name(Mode m);
std::string multitask_name(Multitask m);

struct ModelConfig {
  int wemb_dim = 100;
  int hidden = 100;   // BiLSTM output d = 2 * hidden
  int cat_dim = 50;   // m
  int att_dim = 50;   // p
  int pool_dim = 50;  // q
  double gamma = 0.5;
  double hier_w = 1.0;
  double dropout = 0.4;
  Mode mode = Mode::CondSelfAtt;
  Multitask multitask = Multitask::Hier;
  bool use_description = false;
  std::string word_vectors;  // optional pretrained word-vector file

  int epochs = 30;
  int batch_size = 32;
  int patience = 3;
  double lr = 1e-3;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;

  int encoder_dim() const { return 2 * hidden; }
};

// Flat key = value file; unknown keys are an error, missing keys keep their
// defaults.
ModelConfig load_config(const std::string& path);
ModelConfig parse_config(std::istream& in, const std::string& source_name);
std::string config_to_string(const ModelConfig& cfg);
void save_config(const ModelConfig& cfg, const std::string& path);

// One product, resolved against vocab/taxonomy and distant-labeled.
struct EncodedProduct {
  std::string id;
  std::string category_id;
  TokenizedText text;        // content tokens only (no prefix)
  std::vector<int> ids;      // full input incl. any prefix tokens
  int content_begin = 0;     // index of first content token in `ids`
  TagSequence tags;          // over content tokens
  Eigen::VectorXd cat_labels, cat_weights;  // per non-root node
};

std::vector<std::string> prefix_tokens(const TaxonomyTree& tree,
                                       const std::string& category,
                                       Mode variant);

// The full tagger: shared encoder, one conditioning mechanism, CRF head and
// optional category-prediction head.
class TaggerModel {
 public:
  TaggerModel(ModelConfig cfg, const TaxonomyTree& tree,
              const CategoryEmbeddingTable& embeddings,
              const std::vector<ProductRecord>& vocab_source,
              const std::string& attribute);

  // Restores from a checkpoint (vocab, config and tree come from the
  // sidecar).
  TaggerModel(ModelConfig cfg, TaxonomyTree tree,
              std::vector<std::string> vocab_tokens,
              CategoryEmbeddingTable embeddings);

  EncodedProduct encode(const ProductRecord& record,
                        const std::string& attribute) const;

  struct Losses {
    ad::Var extraction;      // L_a
    ad::Var classification;  // L_b; invalid when multitask is off
    ad::Var combined;
  };

  // Builds the loss graph for one product on the given tape.
  Losses loss(ad::Tape& tape, const EncodedProduct& p, bool training,
              std::mt19937_64& dropout_rng);

  // Per-token tag scores over the content tokens (inference mode).
  Eigen::MatrixXd emission_matrix(const EncodedProduct& p);

  // Viterbi tags over the content tokens (inference mode).
  TagSequence predict_tags(const EncodedProduct& p);
  std::vector<std::string> extract_values(const EncodedProduct& p);

  // Per-node category probabilities (inference mode).
  Eigen::VectorXd predict_category_probs(const EncodedProduct& p);

  ParameterStore& params() { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const TaxonomyTree& tree() const { return tree_; }
  const Vocab& vocab() const { return vocab_; }
  const std::vector<std::string>& category_order() const { return cat_order_; }
  const CategoryEmbeddingTable& category_embeddings() const { return cat_emb_; }
  std::size_t missing_category_warnings() const { return missing_cat_; }

 private:
  void register_params();
  Eigen::VectorXd category_vector(const std::string& category_id);
  ad::Var encode_sequence(ad::Tape& tape, const EncodedProduct& p,
                          bool training, std::mt19937_64& dropout_rng,
                          ad::Var* pooled_input);
  ad::Var condition(ad::Tape& tape, ad::Var H, const Eigen::VectorXd& ec);
  ad::Var emissions(ad::Tape& tape, const EncodedProduct& p, bool training,
                    std::mt19937_64& dropout_rng, ad::Var* pooled_input);

  ModelConfig cfg_;
  TaxonomyTree tree_;
  Vocab vocab_;
  std::vector<std::string> cat_order_;  // non-root nodes, fixed order
  CategoryEmbeddingTable cat_emb_;
  ParameterStore params_;
  std::size_t missing_cat_ = 0;
};

// L = gamma * L_a + (1 - gamma) * L_b
ad::Var multitask_loss(ad::Var extraction, ad::Var classification,
                       double gamma);

// Weighted binary cross-entropy with probability clipping.
ad::Var weighted_bce(ad::Var probs, const Eigen::VectorXd& labels,
                     const Eigen::VectorXd& weights);

// softmax-pooled sequence summary (Att head).
ad::Var attention_pool(ParameterStore& params, ad::Tape& tape, ad::Var H);

}  // namespace taxotag

#endif  // TAXOTAG_MODEL_HPP
