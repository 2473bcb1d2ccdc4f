#ifndef TAXOTAG_NN_HPP
#define TAXOTAG_NN_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "taxotag/autodiff.hpp"

namespace taxotag {

// Stable per-purpose seed derivation (FNV-1a over the label).
std::uint64_t derive_seed(std::uint64_t seed, const std::string& label);

// Named trainable tensors with matching gradient slots.
class ParameterStore {
 public:
  struct Entry {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
  };

  // Registers a parameter initialized uniformly in [-scale, scale] from an
  // RNG derived from (seed, name); re-registering an existing name is an
  // error.
  Eigen::MatrixXd& add_uniform(const std::string& name, int rows, int cols,
                               double scale, std::uint64_t seed);
  Eigen::MatrixXd& add(const std::string& name, Eigen::MatrixXd value);

  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;

  void zero_grads();
  std::vector<std::string> names() const;  // sorted

  // Wraps the current value as a tape leaf and remembers the association so
  // collect_grads can pull gradients back.
  ad::Var use(ad::Tape& tape, const std::string& name);
  void collect_grads(ad::Tape& tape);

 private:
  std::map<std::string, Entry> entries_;
  std::vector<std::pair<std::string, int>> bound_;  // name -> node idx
  ad::Tape* bound_tape_ = nullptr;
  std::uint64_t bound_tape_id_ = 0;
};

// Token vocabulary with a reserved out-of-vocabulary row at index 0.
class Vocab {
 public:
  static constexpr int kOov = 0;
  Vocab();
  int add(const std::string& token);          // returns id, inserts if new
  int lookup(const std::string& token) const; // kOov if unknown
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  mutable std::size_t oov_hits = 0;

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
};

// token-id rows gathered from the embedding matrix; ids out of range hit the
// OOV row.
ad::Var embedding_lookup(ad::Var table, const std::vector<int>& ids);

ad::Var dense(ad::Var W, ad::Var x, ad::Var b);  // W x + b, column vectors

struct LstmParams {
  // gate order: input, forget, cell, output; stacked 4h x e and 4h x h
  std::string wx, wh, b;
};

// Unidirectional LSTM over the rows of `inputs` (T x e); returns T x h.
// Positions at or beyond `length` produce zero rows.
ad::Var lstm_forward(ParameterStore& params, ad::Tape& tape, ad::Var inputs,
                     const LstmParams& names, int hidden, int length,
                     bool reverse);

// Forward/backward concatenation, T x 2h.
ad::Var bilstm(ParameterStore& params, ad::Tape& tape, ad::Var inputs,
               const std::string& prefix, int hidden, int length);

// Inverted dropout on every entry; identity when `training` is false.
// The mask is drawn from `rng` so a run's dropout stream is reproducible.
ad::Var dropout(ad::Var x, double rate, bool training, std::mt19937_64& rng);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int checked = 0;
};

// Central finite differences on a random sample of coordinates of every
// parameter. `loss_fn` must be deterministic.
GradCheckReport gradient_check(
    ParameterStore& params,
    const std::function<double(ParameterStore&, bool /*want_grads*/)>& loss_fn,
    int samples_per_param, std::uint64_t seed, double eps = 1e-5);

}  // namespace taxotag

#endif  // TAXOTAG_NN_HPP
