#ifndef TAXOTAG_TRAINING_HPP
#define TAXOTAG_TRAINING_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "taxotag/model.hpp"

namespace taxotag {

// Adam with global-norm gradient clipping over a ParameterStore.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8, double clip_norm = 5.0);
  void step(ParameterStore& params);

 private:
  double lr_, beta1_, beta2_, eps_, clip_norm_;
  long t_ = 0;
  std::map<std::string, Eigen::MatrixXd> m_, v_;
};

// Shuffled index batches; the final partial batch is kept.
std::vector<std::vector<int>> make_batches(std::size_t n, int batch_size,
                                           std::uint64_t seed);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0, train_extraction = 0, train_classification = 0;
  double val_loss = 0, val_extraction = 0, val_classification = 0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_loss = 0;
  std::size_t skipped_empty = 0;
};

// Multi-task training with early stopping; on return the model holds the
// best-validation parameters. `log_path` (optional) gets one JSON line per
// epoch.
TrainResult train_model(TaggerModel& model,
                        const std::vector<ProductRecord>& train_set,
                        const std::vector<ProductRecord>& val_set,
                        const std::string& attribute,
                        const std::string& log_path = "");

}  // namespace taxotag

#endif  // TAXOTAG_TRAINING_HPP
