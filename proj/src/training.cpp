#include "taxotag/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace taxotag {

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2, double eps,
                             double clip_norm)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), clip_norm_(clip_norm) {}

void AdamOptimizer::step(ParameterStore& params) {
  ++t_;
  double sq_norm = 0.0;
  for (const auto& name : params.names())
    sq_norm += params.at(name).grad.squaredNorm();
  const double norm = std::sqrt(sq_norm);
  const double scale =
      (clip_norm_ > 0.0 && norm > clip_norm_) ? clip_norm_ / norm : 1.0;

  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& name : params.names()) {
    auto& entry = params.at(name);
    Eigen::MatrixXd g = entry.grad * scale;
    auto mit = m_.find(name);
    if (mit == m_.end()) {
      m_[name] = Eigen::MatrixXd::Zero(g.rows(), g.cols());
      v_[name] = Eigen::MatrixXd::Zero(g.rows(), g.cols());
    }
    Eigen::MatrixXd& m = m_[name];
    Eigen::MatrixXd& v = v_[name];
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    const Eigen::ArrayXXd mhat = m.array() / bc1;
    const Eigen::ArrayXXd vhat = v.array() / bc2;
    entry.value.array() -= lr_ * mhat / (vhat.sqrt() + eps_);
  }
}

std::vector<std::vector<int>> make_batches(std::size_t n, int batch_size,
                                           std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("cannot batch an empty dataset");
  if (batch_size <= 0) throw std::invalid_argument("batch size must be > 0");
  std::vector<int> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<int>(i);
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(idx.begin() + static_cast<long>(start),
                         idx.begin() + static_cast<long>(end));
  }
  return batches;
}

TrainResult train_model(TaggerModel& model,
                        const std::vector<ProductRecord>& train_set,
                        const std::vector<ProductRecord>& val_set,
                        const std::string& attribute,
                        const std::string& log_path) {
  const ModelConfig& cfg = model.config();
  TrainResult result;

  std::vector<EncodedProduct> train_enc, val_enc;
  for (const auto& r : train_set) {
    EncodedProduct p = model.encode(r, attribute);
    if (p.text.size() == 0) {
      ++result.skipped_empty;
      continue;
    }
    train_enc.push_back(std::move(p));
  }
  for (const auto& r : val_set) {
    EncodedProduct p = model.encode(r, attribute);
    if (p.text.size() == 0) {
      ++result.skipped_empty;
      continue;
    }
    val_enc.push_back(std::move(p));
  }
  if (train_enc.empty()) throw std::runtime_error("empty training set");

  const bool multitask = cfg.multitask != Multitask::Off;
  AdamOptimizer opt(cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm);
  std::mt19937_64 dropout_rng(derive_seed(cfg.seed, "dropout"));

  std::ofstream log;
  if (!log_path.empty()) {
    log.open(log_path);
    if (!log) throw std::runtime_error("cannot write epoch log: " + log_path);
  }

  std::map<std::string, Eigen::MatrixXd> best_params;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;

  auto eval_set = [&](const std::vector<EncodedProduct>& items, double& total,
                      double& extraction, double& classification) {
    total = extraction = classification = 0.0;
    std::mt19937_64 unused(0);
    for (const auto& p : items) {
      ad::Tape tape;
      auto losses = model.loss(tape, p, false, unused);
      total += losses.combined.scalar();
      extraction += losses.extraction.scalar();
      if (multitask) classification += losses.classification.scalar();
    }
    const double n = static_cast<double>(items.empty() ? 1 : items.size());
    total /= n;
    extraction /= n;
    classification /= n;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto batches =
        make_batches(train_enc.size(), cfg.batch_size,
                     derive_seed(cfg.seed, "shuffle/" + std::to_string(epoch)));
    double epoch_loss = 0, epoch_extract = 0, epoch_class = 0;
    std::size_t seen = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      ad::Tape tape;
      std::vector<ad::Var> combined, extract, classify;
      for (int i : batches[bi]) {
        auto losses = model.loss(tape, train_enc[i], true, dropout_rng);
        combined.push_back(losses.combined);
        extract.push_back(losses.extraction);
        if (multitask) classify.push_back(losses.classification);
      }
      ad::Var batch_loss = ad::mean_of(combined);
      const double loss_val = batch_loss.scalar();
      if (!std::isfinite(loss_val))
        throw std::runtime_error("non-finite loss at epoch " +
                                 std::to_string(epoch) + ", batch " +
                                 std::to_string(bi));
      model.params().zero_grads();
      tape.backward(batch_loss);
      model.params().collect_grads(tape);
      opt.step(model.params());

      epoch_loss += loss_val * static_cast<double>(batches[bi].size());
      epoch_extract += ad::mean_of(extract).scalar() *
                       static_cast<double>(batches[bi].size());
      if (multitask)
        epoch_class += ad::mean_of(classify).scalar() *
                       static_cast<double>(batches[bi].size());
      seen += batches[bi].size();
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(seen);
    stats.train_extraction = epoch_extract / static_cast<double>(seen);
    stats.train_classification = epoch_class / static_cast<double>(seen);
    if (!val_enc.empty())
      eval_set(val_enc, stats.val_loss, stats.val_extraction,
               stats.val_classification);
    else
      stats.val_loss = stats.train_loss;
    result.history.push_back(stats);

    if (log) {
      nlohmann::json j;
      j["epoch"] = epoch;
      j["train_loss"] = stats.train_loss;
      j["train_extraction_loss"] = stats.train_extraction;
      j["train_classification_loss"] = stats.train_classification;
      j["val_loss"] = stats.val_loss;
      j["val_extraction_loss"] = stats.val_extraction;
      j["val_classification_loss"] = stats.val_classification;
      j["timestamp"] =
          std::chrono::duration_cast<std::chrono::milliseconds>(
              std::chrono::system_clock::now().time_since_epoch())
              .count();
      log << j.dump() << "\n";
      log.flush();
    }

    if (stats.val_loss < best_val) {
      best_val = stats.val_loss;
      best_epoch = epoch;
      since_best = 0;
      best_params.clear();
      for (const auto& name : model.params().names())
        best_params[name] = model.params().at(name).value;
    } else if (++since_best > cfg.patience) {
      break;
    }
  }

  for (auto& [name, value] : best_params)
    model.params().at(name).value = value;
  result.best_epoch = best_epoch;
  result.best_val_loss = best_val;
  return result;
}

}  // namespace taxotag
