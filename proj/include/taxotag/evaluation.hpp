#ifndef TAXOTAG_EVALUATION_HPP
#define TAXOTAG_EVALUATION_HPP

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "taxotag/taxonomy.hpp"

namespace taxotag {

enum class Verdict { Matched, Wrong, EmptyExtraction };

// A product is matched only if it extracts at least one gold value and
// nothing outside the gold set.
Verdict judge(const std::vector<std::string>& extracted,
              const std::vector<std::string>& gold);

struct ProductEvalOutcome {
  std::string id;
  std::string category_id;
  std::vector<std::string> extracted;  // normalized
  std::vector<std::string> gold;       // normalized
  Verdict verdict = Verdict::EmptyExtraction;
};

ProductEvalOutcome make_outcome(const std::string& id,
                                const std::string& category_id,
                                std::vector<std::string> extracted,
                                std::vector<std::string> gold);

struct Prf {
  double precision = 0, recall = 0, f1 = 0;
};

struct MetricsReport {
  std::size_t vocab = 0;  // unique extracted value strings
  double coverage = 0;    // products with any extraction / all products
  Prf micro, macro;
  std::map<std::string, Prf> per_category;
};

// Precision = matched / products-with-any-extraction,
// Recall = matched / products-with-gold. Macro averages per-category scores
// over categories with at least one gold-bearing product.
MetricsReport extraction_metrics(const std::vector<ProductEvalOutcome>& outcomes);

struct ClassificationMetrics {
  double aupr = 0;
  double precision = 0, recall = 0, f1 = 0;
};

// Micro multi-label metrics over all (product, node) pairs; AUPR from the
// step-wise precision-recall curve over all distinct thresholds.
ClassificationMetrics classification_metrics(
    const std::vector<Eigen::VectorXd>& probs,
    const std::vector<Eigen::VectorXd>& labels, double threshold = 0.5);

std::string metrics_to_json(const MetricsReport& report);
std::string metrics_to_table(const MetricsReport& report);

}  // namespace taxotag

#endif  // TAXOTAG_EVALUATION_HPP
