#include "taxotag/evaluation.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace taxotag {

Verdict judge(const std::vector<std::string>& extracted,
              const std::vector<std::string>& gold) {
  if (extracted.empty()) return Verdict::EmptyExtraction;
  const std::set<std::string> gold_set(gold.begin(), gold.end());
  bool any = false;
  for (const auto& v : extracted) {
    if (!gold_set.count(v)) return Verdict::Wrong;
    any = true;
  }
  return any ? Verdict::Matched : Verdict::Wrong;
}

ProductEvalOutcome make_outcome(const std::string& id,
                                const std::string& category_id,
                                std::vector<std::string> extracted,
                                std::vector<std::string> gold) {
  ProductEvalOutcome o;
  o.id = id;
  o.category_id = category_id;
  o.extracted = std::move(extracted);
  o.gold = std::move(gold);
  o.verdict = judge(o.extracted, o.gold);
  return o;
}

static double f1_of(double p, double r) {
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

MetricsReport extraction_metrics(
    const std::vector<ProductEvalOutcome>& outcomes) {
  if (outcomes.empty())
    throw std::invalid_argument("no outcomes to aggregate");

  MetricsReport report;
  std::set<std::string> vocab;
  std::size_t with_extraction = 0;

  struct Counts {
    std::size_t matched = 0, with_gold = 0, gold_and_extracted = 0;
  };
  Counts total;
  std::map<std::string, Counts> per_cat;

  for (const auto& o : outcomes) {
    for (const auto& v : o.extracted) vocab.insert(v);
    if (!o.extracted.empty()) ++with_extraction;
    if (o.gold.empty()) continue;
    Counts& c = per_cat[o.category_id];
    ++c.with_gold;
    ++total.with_gold;
    if (!o.extracted.empty()) {
      ++c.gold_and_extracted;
      ++total.gold_and_extracted;
    }
    if (o.verdict == Verdict::Matched) {
      ++c.matched;
      ++total.matched;
    }
  }

  report.vocab = vocab.size();
  report.coverage =
      static_cast<double>(with_extraction) / static_cast<double>(outcomes.size());

  auto prf = [](const Counts& c) {
    Prf p;
    p.precision = c.gold_and_extracted
                      ? static_cast<double>(c.matched) /
                            static_cast<double>(c.gold_and_extracted)
                      : 0.0;
    p.recall = c.with_gold ? static_cast<double>(c.matched) /
                                 static_cast<double>(c.with_gold)
                           : 0.0;
    p.f1 = f1_of(p.precision, p.recall);
    return p;
  };

  report.micro = prf(total);
  double mp = 0, mr = 0, mf = 0;
  for (const auto& [cat, c] : per_cat) {
    Prf p = prf(c);
    report.per_category[cat] = p;
    mp += p.precision;
    mr += p.recall;
    mf += p.f1;
  }
  const double ncat = static_cast<double>(per_cat.size());
  if (ncat > 0) {
    report.macro.precision = mp / ncat;
    report.macro.recall = mr / ncat;
    report.macro.f1 = mf / ncat;
  }
  return report;
}

ClassificationMetrics classification_metrics(
    const std::vector<Eigen::VectorXd>& probs,
    const std::vector<Eigen::VectorXd>& labels, double threshold) {
  if (probs.size() != labels.size())
    throw std::invalid_argument("probs/labels count mismatch");
  std::vector<std::pair<double, int>> pairs;  // score, label
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].size() != labels[i].size())
      throw std::invalid_argument("probs/labels dimension mismatch");
    for (Eigen::Index j = 0; j < probs[i].size(); ++j)
      pairs.emplace_back(probs[i](j), labels[i](j) > 0.5 ? 1 : 0);
  }

  ClassificationMetrics m;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [score, label] : pairs) {
    const bool predicted = score >= threshold;
    if (predicted && label) ++tp;
    else if (predicted) ++fp;
    else if (label) ++fn;
  }
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                        : 0.0;
  m.recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                     : 0.0;
  m.f1 = f1_of(m.precision, m.recall);

  // Step-wise PR curve over all distinct score thresholds, descending.
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::size_t total_pos = 0;
  for (const auto& [score, label] : pairs) total_pos += label;
  if (total_pos == 0) return m;
  double aupr = 0.0;
  double prev_recall = 0.0;
  std::size_t ctp = 0, cfp = 0;
  std::size_t i = 0;
  while (i < pairs.size()) {
    const double score = pairs[i].first;
    while (i < pairs.size() && pairs[i].first == score) {
      if (pairs[i].second) ++ctp;
      else ++cfp;
      ++i;
    }
    const double recall = static_cast<double>(ctp) / static_cast<double>(total_pos);
    const double precision =
        static_cast<double>(ctp) / static_cast<double>(ctp + cfp);
    aupr += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  m.aupr = aupr;
  return m;
}

std::string metrics_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["vocab"] = report.vocab;
  j["coverage"] = report.coverage;
  auto prf = [](const Prf& p) {
    return nlohmann::json{{"precision", p.precision},
                          {"recall", p.recall},
                          {"f1", p.f1}};
  };
  j["micro"] = prf(report.micro);
  j["macro"] = prf(report.macro);
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [cat, p] : report.per_category) cats[cat] = prf(p);
  j["per_category"] = cats;
  return j.dump(2);
}

std::string metrics_to_table(const MetricsReport& report) {
  std::ostringstream out;
  out.precision(4);
  out << "vocab     " << report.vocab << "\n"
      << "coverage  " << report.coverage << "\n"
      << "micro     P " << report.micro.precision << "  R "
      << report.micro.recall << "  F1 " << report.micro.f1 << "\n"
      << "macro     P " << report.macro.precision << "  R "
      << report.macro.recall << "  F1 " << report.macro.f1 << "\n";
  for (const auto& [cat, p] : report.per_category)
    out << "  " << cat << "  P " << p.precision << "  R " << p.recall
        << "  F1 " << p.f1 << "\n";
  return out.str();
}

}  // namespace taxotag
