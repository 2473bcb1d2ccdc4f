#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "taxotag/evaluation.hpp"

using namespace taxotag;

namespace {

ProductEvalOutcome out(const std::string& id, const std::string& cat,
                       std::vector<std::string> extracted,
                       std::vector<std::string> gold) {
  return make_outcome(id, cat, std::move(extracted), std::move(gold));
}

// Independent AUPR computation: explicit sweep over every distinct score,
// rectangle rule against the previous recall point.
double aupr_oracle(const std::vector<double>& scores,
                   const std::vector<int>& labels) {
  std::set<double, std::greater<double>> thresholds(scores.begin(),
                                                    scores.end());
  int total_pos = 0;
  for (int l : labels) total_pos += l;
  if (total_pos == 0) return 0.0;
  double area = 0.0, prev_recall = 0.0;
  for (double thr : thresholds) {
    int tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < thr) continue;
      if (labels[i]) ++tp;
      else ++fp;
    }
    const double recall = static_cast<double>(tp) / total_pos;
    const double precision = static_cast<double>(tp) / (tp + fp);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

}  // namespace

TEST_CASE("verdicts follow the subset rule") {
  CHECK(judge({"v1"}, {"v1", "v2"}) == Verdict::Matched);
  CHECK(judge({"v1", "v2", "v3"}, {"v1"}) == Verdict::Wrong);
  CHECK(judge({}, {"v1"}) == Verdict::EmptyExtraction);
  CHECK(judge({"v1", "v2"}, {"v1", "v2"}) == Verdict::Matched);
  CHECK(judge({"v9"}, {"v1"}) == Verdict::Wrong);
  CHECK(judge({"v1"}, {}) == Verdict::Wrong);
  CHECK(judge({}, {}) == Verdict::EmptyExtraction);
}

TEST_CASE("two matched products give perfect scores") {
  auto report = extraction_metrics({out("a", "c1", {"x"}, {"x"}),
                                    out("b", "c1", {"y"}, {"y", "z"})});
  CHECK(report.micro.precision == 1.0);
  CHECK(report.micro.recall == 1.0);
  CHECK(report.micro.f1 == 1.0);
  CHECK(report.coverage == 1.0);
  CHECK(report.vocab == 2);
}

TEST_CASE("hand-counted four-product fixture") {
  auto report = extraction_metrics({
      out("a", "c1", {"x"}, {"x"}),        // matched
      out("b", "c1", {"bad"}, {"y"}),      // wrong
      out("c", "c1", {}, {"z"}),           // empty but gold-bearing
      out("d", "c1", {"w"}, {"w", "v"}),   // matched
  });
  CHECK(report.micro.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(report.micro.recall == doctest::Approx(2.0 / 4.0).epsilon(1e-12));
  CHECK(report.micro.f1 == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
  CHECK(report.coverage == doctest::Approx(3.0 / 4.0).epsilon(1e-12));
  CHECK(report.vocab == 3);
}

TEST_CASE("macro averages categories equally regardless of size") {
  // category c1: 1 product, perfect; category c2: 5 products, all wrong
  std::vector<ProductEvalOutcome> outcomes = {out("a", "c1", {"x"}, {"x"})};
  for (int i = 0; i < 5; ++i)
    outcomes.push_back(out("b" + std::to_string(i), "c2", {"bad"}, {"y"}));
  auto report = extraction_metrics(outcomes);
  CHECK(report.macro.f1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.per_category.at("c1").f1 == 1.0);
  CHECK(report.per_category.at("c2").f1 == 0.0);
}

TEST_CASE("micro ignores category labels, macro does not") {
  std::vector<ProductEvalOutcome> split = {
      out("a", "c1", {"x"}, {"x"}),
      out("b", "c2", {"bad"}, {"y"}),
      out("c", "c2", {"bad2"}, {"z"}),
  };
  std::vector<ProductEvalOutcome> merged = {
      out("a", "c1", {"x"}, {"x"}),
      out("b", "c1", {"bad"}, {"y"}),
      out("c", "c1", {"bad2"}, {"z"}),
  };
  auto rs = extraction_metrics(split);
  auto rm = extraction_metrics(merged);
  CHECK(rs.micro.f1 == rm.micro.f1);
  CHECK(rs.micro.precision == rm.micro.precision);
  CHECK(rs.macro.f1 != rm.macro.f1);
}

TEST_CASE("categories without gold products stay out of the macro average") {
  auto report = extraction_metrics({
      out("a", "c1", {"x"}, {"x"}),
      out("b", "c2", {"noise"}, {}),  // no gold: coverage only
  });
  CHECK(report.per_category.count("c2") == 0);
  CHECK(report.macro.f1 == 1.0);
  CHECK(report.micro.f1 == 1.0);
  CHECK(report.coverage == 1.0);
  CHECK(report.vocab == 2);
}

TEST_CASE("vocab grows monotonically as outcomes are appended") {
  std::vector<ProductEvalOutcome> outcomes;
  std::mt19937_64 rng(2);
  std::size_t prev = 0;
  for (int i = 0; i < 30; ++i) {
    std::vector<std::string> ext;
    if (rng() % 3) ext.push_back("v" + std::to_string(rng() % 10));
    outcomes.push_back(out("p" + std::to_string(i), "c", ext, {"v1"}));
    auto report = extraction_metrics(outcomes);
    CHECK(report.vocab >= prev);
    prev = report.vocab;
  }
}

TEST_CASE("products without gold or extraction move only coverage") {
  std::vector<ProductEvalOutcome> base = {out("a", "c1", {"x"}, {"x"}),
                                          out("b", "c1", {"bad"}, {"y"})};
  auto before = extraction_metrics(base);
  base.push_back(out("c", "c2", {}, {}));
  auto after = extraction_metrics(base);
  CHECK(after.micro.precision == before.micro.precision);
  CHECK(after.micro.recall == before.micro.recall);
  CHECK(after.macro.f1 == before.macro.f1);
  CHECK(after.vocab == before.vocab);
  CHECK(after.coverage == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("empty outcome set is rejected") {
  CHECK_THROWS(extraction_metrics({}));
}

TEST_CASE("perfect probabilities yield unit classification scores") {
  Eigen::VectorXd p1(3), l1(3), p2(3), l2(3);
  p1 << 1, 0, 0;
  l1 << 1, 0, 0;
  p2 << 0, 1, 1;
  l2 << 0, 1, 1;
  auto m = classification_metrics({p1, p2}, {l1, l2});
  CHECK(m.aupr == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
}

TEST_CASE("threshold ties predict positive") {
  Eigen::VectorXd p(2), l(2);
  p << 0.5, 0.49;
  l << 1, 0;
  auto m = classification_metrics({p}, {l}, 0.5);
  CHECK(m.recall == 1.0);  // the 0.5 score counts as a positive prediction
  CHECK(m.precision == 1.0);
}

TEST_CASE("aupr matches an exhaustive threshold sweep") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0, 1);
  for (int iter = 0; iter < 20; ++iter) {
    const int n = 50;
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    Eigen::VectorXd p(n), l(n);
    for (int i = 0; i < n; ++i) {
      // quantized scores force duplicate thresholds into the sweep
      scores[i] = std::round(u(rng) * 20.0) / 20.0;
      labels[i] = rng() % 2;
      p(i) = scores[i];
      l(i) = labels[i];
    }
    auto m = classification_metrics({p}, {l});
    CHECK(m.aupr == doctest::Approx(aupr_oracle(scores, labels)).epsilon(1e-9));
  }
}

TEST_CASE("all-negative labels give zero area") {
  Eigen::VectorXd p(3), l = Eigen::VectorXd::Zero(3);
  p << 0.9, 0.2, 0.4;
  auto m = classification_metrics({p}, {l});
  CHECK(m.aupr == 0.0);
  CHECK(m.recall == 0.0);
}

TEST_CASE("json report carries the headline numbers") {
  auto report = extraction_metrics({out("a", "c1", {"x"}, {"x"})});
  std::string j = metrics_to_json(report);
  CHECK(j.find("\"vocab\"") != std::string::npos);
  CHECK(j.find("\"coverage\"") != std::string::npos);
  CHECK(j.find("\"micro\"") != std::string::npos);
  CHECK(j.find("\"per_category\"") != std::string::npos);
}
