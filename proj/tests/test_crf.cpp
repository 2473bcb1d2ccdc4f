#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "taxotag/crf.hpp"
#include "taxotag/nn.hpp"

using namespace taxotag;
using crf::kNumTags;
using crf::kStart;
using crf::kStop;

namespace {

double path_score(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& mt,
                  const TagSequence& tags) {
  double s = mt(kStart, static_cast<int>(tags[0]));
  for (std::size_t t = 0; t < tags.size(); ++t) {
    s += emissions(static_cast<int>(t), static_cast<int>(tags[t]));
    if (t) s += mt(static_cast<int>(tags[t - 1]), static_cast<int>(tags[t]));
  }
  s += mt(static_cast<int>(tags.back()), kStop);
  return s;
}

// Every tag sequence of length T, in lexicographic order.
std::vector<TagSequence> all_sequences(int T) {
  std::vector<TagSequence> out;
  TagSequence cur(T, Tag::B);
  std::function<void(int)> rec = [&](int pos) {
    if (pos == T) {
      out.push_back(cur);
      return;
    }
    for (int k = 0; k < kNumTags; ++k) {
      cur[pos] = static_cast<Tag>(k);
      rec(pos + 1);
    }
  };
  rec(0);
  return out;
}

double brute_logz(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& mt) {
  const int T = static_cast<int>(emissions.rows());
  double best = -1e300;
  std::vector<double> scores;
  for (const auto& seq : all_sequences(T)) {
    scores.push_back(path_score(emissions, mt, seq));
    best = std::max(best, scores.back());
  }
  double acc = 0;
  for (double s : scores) acc += std::exp(s - best);
  return best + std::log(acc);
}

Eigen::MatrixXd random_mat(int r, int c, std::mt19937_64& rng, double lim) {
  std::uniform_real_distribution<double> u(-lim, lim);
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

}  // namespace

TEST_CASE("transition grammar matches the tagging scheme") {
  CHECK(crf::transition_allowed(kStart, static_cast<int>(Tag::B)));
  CHECK(crf::transition_allowed(kStart, static_cast<int>(Tag::O)));
  CHECK_FALSE(crf::transition_allowed(kStart, static_cast<int>(Tag::I)));
  CHECK_FALSE(crf::transition_allowed(kStart, static_cast<int>(Tag::E)));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::B),
                                static_cast<int>(Tag::I)));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::B),
                                static_cast<int>(Tag::E)));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::B),
                                static_cast<int>(Tag::O)));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::B), kStop));
  CHECK_FALSE(crf::transition_allowed(static_cast<int>(Tag::B),
                                      static_cast<int>(Tag::B)));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::I),
                                static_cast<int>(Tag::I)));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::I),
                                static_cast<int>(Tag::E)));
  CHECK_FALSE(crf::transition_allowed(static_cast<int>(Tag::I),
                                      static_cast<int>(Tag::O)));
  CHECK_FALSE(crf::transition_allowed(static_cast<int>(Tag::I), kStop));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::E),
                                static_cast<int>(Tag::B)));
  CHECK_FALSE(crf::transition_allowed(static_cast<int>(Tag::E),
                                      static_cast<int>(Tag::I)));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::E), kStop));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::O),
                                static_cast<int>(Tag::B)));
  CHECK_FALSE(crf::transition_allowed(static_cast<int>(Tag::O),
                                      static_cast<int>(Tag::I)));
  CHECK(crf::transition_allowed(static_cast<int>(Tag::O), kStop));
}

TEST_CASE("nll matches exhaustive enumeration") {
  std::mt19937_64 rng(31);
  for (int iter = 0; iter < 60; ++iter) {
    const int T = 1 + static_cast<int>(rng() % 6);
    Eigen::MatrixXd emissions = random_mat(T, kNumTags, rng, 2.0);
    Eigen::MatrixXd trans = random_mat(crf::kExtTags, crf::kExtTags, rng, 1.5);
    Eigen::MatrixXd mt = crf::masked_transitions(trans);
    // pick a random legal gold sequence
    TagSequence gold;
    for (const auto& seq : all_sequences(T)) {
      if (!tags_valid(seq)) continue;
      gold = seq;
      if (rng() % 3 == 0) break;
    }
    REQUIRE(!gold.empty());
    const double expect = brute_logz(emissions, mt) -
                          path_score(emissions, mt, gold);
    CHECK(crf::neg_log_likelihood_value(emissions, trans, gold) ==
          doctest::Approx(expect).epsilon(1e-8));
  }
}

TEST_CASE("probabilities of legal sequences sum to one") {
  std::mt19937_64 rng(77);
  for (int iter = 0; iter < 20; ++iter) {
    const int T = 1 + static_cast<int>(rng() % 5);
    Eigen::MatrixXd emissions = random_mat(T, kNumTags, rng, 2.0);
    Eigen::MatrixXd trans = random_mat(crf::kExtTags, crf::kExtTags, rng, 1.5);
    double total = 0;
    for (const auto& seq : all_sequences(T)) {
      if (!tags_valid(seq)) continue;
      total += std::exp(-crf::neg_log_likelihood_value(emissions, trans, seq));
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("uniform scores make nll the log of the legal sequence count") {
  for (int T = 1; T <= 6; ++T) {
    Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(T, kNumTags);
    Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(crf::kExtTags, crf::kExtTags);
    int legal = 0;
    TagSequence some_legal;
    for (const auto& seq : all_sequences(T))
      if (tags_valid(seq)) {
        ++legal;
        some_legal = seq;
      }
    CHECK(crf::neg_log_likelihood_value(emissions, trans, some_legal) ==
          doctest::Approx(std::log(static_cast<double>(legal))).epsilon(1e-10));
  }
}

TEST_CASE("nll gradient matches finite differences") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 5; ++iter) {
    const int T = 2 + static_cast<int>(rng() % 4);
    TagSequence gold;
    for (const auto& seq : all_sequences(T))
      if (tags_valid(seq) && (gold.empty() || rng() % 2)) gold = seq;
    ParameterStore params;
    params.add("emit", random_mat(T, kNumTags, rng, 2.0));
    params.add("trans", random_mat(crf::kExtTags, crf::kExtTags, rng, 1.0));
    auto loss_fn = [&](ParameterStore& p, bool want) {
      ad::Tape tape;
      ad::Var loss = crf::neg_log_likelihood(p.use(tape, "emit"),
                                             p.use(tape, "trans"), gold);
      if (want) {
        tape.backward(loss);
        p.collect_grads(tape);
      }
      return loss.scalar();
    };
    auto rep = gradient_check(params, loss_fn, 12, 5 + iter);
    CHECK(rep.max_rel_error < 1e-4);
  }
}

TEST_CASE("forbidden transitions receive no gradient") {
  const int T = 3;
  std::mt19937_64 rng(4);
  TagSequence gold = {Tag::B, Tag::E, Tag::O};
  ParameterStore params;
  params.add("emit", random_mat(T, kNumTags, rng, 2.0));
  params.add("trans", random_mat(crf::kExtTags, crf::kExtTags, rng, 1.0));
  ad::Tape tape;
  ad::Var loss = crf::neg_log_likelihood(params.use(tape, "emit"),
                                         params.use(tape, "trans"), gold);
  tape.backward(loss);
  params.collect_grads(tape);
  const Eigen::MatrixXd& g = params.at("trans").grad;
  for (int i = 0; i < crf::kExtTags; ++i)
    for (int j = 0; j < crf::kExtTags; ++j)
      if (!crf::transition_allowed(i, j)) CHECK(g(i, j) == 0.0);
}

TEST_CASE("nll rejects gold tags that violate the grammar") {
  Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(2, kNumTags);
  Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(crf::kExtTags, crf::kExtTags);
  CHECK_THROWS(crf::neg_log_likelihood_value(emissions, trans,
                                             {Tag::I, Tag::E}));
  CHECK_THROWS(crf::neg_log_likelihood_value(emissions, trans,
                                             {Tag::B, Tag::B}));
}

TEST_CASE("viterbi finds the exhaustive argmax and stays legal") {
  std::mt19937_64 rng(19);
  for (int iter = 0; iter < 60; ++iter) {
    const int T = 1 + static_cast<int>(rng() % 6);
    Eigen::MatrixXd emissions = random_mat(T, kNumTags, rng, 2.0);
    Eigen::MatrixXd trans = random_mat(crf::kExtTags, crf::kExtTags, rng, 1.5);
    Eigen::MatrixXd mt = crf::masked_transitions(trans);
    double best = -1e300;
    for (const auto& seq : all_sequences(T))
      if (tags_valid(seq))
        best = std::max(best, path_score(emissions, mt, seq));
    TagSequence decoded = crf::viterbi_decode(emissions, trans);
    REQUIRE(decoded.size() == static_cast<std::size_t>(T));
    CHECK(tags_valid(decoded));
    CHECK(path_score(emissions, mt, decoded) ==
          doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("viterbi under all-equal scores is legal and prefers low indices") {
  for (int T = 1; T <= 6; ++T) {
    Eigen::MatrixXd emissions = Eigen::MatrixXd::Zero(T, kNumTags);
    Eigen::MatrixXd trans = Eigen::MatrixXd::Zero(crf::kExtTags, crf::kExtTags);
    TagSequence decoded = crf::viterbi_decode(emissions, trans);
    CHECK(tags_valid(decoded));
  }
}

TEST_CASE("decode score dominates sampled legal sequences") {
  std::mt19937_64 rng(23);
  for (int iter = 0; iter < 20; ++iter) {
    const int T = 4 + static_cast<int>(rng() % 3);
    Eigen::MatrixXd emissions = random_mat(T, kNumTags, rng, 3.0);
    Eigen::MatrixXd trans = random_mat(crf::kExtTags, crf::kExtTags, rng, 1.0);
    Eigen::MatrixXd mt = crf::masked_transitions(trans);
    TagSequence decoded = crf::viterbi_decode(emissions, trans);
    const double dscore = path_score(emissions, mt, decoded);
    for (const auto& seq : all_sequences(T))
      if (tags_valid(seq))
        CHECK(dscore >= path_score(emissions, mt, seq) - 1e-9);
  }
}

TEST_CASE("span extraction renders surface tokens") {
  auto t = tokenize("Ben & Jerry's Black Cherry Cheesecake ice cream");
  TagSequence tags = {Tag::O, Tag::O, Tag::O, Tag::B,
                      Tag::I, Tag::E, Tag::O, Tag::O};
  auto spans = crf::extract_spans(t, tags);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == "Black Cherry Cheesecake");
}

TEST_CASE("lone B and adjacent spans extract separately") {
  auto t = tokenize("vanilla and black cherry swirl");
  TagSequence tags = {Tag::B, Tag::O, Tag::B, Tag::E, Tag::O};
  auto spans = crf::extract_spans(t, tags);
  REQUIRE(spans.size() == 2);
  CHECK(spans[0] == "vanilla");
  CHECK(spans[1] == "black cherry");

  TagSequence back_to_back = {Tag::B, Tag::E, Tag::B, Tag::I, Tag::E};
  auto spans2 = crf::extract_spans(t, back_to_back);
  REQUIRE(spans2.size() == 2);
  CHECK(spans2[0] == "vanilla and");
  CHECK(spans2[1] == "black cherry swirl");
}

TEST_CASE("all-O yields no spans") {
  auto t = tokenize("plain product title");
  CHECK(crf::extract_spans(t, {Tag::O, Tag::O, Tag::O}).empty());
}
