#include "taxotag/crf.hpp"

#include <cmath>
#include <stdexcept>

namespace taxotag::crf {

namespace {

constexpr int B = 0, I = 1, O = 2, E = 3;

Eigen::Matrix<double, kExtTags, kExtTags> build_mask() {
  Eigen::Matrix<double, kExtTags, kExtTags> m;
  m.setZero();
  auto allow = [&](int from, int to) { m(from, to) = 1.0; };
  allow(kStart, B);
  allow(kStart, O);
  allow(B, I);
  allow(B, E);
  allow(B, O);
  allow(B, kStop);
  allow(I, I);
  allow(I, E);
  allow(E, B);
  allow(E, O);
  allow(E, kStop);
  allow(O, B);
  allow(O, O);
  allow(O, kStop);
  return m;
}

double logsumexp4(const Eigen::Vector4d& v) {
  const double mx = v.maxCoeff();
  return mx + std::log((v.array() - mx).exp().sum());
}

void check_tags(const Eigen::MatrixXd& emissions, const TagSequence& tags) {
  const int T = static_cast<int>(emissions.rows());
  if (T == 0) throw std::invalid_argument("CRF needs at least one token");
  if (static_cast<int>(tags.size()) != T)
    throw std::invalid_argument("tag/emission length mismatch");
  int prev = kStart;
  for (Tag tag : tags) {
    if (!transition_allowed(prev, static_cast<int>(tag)))
      throw std::invalid_argument("gold tags violate the CRF tag grammar");
    prev = static_cast<int>(tag);
  }
  if (!transition_allowed(prev, kStop))
    throw std::invalid_argument("gold tags violate the CRF tag grammar");
}

struct ForwardResult {
  Eigen::MatrixXd alpha;  // T x 4
  double log_z;
};

ForwardResult forward_pass(const Eigen::MatrixXd& emissions,
                           const Eigen::MatrixXd& A) {
  const int T = static_cast<int>(emissions.rows());
  ForwardResult r;
  r.alpha.resize(T, kNumTags);
  for (int j = 0; j < kNumTags; ++j)
    r.alpha(0, j) = emissions(0, j) + A(kStart, j);
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < kNumTags; ++j) {
      Eigen::Vector4d acc;
      for (int i = 0; i < kNumTags; ++i)
        acc(i) = r.alpha(t - 1, i) + A(i, j);
      r.alpha(t, j) = emissions(t, j) + logsumexp4(acc);
    }
  Eigen::Vector4d fin;
  for (int j = 0; j < kNumTags; ++j)
    fin(j) = r.alpha(T - 1, j) + A(j, kStop);
  r.log_z = logsumexp4(fin);
  return r;
}

double gold_score(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& A,
                  const TagSequence& tags) {
  const int T = static_cast<int>(emissions.rows());
  double s = A(kStart, static_cast<int>(tags[0]));
  for (int t = 0; t < T; ++t) {
    s += emissions(t, static_cast<int>(tags[t]));
    if (t > 0) s += A(static_cast<int>(tags[t - 1]), static_cast<int>(tags[t]));
  }
  s += A(static_cast<int>(tags[T - 1]), kStop);
  return s;
}

}  // namespace

const Eigen::Matrix<double, kExtTags, kExtTags>& allowed_mask() {
  static const auto m = build_mask();
  return m;
}

bool transition_allowed(int from, int to) {
  return allowed_mask()(from, to) > 0.5;
}

Eigen::MatrixXd masked_transitions(const Eigen::MatrixXd& transitions) {
  const auto& m = allowed_mask();
  return transitions.cwiseProduct(m) + (1.0 - m.array()).matrix() * kForbidden;
}

double neg_log_likelihood_value(const Eigen::MatrixXd& emissions,
                                const Eigen::MatrixXd& transitions,
                                const TagSequence& tags) {
  check_tags(emissions, tags);
  const Eigen::MatrixXd A = masked_transitions(transitions);
  return forward_pass(emissions, A).log_z - gold_score(emissions, A, tags);
}

ad::Var neg_log_likelihood(ad::Var emissions, ad::Var transitions,
                           const TagSequence& tags) {
  check_tags(emissions.value(), tags);
  const Eigen::MatrixXd A = masked_transitions(transitions.value());
  const Eigen::MatrixXd emit = emissions.value();
  const int T = static_cast<int>(emit.rows());

  ForwardResult fw = forward_pass(emit, A);
  const double nll = fw.log_z - gold_score(emit, A, tags);

  // Backward recursions for the marginals.
  Eigen::MatrixXd beta(T, kNumTags);
  for (int j = 0; j < kNumTags; ++j) beta(T - 1, j) = A(j, kStop);
  for (int t = T - 2; t >= 0; --t)
    for (int j = 0; j < kNumTags; ++j) {
      Eigen::Vector4d acc;
      for (int k = 0; k < kNumTags; ++k)
        acc(k) = A(j, k) + emit(t + 1, k) + beta(t + 1, k);
      beta(t, j) = logsumexp4(acc);
    }

  // d logZ / d emissions: unary marginals.
  Eigen::MatrixXd demit(T, kNumTags);
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < kNumTags; ++j)
      demit(t, j) = std::exp(fw.alpha(t, j) + beta(t, j) - fw.log_z);
  // minus gold indicator
  for (int t = 0; t < T; ++t) demit(t, static_cast<int>(tags[t])) -= 1.0;

  // d logZ / d transitions: expected transition counts.
  Eigen::MatrixXd dtrans = Eigen::MatrixXd::Zero(kExtTags, kExtTags);
  for (int j = 0; j < kNumTags; ++j)
    dtrans(kStart, j) = std::exp(A(kStart, j) + emit(0, j) + beta(0, j) -
                                 fw.log_z);
  for (int t = 0; t + 1 < T; ++t)
    for (int i = 0; i < kNumTags; ++i)
      for (int j = 0; j < kNumTags; ++j)
        dtrans(i, j) += std::exp(fw.alpha(t, i) + A(i, j) + emit(t + 1, j) +
                                 beta(t + 1, j) - fw.log_z);
  for (int j = 0; j < kNumTags; ++j)
    dtrans(j, kStop) += std::exp(fw.alpha(T - 1, j) + A(j, kStop) - fw.log_z);
  // minus gold transition counts
  dtrans(kStart, static_cast<int>(tags[0])) -= 1.0;
  for (int t = 1; t < T; ++t)
    dtrans(static_cast<int>(tags[t - 1]), static_cast<int>(tags[t])) -= 1.0;
  dtrans(static_cast<int>(tags[T - 1]), kStop) -= 1.0;
  // forbidden entries never move
  dtrans = dtrans.cwiseProduct(allowed_mask());

  Eigen::MatrixXd out(1, 1);
  out(0, 0) = nll;
  int ie = emissions.idx, it = transitions.idx;
  return emissions.tape->make(
      std::move(out),
      [ie, it, demit, dtrans](ad::Tape& t, const ad::Tape::Node& n) {
        t.node(ie).grad += n.grad(0, 0) * demit;
        t.node(it).grad += n.grad(0, 0) * dtrans;
      });
}

TagSequence viterbi_decode(const Eigen::MatrixXd& emissions,
                           const Eigen::MatrixXd& transitions) {
  const int T = static_cast<int>(emissions.rows());
  if (T == 0) return {};
  const Eigen::MatrixXd A = masked_transitions(transitions);

  Eigen::MatrixXd score(T, kNumTags);
  Eigen::MatrixXi back(T, kNumTags);
  for (int j = 0; j < kNumTags; ++j) {
    score(0, j) = emissions(0, j) + A(kStart, j);
    back(0, j) = kStart;
  }
  for (int t = 1; t < T; ++t)
    for (int j = 0; j < kNumTags; ++j) {
      double best = score(t - 1, 0) + A(0, j);
      int arg = 0;
      for (int i = 1; i < kNumTags; ++i) {
        const double s = score(t - 1, i) + A(i, j);
        if (s > best) {
          best = s;
          arg = i;
        }
      }
      score(t, j) = emissions(t, j) + best;
      back(t, j) = arg;
    }
  double best = score(T - 1, 0) + A(0, kStop);
  int arg = 0;
  for (int j = 1; j < kNumTags; ++j) {
    const double s = score(T - 1, j) + A(j, kStop);
    if (s > best) {
      best = s;
      arg = j;
    }
  }
  TagSequence tags(T);
  for (int t = T - 1; t >= 0; --t) {
    tags[t] = static_cast<Tag>(arg);
    arg = back(t, arg);
  }
  return tags;
}

std::vector<std::string> extract_spans(const TokenizedText& text,
                                       const TagSequence& tags) {
  std::vector<std::string> out;
  const std::size_t n = tags.size();
  std::size_t t = 0;
  while (t < n) {
    if (tags[t] != Tag::B) {
      ++t;
      continue;
    }
    std::size_t end = t;  // inclusive
    std::size_t k = t + 1;
    while (k < n && (tags[k] == Tag::I || tags[k] == Tag::E)) {
      end = k;
      if (tags[k] == Tag::E) break;
      ++k;
    }
    std::string span;
    for (std::size_t j = t; j <= end; ++j) {
      if (j > t) span += ' ';
      span += text.tokens[j];
    }
    out.push_back(std::move(span));
    t = end + 1;
  }
  return out;
}

}  // namespace taxotag::crf
