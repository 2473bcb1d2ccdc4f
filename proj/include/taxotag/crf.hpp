#ifndef TAXOTAG_CRF_HPP
#define TAXOTAG_CRF_HPP

#include <Eigen/Core>
#include <string>
#include <vector>

#include "taxotag/autodiff.hpp"
#include "taxotag/corpus.hpp"

namespace taxotag::crf {

inline constexpr int kNumTags = 4;  // B I O E
inline constexpr int kStart = 4;
inline constexpr int kStop = 5;
inline constexpr int kExtTags = 6;
inline constexpr double kForbidden = -1e4;

// Hard tag grammar over the extended set. Forbidden transitions are scored
// kForbidden and get no gradient.
const Eigen::Matrix<double, kExtTags, kExtTags>& allowed_mask();

// transitions + forbidden penalty, ready for scoring.
Eigen::MatrixXd masked_transitions(const Eigen::MatrixXd& transitions);

bool transition_allowed(int from, int to);

// Exact negative log-likelihood of `tags` under a linear-chain CRF; custom
// node whose backward runs the forward-backward recursions analytically.
ad::Var neg_log_likelihood(ad::Var emissions, ad::Var transitions,
                           const TagSequence& tags);

// Plain (non-differentiable) NLL for inference-side scoring.
double neg_log_likelihood_value(const Eigen::MatrixXd& emissions,
                                const Eigen::MatrixXd& transitions,
                                const TagSequence& tags);

// Max-score legal sequence; ties break toward the lower tag index B<I<O<E.
TagSequence viterbi_decode(const Eigen::MatrixXd& emissions,
                           const Eigen::MatrixXd& transitions);

// Maximal B I* E runs and lone Bs rendered from surface tokens.
std::vector<std::string> extract_spans(const TokenizedText& text,
                                       const TagSequence& tags);

}  // namespace taxotag::crf

#endif  // TAXOTAG_CRF_HPP
