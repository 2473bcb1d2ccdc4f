#include "taxotag/nn.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace taxotag {

std::uint64_t derive_seed(std::uint64_t seed, const std::string& label) {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (unsigned char c : label) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

static std::uint64_t mix_seed(std::uint64_t seed, const std::string& name) {
  return derive_seed(seed, name);
}

Eigen::MatrixXd& ParameterStore::add_uniform(const std::string& name, int rows,
                                             int cols, double scale,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, name));
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return add(name, std::move(m));
}

Eigen::MatrixXd& ParameterStore::add(const std::string& name,
                                     Eigen::MatrixXd value) {
  auto [it, inserted] = entries_.emplace(
      name, Entry{std::move(value), Eigen::MatrixXd()});
  if (!inserted) throw std::logic_error("duplicate parameter name: " + name);
  it->second.grad =
      Eigen::MatrixXd::Zero(it->second.value.rows(), it->second.value.cols());
  return it->second.value;
}

ParameterStore::Entry& ParameterStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::logic_error("no such parameter: " + name);
  return it->second;
}

const ParameterStore::Entry& ParameterStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::logic_error("no such parameter: " + name);
  return it->second;
}

void ParameterStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.setZero();
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

ad::Var ParameterStore::use(ad::Tape& tape, const std::string& name) {
  if (bound_tape_ != &tape || bound_tape_id_ != tape.id()) {
    bound_.clear();
    bound_tape_ = &tape;
    bound_tape_id_ = tape.id();
  }
  for (const auto& [n, idx] : bound_)
    if (n == name) return ad::Var{&tape, idx};
  ad::Var v = tape.leaf(at(name).value);
  bound_.emplace_back(name, v.idx);
  return v;
}

void ParameterStore::collect_grads(ad::Tape& tape) {
  if (bound_tape_ != &tape || bound_tape_id_ != tape.id())
    throw std::logic_error("tape was never bound");
  for (const auto& [name, idx] : bound_) at(name).grad += tape.node(idx).grad;
}

Vocab::Vocab() {
  tokens_.push_back("<oov>");
  index_["<oov>"] = 0;
}

int Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_[token] = id;
  return id;
}

int Vocab::lookup(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) {
    ++oov_hits;
    return kOov;
  }
  return it->second;
}

ad::Var embedding_lookup(ad::Var table, const std::vector<int>& ids) {
  const int V = static_cast<int>(table.value().rows());
  const int e = static_cast<int>(table.value().cols());
  std::vector<int> safe(ids);
  for (int& id : safe)
    if (id < 0 || id >= V) id = Vocab::kOov;
  Eigen::MatrixXd out(static_cast<int>(safe.size()), e);
  for (std::size_t t = 0; t < safe.size(); ++t)
    out.row(static_cast<int>(t)) = table.value().row(safe[t]);
  int it_ = table.idx;
  return table.tape->make(std::move(out),
                          [it_, safe](ad::Tape& t, const ad::Tape::Node& n) {
                            for (std::size_t r = 0; r < safe.size(); ++r)
                              t.node(it_).grad.row(safe[r]) +=
                                  n.grad.row(static_cast<int>(r));
                          });
}

ad::Var dense(ad::Var W, ad::Var x, ad::Var b) {
  return ad::add(ad::matmul(W, x), b);
}

ad::Var lstm_forward(ParameterStore& params, ad::Tape& tape, ad::Var inputs,
                     const LstmParams& names, int hidden, int length,
                     bool reverse) {
  const int T = static_cast<int>(inputs.value().rows());
  ad::Var Wx = params.use(tape, names.wx);  // 4h x e
  ad::Var Wh = params.use(tape, names.wh);  // 4h x h
  ad::Var b = params.use(tape, names.b);    // 4h x 1

  ad::Var zero_row = tape.leaf(Eigen::MatrixXd::Zero(1, hidden));
  std::vector<ad::Var> outputs(T, zero_row);
  if (length > 0) {
    ad::Var xproj = ad::add_rowwise(ad::matmul_nt(inputs, Wx), b);  // T x 4h
    ad::Var h = zero_row;
    ad::Var c = zero_row;
    for (int step = 0; step < length; ++step) {
      const int t = reverse ? length - 1 - step : step;
      ad::Var pre = ad::add(ad::rows(xproj, t, 1), ad::matmul_nt(h, Wh));
      ad::Var ig = ad::sigmoid_(ad::cols(pre, 0, hidden));
      ad::Var fg = ad::sigmoid_(ad::cols(pre, hidden, hidden));
      ad::Var gg = ad::tanh_(ad::cols(pre, 2 * hidden, hidden));
      ad::Var og = ad::sigmoid_(ad::cols(pre, 3 * hidden, hidden));
      c = ad::add(ad::cmul(fg, c), ad::cmul(ig, gg));
      h = ad::cmul(og, ad::tanh_(c));
      outputs[t] = h;
    }
  }
  return ad::concat_rows(outputs);
}

ad::Var bilstm(ParameterStore& params, ad::Tape& tape, ad::Var inputs,
               const std::string& prefix, int hidden, int length) {
  ad::Var fwd = lstm_forward(params, tape, inputs,
                             {prefix + "/fwd/Wx", prefix + "/fwd/Wh",
                              prefix + "/fwd/b"},
                             hidden, length, false);
  ad::Var bwd = lstm_forward(params, tape, inputs,
                             {prefix + "/bwd/Wx", prefix + "/bwd/Wh",
                              prefix + "/bwd/b"},
                             hidden, length, true);
  return ad::hcat(fwd, bwd);
}

ad::Var dropout(ad::Var x, double rate, bool training, std::mt19937_64& rng) {
  if (!training || rate <= 0.0) return x;
  const double keep = 1.0 - rate;
  Eigen::MatrixXd mask(x.value().rows(), x.value().cols());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < mask.rows(); ++i)
    for (int j = 0; j < mask.cols(); ++j)
      mask(i, j) = u(rng) < keep ? 1.0 / keep : 0.0;
  return ad::cmul(x, x.tape->leaf(std::move(mask)));
}

GradCheckReport gradient_check(
    ParameterStore& params,
    const std::function<double(ParameterStore&, bool)>& loss_fn,
    int samples_per_param, std::uint64_t seed, double eps) {
  params.zero_grads();
  const double base = loss_fn(params, true);
  if (!std::isfinite(base))
    throw std::runtime_error("gradient_check: non-finite loss");

  GradCheckReport report;
  std::mt19937_64 rng(seed);
  for (const auto& name : params.names()) {
    auto& entry = params.at(name);
    const int total = static_cast<int>(entry.value.size());
    const int samples = std::min(samples_per_param, total);
    for (int s = 0; s < samples; ++s) {
      const int k = static_cast<int>(rng() % static_cast<std::uint64_t>(total));
      double* p = entry.value.data() + k;
      const double orig = *p;
      *p = orig + eps;
      const double fp = loss_fn(params, false);
      *p = orig - eps;
      const double fm = loss_fn(params, false);
      *p = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double analytic = entry.grad.data()[k];
      const double rel = std::abs(analytic - numeric) /
                         std::max({1.0, std::abs(analytic), std::abs(numeric)});
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = name;
      }
    }
  }
  return report;
}

}  // namespace taxotag
