#include "taxotag/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace taxotag {

namespace {

constexpr const char* kSep = "<sep>";
constexpr const char* kSep2 = "<sep2>";
constexpr const char* kDescBoundary = "<desc>";
constexpr double kProbClip = 1e-12;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool uses_category_embedding(Mode m) {
  return m == Mode::ConcatWemb || m == Mode::ConcatLstm || m == Mode::Gate ||
         m == Mode::CondSelfAtt;
}

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "none") return Mode::None;
  if (s == "prefix-id") return Mode::PrefixId;
  if (s == "prefix-name") return Mode::PrefixName;
  if (s == "prefix-path") return Mode::PrefixPath;
  if (s == "concat-wemb") return Mode::ConcatWemb;
  if (s == "concat-lstm") return Mode::ConcatLstm;
  if (s == "gate") return Mode::Gate;
  if (s == "cond-self-att") return Mode::CondSelfAtt;
  throw std::invalid_argument("unknown conditioning mode: " + s);
}

Multitask parse_multitask(const std::string& s) {
  if (s == "off") return Multitask::Off;
  if (s == "flat") return Multitask::Flat;
  if (s == "hier") return Multitask::Hier;
  throw std::invalid_argument("unknown multitask setting: " + s);
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::None: return "none";
    case Mode::PrefixId: return "prefix-id";
    case Mode::PrefixName: return "prefix-name";
    case Mode::PrefixPath: return "prefix-path";
    case Mode::ConcatWemb: return "concat-wemb";
    case Mode::ConcatLstm: return "concat-lstm";
    case Mode::Gate: return "gate";
    case Mode::CondSelfAtt: return "cond-self-att";
  }
  return "?";
}

std::string multitask_name(Multitask m) {
  switch (m) {
    case Multitask::Off: return "off";
    case Multitask::Flat: return "flat";
    case Multitask::Hier: return "hier";
  }
  return "?";
}

ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_config(in, path);
}

ModelConfig parse_config(std::istream& in, const std::string& path) {
  ModelConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key, eq, value;
    if (!(ls >> key)) continue;
    if (!(ls >> eq >> value) || eq != "=")
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected 'key = value'");
    if (key == "wemb_dim") cfg.wemb_dim = std::stoi(value);
    else if (key == "hidden") cfg.hidden = std::stoi(value);
    else if (key == "cat_dim") cfg.cat_dim = std::stoi(value);
    else if (key == "att_dim") cfg.att_dim = std::stoi(value);
    else if (key == "pool_dim") cfg.pool_dim = std::stoi(value);
    else if (key == "gamma") cfg.gamma = std::stod(value);
    else if (key == "w") cfg.hier_w = std::stod(value);
    else if (key == "dropout") cfg.dropout = std::stod(value);
    else if (key == "mode") cfg.mode = parse_mode(value);
    else if (key == "multitask") cfg.multitask = parse_multitask(value);
    else if (key == "use_description") cfg.use_description = value == "true";
    else if (key == "word_vectors") cfg.word_vectors = value;
    else if (key == "epochs") cfg.epochs = std::stoi(value);
    else if (key == "batch_size") cfg.batch_size = std::stoi(value);
    else if (key == "patience") cfg.patience = std::stoi(value);
    else if (key == "lr") cfg.lr = std::stod(value);
    else if (key == "clip_norm") cfg.clip_norm = std::stod(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": unknown config key: " + key);
  }
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0)
    throw std::runtime_error("gamma must be in [0, 1]");
  if (cfg.hier_w <= 0.0 || cfg.hier_w > 1.0)
    throw std::runtime_error("w must be in (0, 1]");
  return cfg;
}

std::string config_to_string(const ModelConfig& cfg) {
  std::ostringstream out;
  out.precision(17);
  out << "wemb_dim = " << cfg.wemb_dim << "\n"
      << "hidden = " << cfg.hidden << "\n"
      << "cat_dim = " << cfg.cat_dim << "\n"
      << "att_dim = " << cfg.att_dim << "\n"
      << "pool_dim = " << cfg.pool_dim << "\n"
      << "gamma = " << cfg.gamma << "\n"
      << "w = " << cfg.hier_w << "\n"
      << "dropout = " << cfg.dropout << "\n"
      << "mode = " << mode_name(cfg.mode) << "\n"
      << "multitask = " << multitask_name(cfg.multitask) << "\n"
      << "use_description = " << (cfg.use_description ? "true" : "false") << "\n"
      << "epochs = " << cfg.epochs << "\n"
      << "batch_size = " << cfg.batch_size << "\n"
      << "patience = " << cfg.patience << "\n"
      << "lr = " << cfg.lr << "\n"
      << "clip_norm = " << cfg.clip_norm << "\n"
      << "seed = " << cfg.seed << "\n";
  return out.str();
}

void save_config(const ModelConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << config_to_string(cfg);
}

std::vector<std::string> prefix_tokens(const TaxonomyTree& tree,
                                       const std::string& category,
                                       Mode variant) {
  std::vector<std::string> out;
  switch (variant) {
    case Mode::PrefixId:
    case Mode::PrefixName:
      out.push_back(lower(category));
      break;
    case Mode::PrefixPath: {
      auto path = tree.ancestor_path(category);  // leaf-to-top
      for (auto it = path.rbegin(); it != path.rend(); ++it) {
        if (!out.empty()) out.push_back(kSep2);
        out.push_back(lower(*it));
      }
      break;
    }
    default:
      return {};
  }
  out.push_back(kSep);
  return out;
}

TaggerModel::TaggerModel(ModelConfig cfg, const TaxonomyTree& tree,
                         const CategoryEmbeddingTable& embeddings,
                         const std::vector<ProductRecord>& vocab_source,
                         const std::string& attribute)
    : cfg_(std::move(cfg)), tree_(tree), cat_order_(tree.non_root_nodes()),
      cat_emb_(embeddings) {
  vocab_.add(kSep);
  vocab_.add(kSep2);
  vocab_.add(kDescBoundary);
  const bool prefixed = cfg_.mode == Mode::PrefixId ||
                        cfg_.mode == Mode::PrefixName ||
                        cfg_.mode == Mode::PrefixPath;
  if (prefixed)
    for (const auto& node : tree.nodes()) vocab_.add(lower(node));
  for (const auto& r : vocab_source) {
    std::string text = r.title;
    if (cfg_.use_description && !r.description.empty())
      text += std::string(" ") + kDescBoundary + " " + r.description;
    for (const auto& tok : tokenize(text).normalized) vocab_.add(tok);
  }
  (void)attribute;
  if (uses_category_embedding(cfg_.mode) && cat_emb_.dim != cfg_.cat_dim)
    throw std::runtime_error("category embedding dimension mismatch");
  register_params();
}

TaggerModel::TaggerModel(ModelConfig cfg, TaxonomyTree tree,
                         std::vector<std::string> vocab_tokens,
                         CategoryEmbeddingTable embeddings)
    : cfg_(std::move(cfg)), tree_(std::move(tree)),
      cat_order_(tree_.non_root_nodes()), cat_emb_(std::move(embeddings)) {
  for (const auto& tok : vocab_tokens)
    if (tok != "<oov>") vocab_.add(tok);
  register_params();
}

void TaggerModel::register_params() {
  const std::uint64_t seed = cfg_.seed;
  const int h = cfg_.hidden;
  const int e_in = cfg_.wemb_dim +
                   (cfg_.mode == Mode::ConcatWemb ? cfg_.cat_dim : 0);
  const int d2 = cfg_.encoder_dim() +
                 (cfg_.mode == Mode::ConcatLstm ? cfg_.cat_dim : 0);

  auto& wemb =
      params_.add_uniform("wemb", vocab_.size(), cfg_.wemb_dim, 0.05, seed);
  if (!cfg_.word_vectors.empty()) {
    std::ifstream in(cfg_.word_vectors);
    if (!in)
      throw std::runtime_error("cannot open word vectors: " + cfg_.word_vectors);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string tok;
      ls >> tok;
      const int id = vocab_.lookup(tok);
      if (id == Vocab::kOov) continue;
      for (int k = 0; k < cfg_.wemb_dim; ++k)
        if (!(ls >> wemb(id, k)))
          throw std::runtime_error("short word-vector line for token " + tok);
    }
  }

  for (const char* dir : {"fwd", "bwd"}) {
    const std::string p = std::string("lstm/") + dir;
    params_.add_uniform(p + "/Wx", 4 * h, e_in, 0.08, seed);
    params_.add_uniform(p + "/Wh", 4 * h, h, 0.08, seed);
    auto& b = params_.add(p + "/b", Eigen::MatrixXd::Zero(4 * h, 1));
    b.block(h, 0, h, 1).setOnes();  // forget-gate bias
  }

  if (cfg_.mode == Mode::Gate) {
    params_.add_uniform("gate/W4", d2, d2, 0.08, seed);
    params_.add_uniform("gate/W5", d2, cfg_.cat_dim, 0.08, seed);
  }
  if (cfg_.mode == Mode::CondSelfAtt) {
    params_.add_uniform("att/W1", cfg_.att_dim, d2, 0.08, seed);
    params_.add_uniform("att/W2", cfg_.att_dim, d2, 0.08, seed);
    params_.add_uniform("att/W3", cfg_.att_dim, cfg_.cat_dim, 0.08, seed);
    params_.add_uniform("att/w_a", cfg_.att_dim, 1, 0.08, seed);
    params_.add("att/b_g", Eigen::MatrixXd::Zero(cfg_.att_dim, 1));
    params_.add("att/b_a", Eigen::MatrixXd::Zero(1, 1));
  }

  params_.add_uniform("emit/W", crf::kNumTags, d2, 0.08, seed);
  params_.add("emit/b", Eigen::MatrixXd::Zero(crf::kNumTags, 1));
  params_.add("crf/trans",
              Eigen::MatrixXd::Zero(crf::kExtTags, crf::kExtTags));

  if (cfg_.multitask != Multitask::Off) {
    const int d = cfg_.encoder_dim();
    params_.add_uniform("pool/W_c", cfg_.pool_dim, d, 0.08, seed);
    params_.add("pool/b_c", Eigen::MatrixXd::Zero(cfg_.pool_dim, 1));
    params_.add_uniform("pool/u_c", cfg_.pool_dim, 1, 0.08, seed);
    params_.add_uniform("clf/W_d", static_cast<int>(cat_order_.size()), d,
                        0.08, seed);
    params_.add("clf/b_d",
                Eigen::MatrixXd::Zero(static_cast<int>(cat_order_.size()), 1));
  }
}

EncodedProduct TaggerModel::encode(const ProductRecord& record,
                                   const std::string& attribute) const {
  EncodedProduct p;
  p.id = record.id;
  p.category_id = record.category_id;
  std::string text = record.title;
  if (cfg_.use_description && !record.description.empty())
    text += std::string(" ") + kDescBoundary + " " + record.description;
  p.text = tokenize(text);

  std::vector<std::string> values;
  auto it = record.attributes.find(attribute);
  if (it != record.attributes.end()) values = it->second;
  p.tags = label_distant(p.text, values);

  std::vector<std::string> prefix =
      prefix_tokens(tree_, record.category_id, cfg_.mode);
  p.content_begin = static_cast<int>(prefix.size());
  for (const auto& tok : prefix) p.ids.push_back(vocab_.lookup(tok));
  for (const auto& tok : p.text.normalized) p.ids.push_back(vocab_.lookup(tok));

  if (cfg_.multitask == Multitask::Hier) {
    HierTargets t = hierarchical_targets(tree_, record.category_id, cfg_.hier_w);
    p.cat_labels = t.labels;
    p.cat_weights = t.weights;
  } else if (cfg_.multitask == Multitask::Flat) {
    HierTargets t = flat_targets(tree_, record.category_id);
    p.cat_labels = t.labels;
    p.cat_weights = t.weights;
  } else {
    const int n = static_cast<int>(cat_order_.size());
    p.cat_labels = Eigen::VectorXd::Zero(n);
    p.cat_weights = Eigen::VectorXd::Ones(n);
  }
  return p;
}

Eigen::VectorXd TaggerModel::category_vector(const std::string& category_id) {
  if (!uses_category_embedding(cfg_.mode)) return Eigen::VectorXd();
  if (cat_emb_.has(category_id)) return cat_emb_.at(category_id);
  ++missing_cat_;  // fall back to the unconditioned behavior
  return Eigen::VectorXd::Zero(cfg_.cat_dim);
}

ad::Var TaggerModel::encode_sequence(ad::Tape& tape, const EncodedProduct& p,
                                     bool training,
                                     std::mt19937_64& dropout_rng,
                                     ad::Var* pooled_input) {
  const int T = static_cast<int>(p.ids.size());
  ad::Var E = embedding_lookup(params_.use(tape, "wemb"), p.ids);
  if (cfg_.mode == Mode::ConcatWemb) {
    Eigen::VectorXd ec = category_vector(p.category_id);
    Eigen::MatrixXd rep(T, cfg_.cat_dim);
    rep.rowwise() = ec.transpose();
    E = ad::hcat(E, tape.leaf(std::move(rep)));
  }
  ad::Var H = bilstm(params_, tape, E, "lstm", cfg_.hidden, T);
  H = dropout(H, cfg_.dropout, training, dropout_rng);
  if (pooled_input) *pooled_input = H;
  if (cfg_.mode == Mode::ConcatLstm) {
    Eigen::VectorXd ec = category_vector(p.category_id);
    Eigen::MatrixXd rep(T, cfg_.cat_dim);
    rep.rowwise() = ec.transpose();
    H = ad::hcat(H, tape.leaf(std::move(rep)));
  }
  return H;
}

ad::Var TaggerModel::condition(ad::Tape& tape, ad::Var H,
                               const Eigen::VectorXd& ec) {
  switch (cfg_.mode) {
    case Mode::Gate: {
      ad::Var gate_ctx = ad::matmul(params_.use(tape, "gate/W5"),
                                    tape.leaf(ec));
      ad::Var pre = ad::add_rowwise(
          ad::matmul_nt(H, params_.use(tape, "gate/W4")), gate_ctx);
      return ad::cmul(H, ad::sigmoid_(pre));
    }
    case Mode::CondSelfAtt: {
      const int T = static_cast<int>(H.value().rows());
      ad::Var A1 = ad::matmul_nt(H, params_.use(tape, "att/W1"));
      ad::Var A2 = ad::matmul_nt(H, params_.use(tape, "att/W2"));
      ad::Var ctx = ad::add(ad::matmul(params_.use(tape, "att/W3"),
                                       tape.leaf(ec)),
                            params_.use(tape, "att/b_g"));
      ad::Var A2c = ad::add_rowwise(A2, ctx);
      ad::Var w_a = params_.use(tape, "att/w_a");
      ad::Var b_a = params_.use(tape, "att/b_a");
      std::vector<ad::Var> rows_out;
      rows_out.reserve(T);
      for (int t = 0; t < T; ++t) {
        ad::Var g = ad::tanh_(ad::add_rowwise(A2c, ad::rows(A1, t, 1)));
        ad::Var alpha = ad::sigmoid_(ad::add_scalar(ad::matmul(g, w_a), b_a));
        rows_out.push_back(ad::matmul_tn(H, alpha));  // d2 x 1
      }
      return ad::stack_rows(rows_out);
    }
    default:
      return H;
  }
}

ad::Var TaggerModel::emissions(ad::Tape& tape, const EncodedProduct& p,
                               bool training, std::mt19937_64& dropout_rng,
                               ad::Var* pooled_input) {
  if (p.text.size() == 0)
    throw std::invalid_argument("cannot score an empty token sequence");
  ad::Var H = encode_sequence(tape, p, training, dropout_rng, pooled_input);
  Eigen::VectorXd ec = category_vector(p.category_id);
  ad::Var Ht = condition(tape, H, ec);
  ad::Var em = ad::add_rowwise(ad::matmul_nt(Ht, params_.use(tape, "emit/W")),
                               params_.use(tape, "emit/b"));
  if (p.content_begin > 0)
    em = ad::rows(em, p.content_begin, static_cast<int>(p.text.size()));
  return em;
}

TaggerModel::Losses TaggerModel::loss(ad::Tape& tape, const EncodedProduct& p,
                                      bool training,
                                      std::mt19937_64& dropout_rng) {
  Losses out;
  ad::Var pooled_in;
  ad::Var em = emissions(tape, p, training, dropout_rng,
                         cfg_.multitask != Multitask::Off ? &pooled_in
                                                          : nullptr);
  out.extraction =
      crf::neg_log_likelihood(em, params_.use(tape, "crf/trans"), p.tags);
  if (cfg_.multitask != Multitask::Off) {
    ad::Var pooled = attention_pool(params_, tape, pooled_in);
    ad::Var probs = ad::sigmoid_(dense(params_.use(tape, "clf/W_d"), pooled,
                                       params_.use(tape, "clf/b_d")));
    out.classification = weighted_bce(probs, p.cat_labels, p.cat_weights);
    out.combined =
        multitask_loss(out.extraction, out.classification, cfg_.gamma);
  } else {
    out.combined = out.extraction;
  }
  return out;
}

Eigen::MatrixXd TaggerModel::emission_matrix(const EncodedProduct& p) {
  ad::Tape tape;
  std::mt19937_64 rng(0);
  return emissions(tape, p, false, rng, nullptr).value();
}

TagSequence TaggerModel::predict_tags(const EncodedProduct& p) {
  if (p.text.size() == 0) return {};
  ad::Tape tape;
  std::mt19937_64 rng(0);
  ad::Var em = emissions(tape, p, false, rng, nullptr);
  return crf::viterbi_decode(em.value(), params_.at("crf/trans").value);
}

std::vector<std::string> TaggerModel::extract_values(const EncodedProduct& p) {
  return crf::extract_spans(p.text, predict_tags(p));
}

Eigen::VectorXd TaggerModel::predict_category_probs(const EncodedProduct& p) {
  if (cfg_.multitask == Multitask::Off)
    throw std::logic_error("model has no category head");
  if (p.text.size() == 0)
    throw std::invalid_argument("cannot classify an empty token sequence");
  ad::Tape tape;
  std::mt19937_64 rng(0);
  ad::Var pooled_in;
  (void)emissions(tape, p, false, rng, &pooled_in);
  ad::Var pooled = attention_pool(params_, tape, pooled_in);
  ad::Var probs = ad::sigmoid_(dense(params_.use(tape, "clf/W_d"), pooled,
                                     params_.use(tape, "clf/b_d")));
  return probs.value().col(0);
}

ad::Var multitask_loss(ad::Var extraction, ad::Var classification,
                       double gamma) {
  if (gamma < 0.0 || gamma > 1.0)
    throw std::invalid_argument("gamma must be in [0, 1]");
  return ad::add(ad::scale(extraction, gamma),
                 ad::scale(classification, 1.0 - gamma));
}

ad::Var weighted_bce(ad::Var probs, const Eigen::VectorXd& labels,
                     const Eigen::VectorXd& weights) {
  const Eigen::ArrayXd p =
      probs.value().col(0).array().max(kProbClip).min(1.0 - kProbClip);
  const Eigen::ArrayXd y = labels.array();
  const Eigen::ArrayXd w = weights.array();
  const double loss = -(w * (y * p.log() + (1.0 - y) * (1.0 - p).log())).sum();
  Eigen::VectorXd dp = (-(w * (y / p - (1.0 - y) / (1.0 - p)))).matrix();
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = loss;
  int ip = probs.idx;
  return probs.tape->make(std::move(out),
                          [ip, dp](ad::Tape& t, const ad::Tape::Node& n) {
                            t.node(ip).grad.col(0) += n.grad(0, 0) * dp;
                          });
}

ad::Var attention_pool(ParameterStore& params, ad::Tape& tape, ad::Var H) {
  if (H.value().rows() == 0)
    throw std::invalid_argument("attention_pool on an empty sequence");
  ad::Var M = ad::tanh_(ad::add_rowwise(
      ad::matmul_nt(H, params.use(tape, "pool/W_c")),
      params.use(tape, "pool/b_c")));
  ad::Var scores = ad::matmul(M, params.use(tape, "pool/u_c"));  // T x 1
  ad::Var beta = ad::softmax_col(scores);
  return ad::matmul_tn(H, beta);  // d x 1
}

}  // namespace taxotag
