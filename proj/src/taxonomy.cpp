#include "taxotag/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace taxotag {

TaxonomyTree TaxonomyTree::from_edges(
    const std::vector<std::pair<std::string, std::string>>& child_parent,
    const std::string& root_id) {
  TaxonomyTree t;
  t.root_ = root_id;
  t.order_.push_back(root_id);
  t.level_[root_id] = 0;
  t.children_[root_id];
  for (const auto& [child, parent] : child_parent) {
    if (child == root_id)
      throw std::runtime_error("root node " + root_id + " listed with a parent");
    if (t.parent_.count(child))
      throw std::runtime_error("node " + child + " has two parents");
    t.parent_[child] = parent;
    t.children_[parent].push_back(child);
    t.order_.push_back(child);
  }
  // BFS from the root assigns levels; anything unreached sits on a cycle or
  // dangles from an unknown parent.
  std::deque<std::string> queue{root_id};
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    auto it = t.children_.find(cur);
    if (it == t.children_.end()) continue;
    for (const auto& child : it->second) {
      t.level_[child] = t.level_[cur] + 1;
      queue.push_back(child);
    }
  }
  for (const auto& [child, parent] : child_parent) {
    if (!t.level_.count(child))
      throw std::runtime_error("taxonomy edge " + child + " -> " + parent +
                               " is unreachable from the root (cycle or "
                               "unknown parent)");
  }
  return t;
}

int TaxonomyTree::level(const std::string& id) const {
  auto it = level_.find(id);
  if (it == level_.end())
    throw std::runtime_error("unknown taxonomy node: " + id);
  return it->second;
}

const std::string& TaxonomyTree::parent(const std::string& id) const {
  auto it = parent_.find(id);
  if (it == parent_.end())
    throw std::runtime_error("node has no parent: " + id);
  return it->second;
}

const std::vector<std::string>& TaxonomyTree::children(
    const std::string& id) const {
  static const std::vector<std::string> empty;
  auto it = children_.find(id);
  return it == children_.end() ? empty : it->second;
}

std::vector<std::string> TaxonomyTree::non_root_nodes() const {
  std::vector<std::string> out;
  for (const auto& id : order_)
    if (id != root_) out.push_back(id);
  return out;
}

std::vector<std::string> TaxonomyTree::ancestor_path(
    const std::string& id) const {
  if (!contains(id)) throw std::runtime_error("unknown taxonomy node: " + id);
  std::vector<std::string> path;
  std::string cur = id;
  while (cur != root_) {
    path.push_back(cur);
    cur = parent(cur);
  }
  return path;
}

std::vector<std::pair<std::string, std::string>> TaxonomyTree::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& id : order_)
    if (id != root_) out.emplace_back(id, parent_.at(id));
  return out;
}

TaxonomyTree load_taxonomy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open taxonomy file: " + path);
  std::string line;
  std::string root;
  std::vector<std::pair<std::string, std::string>> edges;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": bad taxonomy line: " + e.what());
    }
    std::string id = j.at("id").get<std::string>();
    if (j.at("parent").is_null()) {
      if (!root.empty())
        throw std::runtime_error("taxonomy has two roots: " + root + ", " + id);
      root = id;
    } else {
      edges.emplace_back(id, j.at("parent").get<std::string>());
    }
  }
  if (root.empty()) throw std::runtime_error("taxonomy has no root");
  return TaxonomyTree::from_edges(edges, root);
}

const Eigen::VectorXd& CategoryEmbeddingTable::at(const std::string& id) const {
  auto it = vectors.find(id);
  if (it == vectors.end())
    throw std::runtime_error("no embedding for category: " + id);
  return it->second;
}

double poincare_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  const double nu = u.squaredNorm();
  const double nv = v.squaredNorm();
  if (nu >= 1.0 || nv >= 1.0)
    throw std::domain_error("poincare_distance: argument outside the open ball");
  const double diff = (u - v).squaredNorm();
  const double gamma = 1.0 + 2.0 * diff / ((1.0 - nu) * (1.0 - nv));
  return std::acosh(std::max(gamma, 1.0));
}

static void project_into_ball(Eigen::VectorXd& v) {
  const double n = v.norm();
  const double limit = 1.0 - kBallMargin;
  if (n >= limit) v *= limit / n;
}

// Euclidean gradient of d(u,v) with respect to u.
static Eigen::VectorXd poincare_dist_grad_u(const Eigen::VectorXd& u,
                                            const Eigen::VectorXd& v) {
  const double alpha = 1.0 - u.squaredNorm();
  const double beta = 1.0 - v.squaredNorm();
  const double diff = (u - v).squaredNorm();
  const double gamma = 1.0 + 2.0 * diff / (alpha * beta);
  const double denom = std::sqrt(std::max(gamma * gamma - 1.0, 1e-30));
  const double c = 4.0 / (beta * denom);
  return c * ((v.squaredNorm() - 2.0 * u.dot(v) + 1.0) / (alpha * alpha) * u -
              v / alpha);
}

CategoryEmbeddingTable train_embeddings(const TaxonomyTree& tree,
                                        const EmbedTrainConfig& cfg) {
  if (cfg.dim < 2) throw std::invalid_argument("embedding dim must be >= 2");
  const auto& nodes = tree.nodes();
  const int n = static_cast<int>(nodes.size());
  std::map<std::string, int> index;
  for (int i = 0; i < n; ++i) index[nodes[i]] = i;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> init(-0.001, 0.001);
  Eigen::MatrixXd emb(n, cfg.dim);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < cfg.dim; ++k) emb(i, k) = init(rng);

  auto edges = tree.edges();
  // Non-neighbor candidate pool per child node.
  std::vector<std::vector<int>> neg_pool(n);
  for (const auto& [child, parent] : edges) {
    int u = index[child];
    std::vector<bool> excluded(n, false);
    excluded[u] = true;
    excluded[index[parent]] = true;
    for (const auto& c : tree.children(child)) excluded[index[c]] = true;
    for (int i = 0; i < n; ++i)
      if (!excluded[i]) neg_pool[u].push_back(i);
  }

  auto distance = [&](int a, int b) {
    if (cfg.euclidean) return (emb.row(a) - emb.row(b)).norm();
    return poincare_distance(emb.row(a).transpose(), emb.row(b).transpose());
  };
  auto dist_grad = [&](int a, int b) -> Eigen::VectorXd {
    // gradient with respect to the first argument
    if (cfg.euclidean) {
      Eigen::VectorXd diff = (emb.row(a) - emb.row(b)).transpose();
      const double d = diff.norm();
      return d < 1e-12 ? Eigen::VectorXd::Zero(cfg.dim)
                       : Eigen::VectorXd(diff / d);
    }
    return poincare_dist_grad_u(emb.row(a).transpose(),
                                emb.row(b).transpose());
  };
  auto apply = [&](int node, const Eigen::VectorXd& euclid_grad, double lr) {
    if (cfg.euclidean) {
      emb.row(node) -= lr * euclid_grad.transpose();
      return;
    }
    const double alpha = 1.0 - emb.row(node).squaredNorm();
    emb.row(node) -= lr * (alpha * alpha / 4.0) * euclid_grad.transpose();
    Eigen::VectorXd row = emb.row(node).transpose();
    project_into_ball(row);
    emb.row(node) = row.transpose();
  };

  std::vector<int> order(edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = epoch < cfg.burn_in_epochs ? cfg.lr / 10.0 : cfg.lr;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng() % i]);
    for (int ei : order) {
      const int u = index[edges[ei].first];
      const int v = index[edges[ei].second];
      const auto& pool = neg_pool[u];
      std::vector<int> cand{v};
      for (int k = 0; k < cfg.negatives && !pool.empty(); ++k)
        cand.push_back(pool[rng() % pool.size()]);

      Eigen::VectorXd d(cand.size());
      for (std::size_t c = 0; c < cand.size(); ++c) d(c) = distance(u, cand[c]);
      Eigen::VectorXd logits = -d;
      const double mx = logits.maxCoeff();
      Eigen::VectorXd p = (logits.array() - mx).exp();
      p /= p.sum();
      const double loss = -std::log(std::max(p(0), 1e-300));
      if (!std::isfinite(loss))
        throw std::runtime_error(
            "non-finite embedding loss at epoch " + std::to_string(epoch) +
            ", edge " + edges[ei].first + " -> " + edges[ei].second);

      // dL/dd(u,cand_c): (p_c - [c==0]) * (-1) chain from logits = -d.
      Eigen::VectorXd grad_u = Eigen::VectorXd::Zero(cfg.dim);
      for (std::size_t c = 0; c < cand.size(); ++c) {
        const double dl_dd = (c == 0 ? p(0) - 1.0 : p(c)) * -1.0;
        if (cand[c] == u) continue;
        grad_u += dl_dd * dist_grad(u, cand[c]);
        apply(cand[c], dl_dd * dist_grad(cand[c], u), lr);
      }
      apply(u, grad_u, lr);
    }
  }

  CategoryEmbeddingTable table;
  table.dim = cfg.dim;
  for (int i = 0; i < n; ++i) table.vectors[nodes[i]] = emb.row(i).transpose();
  return table;
}

double mean_edge_distance(const TaxonomyTree& tree,
                          const CategoryEmbeddingTable& table, bool euclidean) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& [child, parent] : tree.edges()) {
    const auto& u = table.at(child);
    const auto& v = table.at(parent);
    sum += euclidean ? (u - v).norm() : poincare_distance(u, v);
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

void save_embeddings(const CategoryEmbeddingTable& table,
                     const std::vector<std::string>& order,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path);
  out << std::setprecision(17);
  for (const auto& id : order) {
    out << id;
    const auto& v = table.at(id);
    for (int k = 0; k < v.size(); ++k) out << ' ' << v(k);
    out << '\n';
  }
}

CategoryEmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  CategoryEmbeddingTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    ls >> id;
    std::vector<double> vals;
    double x;
    while (ls >> x) vals.push_back(x);
    if (table.dim == 0) table.dim = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != table.dim)
      throw std::runtime_error("inconsistent embedding dimension for " + id);
    table.vectors[id] =
        Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<int>(vals.size()));
  }
  return table;
}

static HierTargets make_targets(const TaxonomyTree& tree) {
  HierTargets t;
  t.node_order = tree.non_root_nodes();
  t.labels = Eigen::VectorXd::Zero(static_cast<int>(t.node_order.size()));
  t.weights = Eigen::VectorXd::Ones(static_cast<int>(t.node_order.size()));
  return t;
}

HierTargets hierarchical_targets(const TaxonomyTree& tree,
                                 const std::string& assigned, double w) {
  if (w <= 0.0 || w > 1.0)
    throw std::invalid_argument("hierarchy weight w must be in (0, 1]");
  HierTargets t = make_targets(tree);
  std::map<std::string, int> index;
  for (int i = 0; i < static_cast<int>(t.node_order.size()); ++i)
    index[t.node_order[i]] = i;
  auto path = tree.ancestor_path(assigned);
  const double neg_weight =
      path.empty() ? 1.0 : std::pow(w, static_cast<double>(path.size() - 1));
  t.weights.setConstant(neg_weight);
  for (std::size_t k = 0; k < path.size(); ++k) {
    const int i = index.at(path[k]);
    t.labels(i) = 1.0;
    t.weights(i) = std::pow(w, static_cast<double>(k));
  }
  return t;
}

HierTargets flat_targets(const TaxonomyTree& tree, const std::string& assigned) {
  if (!tree.contains(assigned))
    throw std::runtime_error("unknown taxonomy node: " + assigned);
  HierTargets t = make_targets(tree);
  for (int i = 0; i < static_cast<int>(t.node_order.size()); ++i)
    if (t.node_order[i] == assigned) t.labels(i) = 1.0;
  return t;
}

}  // namespace taxotag
