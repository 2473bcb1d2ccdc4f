#ifndef TAXOTAG_TAXONOMY_HPP
#define TAXOTAG_TAXONOMY_HPP

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace taxotag {

// Rooted category tree. The root carries no parent; levels count edges from
// the root.
class TaxonomyTree {
 public:
  static TaxonomyTree from_edges(
      const std::vector<std::pair<std::string, std::string>>& child_parent,
      const std::string& root_id);

  const std::string& root() const { return root_; }
  bool contains(const std::string& id) const { return level_.count(id) > 0; }
  std::size_t size() const { return level_.size(); }
  int level(const std::string& id) const;
  const std::string& parent(const std::string& id) const;
  const std::vector<std::string>& children(const std::string& id) const;

  // Node ids in a fixed deterministic order (insertion order of the file).
  const std::vector<std::string>& nodes() const { return order_; }
  // Non-root nodes in the same order; the classification target space.
  std::vector<std::string> non_root_nodes() const;

  // [node, parent(node), ..., child-of-root]; root excluded.
  std::vector<std::string> ancestor_path(const std::string& id) const;

  std::vector<std::pair<std::string, std::string>> edges() const;

 private:
  std::string root_;
  std::vector<std::string> order_;
  std::map<std::string, std::string> parent_;
  std::map<std::string, std::vector<std::string>> children_;
  std::map<std::string, int> level_;
};

// JSON-lines {"id":..., "parent":...} with "parent": null on the root.
TaxonomyTree load_taxonomy(const std::string& path);

struct CategoryEmbeddingTable {
  int dim = 0;
  std::map<std::string, Eigen::VectorXd> vectors;

  bool has(const std::string& id) const { return vectors.count(id) > 0; }
  const Eigen::VectorXd& at(const std::string& id) const;
};

inline constexpr double kBallMargin = 1e-5;

// Hyperbolic distance on the open unit ball.
double poincare_distance(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

struct EmbedTrainConfig {
  int dim = 50;
  int epochs = 200;
  double lr = 0.5;
  int negatives = 10;
  int burn_in_epochs = 10;
  std::uint64_t seed = 0;
  bool euclidean = false;  // plain SGD + Euclidean distance baseline
};

// Trains one embedding per taxonomy node with a softmax-over-negatives edge
// loss. Riemannian SGD on the ball (or plain SGD in the Euclidean variant).
CategoryEmbeddingTable train_embeddings(const TaxonomyTree& tree,
                                        const EmbedTrainConfig& cfg);

double mean_edge_distance(const TaxonomyTree& tree,
                          const CategoryEmbeddingTable& table, bool euclidean);

void save_embeddings(const CategoryEmbeddingTable& table,
                     const std::vector<std::string>& order,
                     const std::string& path);
CategoryEmbeddingTable load_embeddings(const std::string& path);

// Per-node binary labels and loss weights for category prediction. The root
// is excluded from the target space.
struct HierTargets {
  std::vector<std::string> node_order;  // tree.non_root_nodes()
  Eigen::VectorXd labels;               // 0/1
  Eigen::VectorXd weights;              // > 0
};

// Positives on the path from the assigned node up to (excluding) the root,
// weighted w^0 .. w^(K-1) upward; all negatives get w^(K-1).
HierTargets hierarchical_targets(const TaxonomyTree& tree,
                                 const std::string& assigned, double w);
// Single positive at the assigned node, all weights 1.
HierTargets flat_targets(const TaxonomyTree& tree, const std::string& assigned);

}  // namespace taxotag

#endif  // TAXOTAG_TAXONOMY_HPP
