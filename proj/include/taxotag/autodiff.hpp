#ifndef TAXOTAG_AUTODIFF_HPP
#define TAXOTAG_AUTODIFF_HPP

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace taxotag::ad {

class Tape;

// Handle to a node on the tape. Values are dense double matrices; column
// vectors are n x 1.
struct Var {
  Tape* tape = nullptr;
  int idx = -1;
  bool valid() const { return tape != nullptr; }
  const Eigen::MatrixXd& value() const;
  double scalar() const;
};

class Tape {
 public:
  Tape();

  // Distinguishes tape instances even when storage addresses are reused.
  std::uint64_t id() const { return id_; }

  struct Node {
    Eigen::MatrixXd val;
    Eigen::MatrixXd grad;
    std::function<void(Tape&, const Node&)> back;  // may be empty (leaf)
  };

  Var leaf(Eigen::MatrixXd value);
  Var make(Eigen::MatrixXd value, std::function<void(Tape&, const Node&)> back);

  Node& node(int i) { return nodes_[i]; }
  const Node& node(int i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar loss node; fills every node's grad.
  void backward(Var loss);

  Eigen::MatrixXd& grad(Var v) { return nodes_[v.idx].grad; }

 private:
  std::uint64_t id_;
  std::vector<Node> nodes_;
};

// --- elementwise / structural ops -----------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);                  // elementwise product
Var scale(Var a, double s);
Var add_scalar(Var a, Var s);            // s is a 1x1 node, broadcast
Var tanh_(Var a);
Var sigmoid_(Var a);
Var matmul(Var a, Var b);                // a * b
Var matmul_nt(Var a, Var b);             // a * b^T
Var matmul_tn(Var a, Var b);             // a^T * b
Var rows(Var a, int r0, int n);          // contiguous row slice
Var cols(Var a, int c0, int n);          // contiguous column slice
Var stack_rows(const std::vector<Var>& cols);  // k column vectors -> k x n
Var concat_rows(const std::vector<Var>& rows); // k row vectors (1 x n) -> k x n
Var hcat(Var a, Var b);                  // [a b]
Var add_rowwise(Var m, Var row);         // add 1 x n (or n x 1) row vector to every row
Var sum(Var a);                          // 1x1
Var mean_of(const std::vector<Var>& scalars);
Var softmax_col(Var a);                  // softmax over a column vector
Var constant(Tape& t, const Eigen::MatrixXd& value);  // leaf with no grad use

// log(sum(exp(a))) over all entries of a; 1x1 output.
Var logsumexp(Var a);

}  // namespace taxotag::ad

#endif  // TAXOTAG_AUTODIFF_HPP
