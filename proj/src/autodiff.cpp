#include "taxotag/autodiff.hpp"

#include <atomic>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace taxotag::ad {

const Eigen::MatrixXd& Var::value() const { return tape->node(idx).val; }

double Var::scalar() const {
  const auto& v = value();
  assert(v.rows() == 1 && v.cols() == 1);
  return v(0, 0);
}

Tape::Tape() {
  static std::atomic<std::uint64_t> next{1};
  id_ = next.fetch_add(1);
}

Var Tape::leaf(Eigen::MatrixXd value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::make(Eigen::MatrixXd value,
               std::function<void(Tape&, const Node&)> back) {
  nodes_.push_back(Node{std::move(value), {}, std::move(back)});
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::logic_error("loss not on this tape");
  for (auto& n : nodes_) n.grad = Eigen::MatrixXd::Zero(n.val.rows(), n.val.cols());
  nodes_[loss.idx].grad(0, 0) = 1.0;
  for (int i = loss.idx; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back(*this, nodes_[i]);
}

static Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape) throw std::logic_error("vars on different tapes");
  return *a.tape;
}

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  int ia = a.idx, ib = b.idx;
  return t.make(a.value() + b.value(), [ia, ib](Tape& t, const Tape::Node& n) {
    t.node(ia).grad += n.grad;
    t.node(ib).grad += n.grad;
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  int ia = a.idx, ib = b.idx;
  return t.make(a.value() - b.value(), [ia, ib](Tape& t, const Tape::Node& n) {
    t.node(ia).grad += n.grad;
    t.node(ib).grad -= n.grad;
  });
}

Var cmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  int ia = a.idx, ib = b.idx;
  return t.make(a.value().cwiseProduct(b.value()),
                [ia, ib](Tape& t, const Tape::Node& n) {
                  t.node(ia).grad += n.grad.cwiseProduct(t.node(ib).val);
                  t.node(ib).grad += n.grad.cwiseProduct(t.node(ia).val);
                });
}

Var scale(Var a, double s) {
  int ia = a.idx;
  return a.tape->make(a.value() * s, [ia, s](Tape& t, const Tape::Node& n) {
    t.node(ia).grad += n.grad * s;
  });
}

Var add_scalar(Var a, Var s) {
  Tape& t = same_tape(a, s);
  int ia = a.idx, is = s.idx;
  return t.make(a.value().array() + s.scalar(),
                [ia, is](Tape& t, const Tape::Node& n) {
                  t.node(ia).grad += n.grad;
                  t.node(is).grad(0, 0) += n.grad.sum();
                });
}

Var tanh_(Var a) {
  int ia = a.idx;
  Eigen::MatrixXd y = a.value().array().tanh();
  return a.tape->make(std::move(y), [ia](Tape& t, const Tape::Node& n) {
    t.node(ia).grad.array() += n.grad.array() * (1.0 - n.val.array().square());
  });
}

Var sigmoid_(Var a) {
  int ia = a.idx;
  Eigen::MatrixXd y = (1.0 + (-a.value().array()).exp()).inverse();
  return a.tape->make(std::move(y), [ia](Tape& t, const Tape::Node& n) {
    t.node(ia).grad.array() +=
        n.grad.array() * n.val.array() * (1.0 - n.val.array());
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  int ia = a.idx, ib = b.idx;
  return t.make(a.value() * b.value(), [ia, ib](Tape& t, const Tape::Node& n) {
    t.node(ia).grad += n.grad * t.node(ib).val.transpose();
    t.node(ib).grad += t.node(ia).val.transpose() * n.grad;
  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = same_tape(a, b);
  int ia = a.idx, ib = b.idx;
  return t.make(a.value() * b.value().transpose(),
                [ia, ib](Tape& t, const Tape::Node& n) {
                  t.node(ia).grad += n.grad * t.node(ib).val;
                  t.node(ib).grad += n.grad.transpose() * t.node(ia).val;
                });
}

Var matmul_tn(Var a, Var b) {
  Tape& t = same_tape(a, b);
  int ia = a.idx, ib = b.idx;
  return t.make(a.value().transpose() * b.value(),
                [ia, ib](Tape& t, const Tape::Node& n) {
                  t.node(ia).grad += t.node(ib).val * n.grad.transpose();
                  t.node(ib).grad += t.node(ia).val * n.grad;
                });
}

Var rows(Var a, int r0, int n) {
  int ia = a.idx;
  return a.tape->make(a.value().middleRows(r0, n),
                      [ia, r0, n](Tape& t, const Tape::Node& nd) {
                        t.node(ia).grad.middleRows(r0, n) += nd.grad;
                      });
}

Var cols(Var a, int c0, int n) {
  int ia = a.idx;
  return a.tape->make(a.value().middleCols(c0, n),
                      [ia, c0, n](Tape& t, const Tape::Node& nd) {
                        t.node(ia).grad.middleCols(c0, n) += nd.grad;
                      });
}

Var concat_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw std::logic_error("concat_rows of nothing");
  Tape& t = *rows[0].tape;
  const int k = static_cast<int>(rows.size());
  const int n = static_cast<int>(rows[0].value().cols());
  Eigen::MatrixXd m(k, n);
  std::vector<int> idx(rows.size());
  for (int i = 0; i < k; ++i) {
    m.row(i) = rows[i].value().row(0);
    idx[i] = rows[i].idx;
  }
  return t.make(std::move(m), [idx](Tape& t, const Tape::Node& n) {
    for (std::size_t i = 0; i < idx.size(); ++i)
      t.node(idx[i]).grad += n.grad.row(static_cast<int>(i));
  });
}

Var hcat(Var a, Var b) {
  Tape& t = same_tape(a, b);
  int ia = a.idx, ib = b.idx;
  const int ca = static_cast<int>(a.value().cols());
  const int cb = static_cast<int>(b.value().cols());
  Eigen::MatrixXd m(a.value().rows(), ca + cb);
  m << a.value(), b.value();
  return t.make(std::move(m), [ia, ib, ca, cb](Tape& t, const Tape::Node& n) {
    t.node(ia).grad += n.grad.leftCols(ca);
    t.node(ib).grad += n.grad.rightCols(cb);
  });
}

Var stack_rows(const std::vector<Var>& cols) {
  if (cols.empty()) throw std::logic_error("stack_rows of nothing");
  Tape& t = *cols[0].tape;
  const int k = static_cast<int>(cols.size());
  const int n = static_cast<int>(cols[0].value().rows());
  Eigen::MatrixXd m(k, n);
  std::vector<int> idx(cols.size());
  for (int i = 0; i < k; ++i) {
    m.row(i) = cols[i].value().transpose();
    idx[i] = cols[i].idx;
  }
  return t.make(std::move(m), [idx](Tape& t, const Tape::Node& n) {
    for (std::size_t i = 0; i < idx.size(); ++i)
      t.node(idx[i]).grad += n.grad.row(static_cast<int>(i)).transpose();
  });
}

Var add_rowwise(Var m, Var row) {
  Tape& t = same_tape(m, row);
  int im = m.idx, ir = row.idx;
  Eigen::RowVectorXd r = row.value().rows() == 1
                             ? Eigen::RowVectorXd(row.value().row(0))
                             : Eigen::RowVectorXd(row.value().col(0).transpose());
  const bool row_is_col = row.value().rows() != 1;
  Eigen::MatrixXd y = m.value().rowwise() + r;
  return t.make(std::move(y), [im, ir, row_is_col](Tape& t, const Tape::Node& n) {
    t.node(im).grad += n.grad;
    if (row_is_col)
      t.node(ir).grad += n.grad.colwise().sum().transpose();
    else
      t.node(ir).grad += n.grad.colwise().sum();
  });
}

Var sum(Var a) {
  int ia = a.idx;
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = a.value().sum();
  return a.tape->make(std::move(y), [ia](Tape& t, const Tape::Node& n) {
    t.node(ia).grad.array() += n.grad(0, 0);
  });
}

Var mean_of(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw std::logic_error("mean of nothing");
  Tape& t = *scalars[0].tape;
  double m = 0.0;
  std::vector<int> idx(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    m += scalars[i].scalar();
    idx[i] = scalars[i].idx;
  }
  m /= static_cast<double>(scalars.size());
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = m;
  const double inv = 1.0 / static_cast<double>(scalars.size());
  return t.make(std::move(y), [idx, inv](Tape& t, const Tape::Node& n) {
    for (int i : idx) t.node(i).grad(0, 0) += n.grad(0, 0) * inv;
  });
}

Var softmax_col(Var a) {
  int ia = a.idx;
  Eigen::ArrayXd x = a.value().col(0).array();
  Eigen::ArrayXd e = (x - x.maxCoeff()).exp();
  Eigen::VectorXd p = (e / e.sum()).matrix();
  return a.tape->make(p, [ia](Tape& t, const Tape::Node& n) {
    const Eigen::VectorXd& p = n.val.col(0);
    const Eigen::VectorXd& g = n.grad.col(0);
    const double dot = p.dot(g);
    t.node(ia).grad.col(0) += p.cwiseProduct(g.array().matrix() -
                                             Eigen::VectorXd::Constant(p.size(), dot));
  });
}

Var constant(Tape& t, const Eigen::MatrixXd& value) { return t.leaf(value); }

Var logsumexp(Var a) {
  int ia = a.idx;
  const Eigen::ArrayXXd x = a.value().array();
  const double mx = x.maxCoeff();
  const Eigen::ArrayXXd e = (x - mx).exp();
  const double s = e.sum();
  Eigen::MatrixXd y(1, 1);
  y(0, 0) = mx + std::log(s);
  Eigen::MatrixXd softmax = (e / s).matrix();
  return a.tape->make(std::move(y),
                      [ia, softmax](Tape& t, const Tape::Node& n) {
                        t.node(ia).grad += n.grad(0, 0) * softmax;
                      });
}

}  // namespace taxotag::ad
