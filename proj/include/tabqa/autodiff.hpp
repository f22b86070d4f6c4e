#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace tabqa::ad {

using Mat = Eigen::MatrixXd;

/// Handle to a node on a Tape. Scalars are 1x1 matrices.
struct Var {
  int id = -1;
};

/// Reverse-mode tape over small dense matrices. Values are computed eagerly
/// when an op is recorded; backward() walks the tape once in reverse and
/// accumulates into the gradient buffers passed to param().
class Tape {
public:
  static constexpr double kLogFloor = 1e-12;

  Var param(const Mat& value, Mat* grad) { return push(Op::Param, {}, value, 0, grad); }
  Var constant(Mat value) { return push(Op::Const, {}, std::move(value)); }

  Var matmul(Var a, Var b) { return push(Op::MatMul, {a.id, b.id}, val(a) * val(b)); }
  Var add(Var a, Var b) { return push(Op::Add, {a.id, b.id}, val(a) + val(b)); }
  Var sub(Var a, Var b) { return push(Op::Sub, {a.id, b.id}, val(a) - val(b)); }
  Var cmul(Var a, Var b) { return push(Op::CMul, {a.id, b.id}, val(a).cwiseProduct(val(b))); }
  Var tanh(Var a) { return push(Op::Tanh, {a.id}, val(a).array().tanh().matrix()); }
  Var sigmoid(Var a) {
    Mat v = val(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return push(Op::Sigmoid, {a.id}, std::move(v));
  }
  Var one_minus(Var a) { return push(Op::OneMinus, {a.id}, (1.0 - val(a).array()).matrix()); }
  Var scale(Var a, double s) { return push(Op::ScaleConst, {a.id}, val(a) * s, s); }
  /// a (any shape) times scalar node s.
  Var scale_by(Var a, Var s) { return push(Op::ScaleBy, {a.id, s.id}, val(a) * val(s)(0, 0)); }
  Var transpose(Var a) { return push(Op::Transpose, {a.id}, val(a).transpose()); }
  Var col(Var a, std::size_t j) {
    return push(Op::Col, {a.id}, val(a).col(static_cast<long>(j)), static_cast<double>(j));
  }
  /// Element i of a column vector, as a scalar.
  Var at(Var a, std::size_t i) {
    Mat v(1, 1);
    v(0, 0) = val(a)(static_cast<long>(i), 0);
    return push(Op::At, {a.id}, std::move(v), static_cast<double>(i));
  }
  /// Column vector padded with `extra` zero rows.
  Var pad_rows(Var a, std::size_t extra) {
    Mat v = Mat::Zero(val(a).rows() + static_cast<long>(extra), val(a).cols());
    v.topRows(val(a).rows()) = val(a);
    return push(Op::PadRows, {a.id}, std::move(v));
  }
  Var vcat(Var a, Var b) {
    Mat v(val(a).rows() + val(b).rows(), val(a).cols());
    v << val(a), val(b);
    return push(Op::VCat, {a.id, b.id}, std::move(v));
  }
  /// Column vectors side by side.
  Var hcat(const std::vector<Var>& cols) {
    Mat v(val(cols[0]).rows(), static_cast<long>(cols.size()));
    std::vector<int> args;
    for (std::size_t j = 0; j < cols.size(); ++j) {
      v.col(static_cast<long>(j)) = val(cols[j]);
      args.push_back(cols[j].id);
    }
    return push(Op::HCat, std::move(args), std::move(v));
  }
  /// Softmax of a column vector.
  Var softmax(Var a) {
    const Mat& x = val(a);
    Mat e = (x.array() - x.maxCoeff()).exp().matrix();
    return push(Op::Softmax, {a.id}, e / e.sum());
  }
  /// log(max(a, 1e-12)) of a scalar; the clamp counts as a flat region.
  Var log_clamped(Var a) {
    double x = val(a)(0, 0);
    if (x < kLogFloor) ++clamps_;
    Mat v(1, 1);
    v(0, 0) = std::log(std::max(x, kLogFloor));
    return push(Op::Log, {a.id}, std::move(v));
  }

  const Mat& val(Var a) const { return nodes_[static_cast<std::size_t>(a.id)].v; }
  double scalar(Var a) const { return val(a)(0, 0); }
  std::size_t clamps() const { return clamps_; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(out)/d(out) = 1 and accumulates into every param gradient.
  void backward(Var out) {
    for (auto& n : nodes_) n.g = Mat::Zero(n.v.rows(), n.v.cols());
    nodes_[static_cast<std::size_t>(out.id)].g.setOnes();
    for (std::size_t k = nodes_.size(); k-- > 0;) {
      Node& n = nodes_[k];
      const Mat& g = n.g;
      auto A = [&](std::size_t i) -> Node& { return nodes_[static_cast<std::size_t>(n.args[i])]; };
      switch (n.op) {
        case Op::Param:
          if (n.grad) *n.grad += g;
          break;
        case Op::Const: break;
        case Op::MatMul:
          A(0).g.noalias() += g * A(1).v.transpose();
          A(1).g.noalias() += A(0).v.transpose() * g;
          break;
        case Op::Add:
          A(0).g += g;
          A(1).g += g;
          break;
        case Op::Sub:
          A(0).g += g;
          A(1).g -= g;
          break;
        case Op::CMul:
          A(0).g += g.cwiseProduct(A(1).v);
          A(1).g += g.cwiseProduct(A(0).v);
          break;
        case Op::Tanh: A(0).g += g.cwiseProduct((1.0 - n.v.array().square()).matrix()); break;
        case Op::Sigmoid: A(0).g += g.cwiseProduct((n.v.array() * (1.0 - n.v.array())).matrix()); break;
        case Op::OneMinus: A(0).g -= g; break;
        case Op::ScaleConst: A(0).g += g * n.s; break;
        case Op::ScaleBy:
          A(0).g += g * A(1).v(0, 0);
          A(1).g(0, 0) += g.cwiseProduct(A(0).v).sum();
          break;
        case Op::Transpose: A(0).g += g.transpose(); break;
        case Op::Col: A(0).g.col(static_cast<long>(n.s)) += g; break;
        case Op::At: A(0).g(static_cast<long>(n.s), 0) += g(0, 0); break;
        case Op::PadRows: A(0).g += g.topRows(A(0).v.rows()); break;
        case Op::VCat: {
          long r = A(0).v.rows();
          A(0).g += g.topRows(r);
          A(1).g += g.bottomRows(g.rows() - r);
          break;
        }
        case Op::HCat:
          for (std::size_t j = 0; j < n.args.size(); ++j) A(j).g += g.col(static_cast<long>(j));
          break;
        case Op::Softmax: {
          double gy = g.cwiseProduct(n.v).sum();
          A(0).g += (n.v.array() * (g.array() - gy)).matrix();
          break;
        }
        case Op::Log: {
          double x = A(0).v(0, 0);
          if (x >= kLogFloor) A(0).g(0, 0) += g(0, 0) / x;
          break;
        }
      }
    }
  }

private:
  enum class Op {
    Param, Const, MatMul, Add, Sub, CMul, Tanh, Sigmoid, OneMinus, ScaleConst, ScaleBy,
    Transpose, Col, At, PadRows, VCat, HCat, Softmax, Log
  };
  struct Node {
    Op op;
    std::vector<int> args;
    Mat v;
    Mat g;
    double s = 0;
    Mat* grad = nullptr;
  };

  Var push(Op op, std::vector<int> args, Mat v, double s = 0, Mat* grad = nullptr) {
    nodes_.push_back(Node{op, std::move(args), std::move(v), Mat(), s, grad});
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  std::size_t clamps_ = 0;
};

} // namespace tabqa::ad
