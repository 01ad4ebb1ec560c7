#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tvae/matrix.hpp"

namespace tvae::ad {

enum class Activation { kRelu, kTanh, kSigmoid, kSoftplus, kIdentity };

std::string to_string(Activation kind);
Activation activation_from_string(const std::string& name);

// Numerically safe scalar activations, shared with non-graph code paths.
double sigmoid(double x);
double softplus(double x);

class Graph;

/// One node of the computation graph: a value, a gradient slot of the same
/// shape, the parent links, and the rule that pushes this node's gradient
/// into its parents. Nodes are owned by the Graph that created them.
struct Node {
  Matrix value;
  Matrix grad;
  std::vector<Node*> parents;
  std::function<void()> backward;  // empty for leaves
  std::size_t id = 0;
  Graph* graph = nullptr;
};

/// Lightweight handle to a graph-owned node.
class Var {
 public:
  Var() = default;
  explicit Var(Node* node) : node_(node) {}

  const Matrix& value() const { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  Node* node() const { return node_; }
  Graph& graph() const { return *node_->graph; }
  bool valid() const { return node_ != nullptr; }

 private:
  Node* node_ = nullptr;
};

/// Define-by-run reverse-mode graph over dense matrices. A graph is built
/// per batch and confined to one thread. Gradient accumulation happens in
/// reverse order of node creation, which is a valid topological order by
/// construction and makes runs reproducible.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// New leaf node (input, parameter, or constant).
  Var leaf(Matrix value);

  /// New interior node with an explicit backward rule. The rule may capture
  /// raw Node pointers; they stay valid for the graph's lifetime.
  Var make(Matrix value, std::vector<Node*> parents, std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node
  /// reachable from `loss`. The loss must be 1x1. Calling backward a second
  /// time without zero_grad() in between is an error.
  void backward(Var loss);

  /// Clears all gradient slots and re-arms backward().
  void zero_grad();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
  bool backward_ran_ = false;
};

// ---- elementwise / structural ops -----------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);      // Hadamard product
Var divide(Var a, Var b);   // elementwise a/b
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var exp(Var a);
Var log(Var a);
Var log1p(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }

// ---- linear algebra --------------------------------------------------------

Var matmul(Var a, Var b);

/// input [B x n] * weight [n x m] + bias [1 x m] broadcast over rows.
Var affine(Var input, Var weight, Var bias);

Var activation(Var x, Activation kind);

/// [B x n] -> [B x 1], sum over each row.
Var row_sum(Var a);

/// any shape -> [1 x 1], arithmetic mean of all entries.
Var mean_all(Var a);

}  // namespace tvae::ad
