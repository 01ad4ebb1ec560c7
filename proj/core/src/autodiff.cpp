#include "tvae/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tvae::ad {

std::string to_string(Activation kind) {
  switch (kind) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kSoftplus: return "softplus";
    case Activation::kIdentity: return "identity";
  }
  throw std::logic_error("to_string: bad Activation");
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  if (name == "softplus") return Activation::kSoftplus;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation: " + name);
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x;                 // log(1+e^x) = x to double precision
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

Var Graph::leaf(Matrix value) {
  return make(std::move(value), {}, nullptr);
}

Var Graph::make(Matrix value, std::vector<Node*> parents,
                std::function<void()> backward) {
  auto node = std::make_unique<Node>();
  node->grad = Matrix(value.rows(), value.cols());
  node->value = std::move(value);
  node->parents = std::move(parents);
  node->backward = std::move(backward);
  node->id = nodes_.size();
  node->graph = this;
  nodes_.push_back(std::move(node));
  return Var(nodes_.back().get());
}

void Graph::backward(Var loss) {
  Node* root = loss.node();
  if (root == nullptr || root->graph != this) {
    throw std::logic_error("backward: loss node does not belong to this graph");
  }
  if (root->value.rows() != 1 || root->value.cols() != 1) {
    throw std::logic_error("backward: loss must be 1x1, got " +
                           root->value.shape_string());
  }
  if (backward_ran_) {
    throw std::logic_error("backward: called twice without zero_grad()");
  }
  backward_ran_ = true;

  // Mark the subgraph below the loss.
  std::vector<char> reachable(nodes_.size(), 0);
  std::vector<Node*> stack = {root};
  reachable[root->id] = 1;
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    for (Node* p : n->parents) {
      if (!reachable[p->id]) {
        reachable[p->id] = 1;
        stack.push_back(p);
      }
    }
  }

  root->grad(0, 0) = 1.0;
  // Reverse creation order: every consumer was created after its inputs, so
  // each node's grad is complete before its rule fires.
  for (std::size_t i = root->id + 1; i-- > 0;) {
    Node* n = nodes_[i].get();
    if (reachable[i] && n->backward) n->backward();
  }
}

void Graph::zero_grad() {
  for (auto& n : nodes_) n->grad.fill(0.0);
  backward_ran_ = false;
}

namespace {

void require_same_shape(const char* op, const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.value().shape_string() + " vs " +
                                b.value().shape_string());
  }
}

Graph& common_graph(const Var& a, const Var& b) {
  if (&a.graph() != &b.graph()) {
    throw std::logic_error("operands belong to different graphs");
  }
  return a.graph();
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Graph& g = common_graph(a, b);
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  Node* an = a.node();
  Node* bn = b.node();
  Var v = g.make(std::move(out), {an, bn}, nullptr);
  Node* self = v.node();
  self->backward = [self, an, bn]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) {
      an->grad[i] += self->grad[i];
      bn->grad[i] += self->grad[i];
    }
  };
  return v;
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Graph& g = common_graph(a, b);
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  Node* an = a.node();
  Node* bn = b.node();
  Var v = g.make(std::move(out), {an, bn}, nullptr);
  Node* self = v.node();
  self->backward = [self, an, bn]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) {
      an->grad[i] += self->grad[i];
      bn->grad[i] -= self->grad[i];
    }
  };
  return v;
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Graph& g = common_graph(a, b);
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  Node* an = a.node();
  Node* bn = b.node();
  Var v = g.make(std::move(out), {an, bn}, nullptr);
  Node* self = v.node();
  self->backward = [self, an, bn]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) {
      an->grad[i] += self->grad[i] * bn->value[i];
      bn->grad[i] += self->grad[i] * an->value[i];
    }
  };
  return v;
}

Var divide(Var a, Var b) {
  require_same_shape("divide", a, b);
  Graph& g = common_graph(a, b);
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] / b.value()[i];
  Node* an = a.node();
  Node* bn = b.node();
  Var v = g.make(std::move(out), {an, bn}, nullptr);
  Node* self = v.node();
  self->backward = [self, an, bn]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) {
      const double inv_b = 1.0 / bn->value[i];
      an->grad[i] += self->grad[i] * inv_b;
      bn->grad[i] -= self->grad[i] * an->value[i] * inv_b * inv_b;
    }
  };
  return v;
}

Var scale(Var a, double c) {
  Graph& g = a.graph();
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.value()[i];
  Node* an = a.node();
  Var v = g.make(std::move(out), {an}, nullptr);
  Node* self = v.node();
  self->backward = [self, an, c]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) an->grad[i] += c * self->grad[i];
  };
  return v;
}

Var add_scalar(Var a, double c) {
  Graph& g = a.graph();
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + c;
  Node* an = a.node();
  Var v = g.make(std::move(out), {an}, nullptr);
  Node* self = v.node();
  self->backward = [self, an]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) an->grad[i] += self->grad[i];
  };
  return v;
}

Var exp(Var a) {
  Graph& g = a.graph();
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.value()[i]);
  Node* an = a.node();
  Var v = g.make(std::move(out), {an}, nullptr);
  Node* self = v.node();
  self->backward = [self, an]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) {
      an->grad[i] += self->grad[i] * self->value[i];
    }
  };
  return v;
}

Var log(Var a) {
  Graph& g = a.graph();
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(a.value()[i]);
  Node* an = a.node();
  Var v = g.make(std::move(out), {an}, nullptr);
  Node* self = v.node();
  self->backward = [self, an]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) {
      an->grad[i] += self->grad[i] / an->value[i];
    }
  };
  return v;
}

Var log1p(Var a) {
  Graph& g = a.graph();
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log1p(a.value()[i]);
  Node* an = a.node();
  Var v = g.make(std::move(out), {an}, nullptr);
  Node* self = v.node();
  self->backward = [self, an]() {
    for (std::size_t i = 0; i < self->grad.size(); ++i) {
      an->grad[i] += self->grad[i] / (1.0 + an->value[i]);
    }
  };
  return v;
}

namespace {

// C[i,j] += sum_k A[i,k] * B[k,j]
void accum_matmul_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * k;
    double* crow = c.data() + i * m;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      const double* brow = b.data() + kk * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aik * brow[j];
    }
  }
}

// C[i,j] += sum_k A[i,k] * B[j,k]   (A * B^T)
void accum_matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * k;
    double* crow = c.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.data() + j * k;
      double s = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
      crow[j] += s;
    }
  }
}

// C[i,j] += sum_k A[k,i] * B[k,j]   (A^T * B)
void accum_matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* arow = a.data() + kk * n;
    const double* brow = b.data() + kk * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double aki = arow[i];
      double* crow = c.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aki * brow[j];
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " +
                                a.value().shape_string() + " vs " +
                                b.value().shape_string());
  }
  Graph& g = common_graph(a, b);
  Matrix out(a.rows(), b.cols());
  accum_matmul_nn(a.value(), b.value(), out);
  Node* an = a.node();
  Node* bn = b.node();
  Var v = g.make(std::move(out), {an, bn}, nullptr);
  Node* self = v.node();
  self->backward = [self, an, bn]() {
    accum_matmul_nt(self->grad, bn->value, an->grad);  // dA += G * B^T
    accum_matmul_tn(an->value, self->grad, bn->grad);  // dB += A^T * G
  };
  return v;
}

Var affine(Var input, Var weight, Var bias) {
  if (input.cols() != weight.rows() || bias.rows() != 1 ||
      bias.cols() != weight.cols()) {
    throw std::invalid_argument(
        "affine: shape mismatch input " + input.value().shape_string() +
        ", weight " + weight.value().shape_string() + ", bias " +
        bias.value().shape_string());
  }
  Graph& g = input.graph();
  Matrix out(input.rows(), weight.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* orow = out.data() + i * out.cols();
    const double* brow = bias.value().data();
    for (std::size_t j = 0; j < out.cols(); ++j) orow[j] = brow[j];
  }
  accum_matmul_nn(input.value(), weight.value(), out);
  Node* in = input.node();
  Node* wn = weight.node();
  Node* bn = bias.node();
  Var v = g.make(std::move(out), {in, wn, bn}, nullptr);
  Node* self = v.node();
  self->backward = [self, in, wn, bn]() {
    accum_matmul_nt(self->grad, wn->value, in->grad);
    accum_matmul_tn(in->value, self->grad, wn->grad);
    double* bg = bn->grad.data();
    const std::size_t m = self->grad.cols();
    for (std::size_t i = 0; i < self->grad.rows(); ++i) {
      const double* grow = self->grad.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) bg[j] += grow[j];
    }
  };
  return v;
}

Var activation(Var x, Activation kind) {
  if (kind == Activation::kIdentity) return x;
  Graph& g = x.graph();
  Matrix out(x.rows(), x.cols());
  const Matrix& in = x.value();
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(in[i]);
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(in[i]);
      break;
    case Activation::kSoftplus:
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus(in[i]);
      break;
    case Activation::kIdentity:
      break;
  }
  Node* xn = x.node();
  Var v = g.make(std::move(out), {xn}, nullptr);
  Node* self = v.node();
  self->backward = [self, xn, kind]() {
    const std::size_t n = self->grad.size();
    switch (kind) {
      case Activation::kRelu:
        // relu'(0) = 0 by convention
        for (std::size_t i = 0; i < n; ++i) {
          if (xn->value[i] > 0.0) xn->grad[i] += self->grad[i];
        }
        break;
      case Activation::kTanh:
        for (std::size_t i = 0; i < n; ++i) {
          const double y = self->value[i];
          xn->grad[i] += self->grad[i] * (1.0 - y * y);
        }
        break;
      case Activation::kSigmoid:
        for (std::size_t i = 0; i < n; ++i) {
          const double y = self->value[i];
          xn->grad[i] += self->grad[i] * y * (1.0 - y);
        }
        break;
      case Activation::kSoftplus:
        for (std::size_t i = 0; i < n; ++i) {
          xn->grad[i] += self->grad[i] * sigmoid(xn->value[i]);
        }
        break;
      case Activation::kIdentity:
        break;
    }
  };
  return v;
}

Var row_sum(Var a) {
  Graph& g = a.graph();
  Matrix out(a.rows(), 1);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double x : a.value().row(i)) s += x;
    out(i, 0) = s;
  }
  Node* an = a.node();
  Var v = g.make(std::move(out), {an}, nullptr);
  Node* self = v.node();
  self->backward = [self, an]() {
    for (std::size_t i = 0; i < an->grad.rows(); ++i) {
      const double gi = self->grad(i, 0);
      for (double& x : an->grad.row(i)) x += gi;
    }
  };
  return v;
}

Var mean_all(Var a) {
  Graph& g = a.graph();
  const double inv_n = 1.0 / static_cast<double>(a.value().size());
  double s = 0.0;
  for (double x : a.value().span()) s += x;
  Matrix out(1, 1);
  out(0, 0) = s * inv_n;
  Node* an = a.node();
  Var v = g.make(std::move(out), {an}, nullptr);
  Node* self = v.node();
  self->backward = [self, an, inv_n]() {
    const double gi = self->grad(0, 0) * inv_n;
    for (double& x : an->grad.span()) x += gi;
  };
  return v;
}

}  // namespace tvae::ad
