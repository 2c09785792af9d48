#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nlsd {

long long shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Dense double-precision tensor. Flat row-major storage; product(shape)
// always equals data.size().
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;
  bool requires_grad = false;

  Tensor() = default;
  Tensor(std::vector<int> shape_in, double fill = 0.0, bool requires_grad_in = false);
  Tensor(std::vector<int> shape_in, std::vector<double> data_in, bool requires_grad_in = false);

  static Tensor scalar(double v, bool requires_grad = false);

  long long numel() const { return static_cast<long long>(data.size()); }
  bool same_shape(const Tensor& other) const { return shape == other.shape; }
  bool all_finite() const;
};

enum class OpKind {
  kLeaf,
  kConv2d,
  kBiasAdd,
  kRelu,
  kSigmoid,
  kAdd,
  kMul,
  kScale,
  kSum,
  kBceSum,
};

struct Conv2dSpec {
  int stride = 1;
  int dilation = 1;
  int padding = 0;
};

// One operator record on the tape.
struct Node {
  OpKind op = OpKind::kLeaf;
  std::vector<int> inputs;
  Tensor value;
  Tensor grad;  // allocated by backward() for requires-grad nodes
  bool requires_grad = false;
  Conv2dSpec conv;
  double scalar = 0.0;
  Tensor target;  // BceSum supervision; never differentiated
};

namespace detail {

// Shared cross-entropy kernel: y_hat is truncated to [0,1] and then clamped
// away from the log singularities. Gradient is zero wherever the truncation
// or clamp was active.
inline constexpr double kCrossEntropyEps = 1e-7;
double truncated_cross_entropy(double y, double y_hat);
double truncated_cross_entropy_grad(double y, double y_hat);

}  // namespace detail

// Free-function forward kernels, shared by the tape and by inference paths
// that skip graph construction. Keeping one implementation guarantees that
// training-time and test-time forward passes agree bit for bit.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Conv2dSpec& spec);
Tensor bias_add_forward(const Tensor& input, const Tensor& bias);
Tensor relu_forward(const Tensor& input);
Tensor sigmoid_forward(const Tensor& input);

// Tape of operator records in topological order: node ids are indices and
// every node's inputs precede it by construction. Execution is sequential
// and deterministic; backward() on the same values is bit-identical across
// calls.
class Graph {
 public:
  int leaf(Tensor t);
  int conv2d(int input, int kernel, int stride = 1, int dilation = 1, int padding = 0);
  int bias_add(int input, int bias);
  int relu(int input);
  int sigmoid(int input);
  int add(int a, int b);
  int mul(int a, int b);
  int scale(int input, double factor);
  int sum(int input);
  // Scalar node: sum over elements of the truncated cross-entropy between
  // target and prediction.
  int bce_sum(int pred, Tensor target);

  const Tensor& value(int id) const;
  const Tensor& grad(int id) const;
  bool requires_grad(int id) const;
  std::size_t size() const { return nodes_.size(); }

  // Reverse-mode sweep from a scalar loss node. Gradient buffers are
  // reallocated and zeroed on every call. Throws if the loss node is not
  // scalar.
  void backward(int loss_id);

 private:
  int push(Node n);
  const Node& at(int id) const;
  std::vector<Node> nodes_;
};

}  // namespace nlsd
