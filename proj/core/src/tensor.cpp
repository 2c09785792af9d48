#include "nlsd/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace nlsd {

long long shape_numel(const std::vector<int>& shape) {
  long long n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(std::vector<int> shape_in, double fill, bool requires_grad_in)
    : shape(std::move(shape_in)),
      data(static_cast<std::size_t>(shape_numel(shape)), fill),
      requires_grad(requires_grad_in) {}

Tensor::Tensor(std::vector<int> shape_in, std::vector<double> data_in, bool requires_grad_in)
    : shape(std::move(shape_in)), data(std::move(data_in)), requires_grad(requires_grad_in) {
  if (shape_numel(shape) != static_cast<long long>(data.size())) {
    throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor({1}, std::vector<double>{v}, requires_grad);
}

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace detail {

double truncated_cross_entropy(double y, double y_hat) {
  if (!(y >= 0.0 && y <= 1.0)) {
    throw std::invalid_argument("cross_entropy: target " + std::to_string(y) +
                                " outside [0,1]");
  }
  double t = y_hat;
  if (t < 0.0) t = 0.0;
  if (t > 1.0) t = 1.0;
  if (t < kCrossEntropyEps) t = kCrossEntropyEps;
  if (t > 1.0 - kCrossEntropyEps) t = 1.0 - kCrossEntropyEps;
  return -(y * std::log(t) + (1.0 - y) * std::log(1.0 - t));
}

double truncated_cross_entropy_grad(double y, double y_hat) {
  // Hard clamp: no gradient where truncation or the log clamp was active.
  if (y_hat <= kCrossEntropyEps || y_hat >= 1.0 - kCrossEntropyEps) return 0.0;
  return (y_hat - y) / (y_hat * (1.0 - y_hat));
}

}  // namespace detail

namespace {

void check_conv_args(const Tensor& input, const Tensor& kernel, const Conv2dSpec& spec) {
  if (input.shape.size() != 3) {
    throw std::invalid_argument("conv2d: input must be [C,H,W], got " + shape_str(input.shape));
  }
  if (kernel.shape.size() != 4) {
    throw std::invalid_argument("conv2d: kernel must be [Cout,Cin,kH,kW], got " +
                                shape_str(kernel.shape));
  }
  if (kernel.shape[1] != input.shape[0]) {
    throw std::invalid_argument("conv2d: kernel input channels mismatch, kernel " +
                                shape_str(kernel.shape) + " vs input " + shape_str(input.shape));
  }
  if (spec.stride < 1 || spec.dilation < 1 || spec.padding < 0) {
    throw std::invalid_argument("conv2d: stride/dilation must be >= 1 and padding >= 0");
  }
}

int conv_out_dim(int in, int k, const Conv2dSpec& spec) {
  return (in + 2 * spec.padding - spec.dilation * (k - 1) - 1) / spec.stride + 1;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& kernel, const Conv2dSpec& spec) {
  check_conv_args(input, kernel, spec);
  const int c_in = input.shape[0], h = input.shape[1], w = input.shape[2];
  const int c_out = kernel.shape[0], kh = kernel.shape[2], kw = kernel.shape[3];
  const int oh = conv_out_dim(h, kh, spec), ow = conv_out_dim(w, kw, spec);
  if (oh < 1 || ow < 1) {
    throw std::invalid_argument("conv2d: output would be empty for input " +
                                shape_str(input.shape) + " kernel " + shape_str(kernel.shape));
  }
  Tensor out({c_out, oh, ow});
  for (int co = 0; co < c_out; ++co) {
    double* out_plane = out.data.data() + static_cast<std::size_t>(co) * oh * ow;
    for (int ci = 0; ci < c_in; ++ci) {
      const double* in_plane = input.data.data() + static_cast<std::size_t>(ci) * h * w;
      const double* ker = kernel.data.data() +
                          (static_cast<std::size_t>(co) * c_in + ci) * kh * kw;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          const double kval = ker[ky * kw + kx];
          if (kval == 0.0) continue;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * spec.stride - spec.padding + ky * spec.dilation;
            if (iy < 0 || iy >= h) continue;
            const double* in_row = in_plane + static_cast<std::size_t>(iy) * w;
            double* out_row = out_plane + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * spec.stride - spec.padding + kx * spec.dilation;
              if (ix < 0 || ix >= w) continue;
              out_row[ox] += kval * in_row[ix];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor bias_add_forward(const Tensor& input, const Tensor& bias) {
  if (input.shape.size() != 3 || bias.shape.size() != 1 || bias.shape[0] != input.shape[0]) {
    throw std::invalid_argument("bias_add: bias " + shape_str(bias.shape) +
                                " incompatible with input " + shape_str(input.shape));
  }
  Tensor out = input;
  const int c = input.shape[0];
  const long long plane = static_cast<long long>(input.shape[1]) * input.shape[2];
  for (int ci = 0; ci < c; ++ci) {
    const double b = bias.data[static_cast<std::size_t>(ci)];
    double* p = out.data.data() + static_cast<std::size_t>(ci) * plane;
    for (long long i = 0; i < plane; ++i) p[i] += b;
  }
  return out;
}

Tensor relu_forward(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor sigmoid_forward(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.data) v = stable_sigmoid(v);
  return out;
}

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Node& Graph::at(int id) const {
  if (id < 0 || id >= static_cast<int>(nodes_.size())) {
    throw std::invalid_argument("graph: node id " + std::to_string(id) + " out of range");
  }
  return nodes_[static_cast<std::size_t>(id)];
}

int Graph::leaf(Tensor t) {
  Node n;
  n.op = OpKind::kLeaf;
  n.requires_grad = t.requires_grad;
  n.value = std::move(t);
  return push(std::move(n));
}

int Graph::conv2d(int input, int kernel, int stride, int dilation, int padding) {
  const Node& in = at(input);
  const Node& ker = at(kernel);
  Node n;
  n.op = OpKind::kConv2d;
  n.inputs = {input, kernel};
  n.conv = Conv2dSpec{stride, dilation, padding};
  n.value = conv2d_forward(in.value, ker.value, n.conv);
  n.requires_grad = in.requires_grad || ker.requires_grad;
  return push(std::move(n));
}

int Graph::bias_add(int input, int bias) {
  const Node& in = at(input);
  const Node& b = at(bias);
  Node n;
  n.op = OpKind::kBiasAdd;
  n.inputs = {input, bias};
  n.value = bias_add_forward(in.value, b.value);
  n.requires_grad = in.requires_grad || b.requires_grad;
  return push(std::move(n));
}

int Graph::relu(int input) {
  const Node& in = at(input);
  Node n;
  n.op = OpKind::kRelu;
  n.inputs = {input};
  n.value = relu_forward(in.value);
  n.requires_grad = in.requires_grad;
  return push(std::move(n));
}

int Graph::sigmoid(int input) {
  const Node& in = at(input);
  Node n;
  n.op = OpKind::kSigmoid;
  n.inputs = {input};
  n.value = sigmoid_forward(in.value);
  n.requires_grad = in.requires_grad;
  return push(std::move(n));
}

int Graph::add(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  if (!na.value.same_shape(nb.value)) {
    throw std::invalid_argument("add: shape mismatch " + shape_str(na.value.shape) + " vs " +
                                shape_str(nb.value.shape));
  }
  Node n;
  n.op = OpKind::kAdd;
  n.inputs = {a, b};
  n.value = na.value;
  for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] += nb.value.data[i];
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n));
}

int Graph::mul(int a, int b) {
  const Node& na = at(a);
  const Node& nb = at(b);
  if (!na.value.same_shape(nb.value)) {
    throw std::invalid_argument("mul: shape mismatch " + shape_str(na.value.shape) + " vs " +
                                shape_str(nb.value.shape));
  }
  Node n;
  n.op = OpKind::kMul;
  n.inputs = {a, b};
  n.value = na.value;
  for (std::size_t i = 0; i < n.value.data.size(); ++i) n.value.data[i] *= nb.value.data[i];
  n.requires_grad = na.requires_grad || nb.requires_grad;
  return push(std::move(n));
}

int Graph::scale(int input, double factor) {
  const Node& in = at(input);
  Node n;
  n.op = OpKind::kScale;
  n.inputs = {input};
  n.scalar = factor;
  n.value = in.value;
  for (double& v : n.value.data) v *= factor;
  n.requires_grad = in.requires_grad;
  return push(std::move(n));
}

int Graph::sum(int input) {
  const Node& in = at(input);
  double s = 0.0;
  for (double v : in.value.data) s += v;
  Node n;
  n.op = OpKind::kSum;
  n.inputs = {input};
  n.value = Tensor::scalar(s);
  n.requires_grad = in.requires_grad;
  return push(std::move(n));
}

int Graph::bce_sum(int pred, Tensor target) {
  const Node& p = at(pred);
  if (!p.value.same_shape(target)) {
    throw std::invalid_argument("bce_sum: target shape " + shape_str(target.shape) +
                                " does not match prediction " + shape_str(p.value.shape));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < target.data.size(); ++i) {
    s += detail::truncated_cross_entropy(target.data[i], p.value.data[i]);
  }
  Node n;
  n.op = OpKind::kBceSum;
  n.inputs = {pred};
  n.target = std::move(target);
  n.value = Tensor::scalar(s);
  n.requires_grad = p.requires_grad;
  return push(std::move(n));
}

const Tensor& Graph::value(int id) const { return at(id).value; }

const Tensor& Graph::grad(int id) const { return at(id).grad; }

bool Graph::requires_grad(int id) const { return at(id).requires_grad; }

void Graph::backward(int loss_id) {
  const Node& loss = at(loss_id);
  if (loss.value.numel() != 1) {
    throw std::invalid_argument("backward: loss node must be scalar, got shape " +
                                shape_str(loss.value.shape));
  }
  // Fresh zeroed buffers for every requires-grad node, so repeated calls are
  // reproducible and the post-condition (grad shape mirrors value shape)
  // holds even for nodes not on the loss path.
  for (Node& n : nodes_) {
    if (n.requires_grad) {
      n.grad = Tensor(n.value.shape, 0.0);
    } else {
      n.grad = Tensor();
    }
  }
  Node& seed = nodes_[static_cast<std::size_t>(loss_id)];
  if (!seed.requires_grad) return;  // loss of constants: all gradients stay zero
  seed.grad.data[0] = 1.0;

  for (int id = loss_id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.data.empty()) continue;
    switch (n.op) {
      case OpKind::kLeaf:
        break;
      case OpKind::kConv2d: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        Node& ker = nodes_[static_cast<std::size_t>(n.inputs[1])];
        const int c_in = in.value.shape[0], h = in.value.shape[1], w = in.value.shape[2];
        const int c_out = ker.value.shape[0], kh = ker.value.shape[2], kw = ker.value.shape[3];
        const int oh = n.value.shape[1], ow = n.value.shape[2];
        const bool want_in = in.requires_grad;
        const bool want_ker = ker.requires_grad;
        for (int co = 0; co < c_out; ++co) {
          const double* g_plane = n.grad.data.data() + static_cast<std::size_t>(co) * oh * ow;
          for (int ci = 0; ci < c_in; ++ci) {
            const double* in_plane = in.value.data.data() + static_cast<std::size_t>(ci) * h * w;
            double* gin_plane =
                want_in ? in.grad.data.data() + static_cast<std::size_t>(ci) * h * w : nullptr;
            const std::size_t ker_base = (static_cast<std::size_t>(co) * c_in + ci) * kh * kw;
            for (int ky = 0; ky < kh; ++ky) {
              for (int kx = 0; kx < kw; ++kx) {
                const double kval = ker.value.data[ker_base + ky * kw + kx];
                double kgrad = 0.0;
                for (int oy = 0; oy < oh; ++oy) {
                  const int iy = oy * n.conv.stride - n.conv.padding + ky * n.conv.dilation;
                  if (iy < 0 || iy >= h) continue;
                  const double* g_row = g_plane + static_cast<std::size_t>(oy) * ow;
                  const double* in_row = in_plane + static_cast<std::size_t>(iy) * w;
                  double* gin_row =
                      want_in ? gin_plane + static_cast<std::size_t>(iy) * w : nullptr;
                  for (int ox = 0; ox < ow; ++ox) {
                    const int ix = ox * n.conv.stride - n.conv.padding + kx * n.conv.dilation;
                    if (ix < 0 || ix >= w) continue;
                    const double g = g_row[ox];
                    if (want_ker) kgrad += g * in_row[ix];
                    if (want_in) gin_row[ix] += g * kval;
                  }
                }
                if (want_ker) ker.grad.data[ker_base + ky * kw + kx] += kgrad;
              }
            }
          }
        }
        break;
      }
      case OpKind::kBiasAdd: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        Node& b = nodes_[static_cast<std::size_t>(n.inputs[1])];
        const int c = in.value.shape[0];
        const long long plane = static_cast<long long>(in.value.shape[1]) * in.value.shape[2];
        if (in.requires_grad) {
          for (std::size_t i = 0; i < in.grad.data.size(); ++i) in.grad.data[i] += n.grad.data[i];
        }
        if (b.requires_grad) {
          for (int ci = 0; ci < c; ++ci) {
            double s = 0.0;
            const double* g = n.grad.data.data() + static_cast<std::size_t>(ci) * plane;
            for (long long i = 0; i < plane; ++i) s += g[i];
            b.grad.data[static_cast<std::size_t>(ci)] += s;
          }
        }
        break;
      }
      case OpKind::kRelu: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        if (in.requires_grad) {
          for (std::size_t i = 0; i < in.grad.data.size(); ++i) {
            if (in.value.data[i] > 0.0) in.grad.data[i] += n.grad.data[i];
          }
        }
        break;
      }
      case OpKind::kSigmoid: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        if (in.requires_grad) {
          for (std::size_t i = 0; i < in.grad.data.size(); ++i) {
            const double s = n.value.data[i];
            in.grad.data[i] += n.grad.data[i] * s * (1.0 - s);
          }
        }
        break;
      }
      case OpKind::kAdd: {
        for (int k = 0; k < 2; ++k) {
          Node& in = nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(k)])];
          if (!in.requires_grad) continue;
          for (std::size_t i = 0; i < in.grad.data.size(); ++i) in.grad.data[i] += n.grad.data[i];
        }
        break;
      }
      case OpKind::kMul: {
        Node& a = nodes_[static_cast<std::size_t>(n.inputs[0])];
        Node& b = nodes_[static_cast<std::size_t>(n.inputs[1])];
        if (a.requires_grad) {
          for (std::size_t i = 0; i < a.grad.data.size(); ++i) {
            a.grad.data[i] += n.grad.data[i] * b.value.data[i];
          }
        }
        if (b.requires_grad) {
          for (std::size_t i = 0; i < b.grad.data.size(); ++i) {
            b.grad.data[i] += n.grad.data[i] * a.value.data[i];
          }
        }
        break;
      }
      case OpKind::kScale: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        if (in.requires_grad) {
          for (std::size_t i = 0; i < in.grad.data.size(); ++i) {
            in.grad.data[i] += n.grad.data[i] * n.scalar;
          }
        }
        break;
      }
      case OpKind::kSum: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        if (in.requires_grad) {
          const double g = n.grad.data[0];
          for (double& v : in.grad.data) v += g;
        }
        break;
      }
      case OpKind::kBceSum: {
        Node& in = nodes_[static_cast<std::size_t>(n.inputs[0])];
        if (in.requires_grad) {
          const double g = n.grad.data[0];
          for (std::size_t i = 0; i < in.grad.data.size(); ++i) {
            in.grad.data[i] +=
                g * detail::truncated_cross_entropy_grad(n.target.data[i], in.value.data[i]);
          }
        }
        break;
      }
    }
  }
}

}  // namespace nlsd
