#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Minimal reverse-mode differentiation over dense double-precision grids.
//
// A Tensor is a handle to a graph node. Leaves are created with
// Tensor::parameter (tracked) or Tensor::constant (not tracked). Every op
// returns a new node that remembers its parents and how to push its output
// gradient back to them. There is no broadcasting: shapes must match exactly
// except where an op documents otherwise.

namespace convlr::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until backward touches the node
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // reads this->grad, accumulates into parents
    bool requires_grad = false;
    const char* op = "leaf";

    std::vector<double>& ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
        return grad;
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor constant(Shape shape, std::vector<double> values);
    static Tensor parameter(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t size() const { return node_->value.size(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<const double> values() const { return node_->value; }
    /// Mutable access for leaves (optimizers, finite differences).
    std::span<double> mutable_values() { return node_->value; }
    /// Gradient after backward; zeros if the node was not reached.
    std::vector<double> grad() const;
    double item() const;

    /// Same values, cut from the graph.
    Tensor detach() const;

    Node& node() const { return *node_; }
    const std::shared_ptr<Node>& node_ptr() const noexcept { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Creates an op node. `backward_fn` receives the node after its grad has
/// been filled and must accumulate into parents that require grad.
Tensor make_op(const char* name, Shape shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(Node&)> backward_fn);

/// Reverse-mode sweep from a scalar. All gradients in the graph are reset first.
void backward(const Tensor& loss);

// ---- convolution -----------------------------------------------------------

/// Cross-correlation. input [Cin,H,W], kernel [Cout,Cin,k,k], bias [Cout] or
/// undefined. Output [Cout, (H+2p-k)/s+1, (W+2p-k)/s+1] (floor division).
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
              std::size_t padding);

/// Adjoint of conv2d with the same kernel and geometry. input [Ca,h,w],
/// kernel [Ca,Cb,k,k], output [Cb,out_h,out_w]; (out_h, out_w) must map back to
/// (h, w) under conv2d's geometry. Optional bias [Cb] is added afterwards.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, std::size_t stride,
                        std::size_t padding, std::size_t out_h, std::size_t out_w);

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

// ---- pointwise -------------------------------------------------------------

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// x * s where s is a single-element tensor (a learnable step size, say).
Tensor scale_by(const Tensor& x, const Tensor& s);
Tensor log(const Tensor& x);
/// Clamps into [lo, hi]; gradient is zero where clamping is active.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor sqrt(const Tensor& x);

/// Concatenates along dim 0. All other dims must match.
Tensor concat_channels(const std::vector<Tensor>& parts);
/// Channels [begin, begin+count) of a [C,...] tensor.
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);

// ---- reductions --------------------------------------------------------------

Tensor sum(const Tensor& x);
Tensor sum_squares(const Tensor& x);
/// Sum of x * w with w a constant or tracked tensor of the same shape.
Tensor dot(const Tensor& x, const Tensor& w);

// ---- linear operators --------------------------------------------------------

using LinearFn = std::function<std::vector<double>(std::span<const double>)>;

/// Applies a fixed linear map A (forward) with its exact adjoint A^T used for
/// the backward pass. Neither map may capture graph state.
Tensor linear_map(const char* name, const Tensor& x, Shape out_shape, LinearFn forward, LinearFn adjoint);

// ---- verification --------------------------------------------------------------

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t leaf = 0;
    std::size_t coordinate = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    bool finite = true;
    std::string message;
};

using GraphBuilder = std::function<Tensor(const std::vector<Tensor>&)>;

/// Central-difference check of d(builder(leaves))/d(leaves). Up to
/// `max_coords` coordinates per leaf are probed (evenly strided). Relative
/// error uses max(|a|, |b|, 1e-8) as denominator.
GradCheckResult grad_check(const GraphBuilder& builder, std::vector<Tensor> leaves, double eps = 1e-5,
                           std::size_t max_coords = 256);

}  // namespace convlr::ad
