#include "convlr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace convlr::ad {

std::size_t numel(const Shape& shape) noexcept {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace {
std::shared_ptr<Node> new_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel(shape) != values.size()) {
        throw std::invalid_argument("tensor: " + std::to_string(values.size()) + " values for shape " +
                                    shape_string(shape));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    return n;
}
}  // namespace

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
    return Tensor(new_leaf(std::move(shape), std::move(values), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    return Tensor(new_leaf(std::move(shape), std::move(values), true));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto n = numel(shape);
    return Tensor(new_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor(new_leaf({1}, {v}, requires_grad)); }

std::vector<double> Tensor::grad() const {
    if (node_->grad.size() == node_->value.size()) return node_->grad;
    return std::vector<double>(node_->value.size(), 0.0);
}

double Tensor::item() const {
    if (node_->value.size() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_string(shape()));
    return node_->value[0];
}

Tensor Tensor::detach() const { return Tensor::constant(node_->shape, node_->value); }

Tensor make_op(const char* name, Shape shape, std::vector<double> value, std::vector<Tensor> parents,
               std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->op = name;
    n->shape = std::move(shape);
    n->value = std::move(value);
    if (numel(n->shape) != n->value.size()) throw std::logic_error(std::string(name) + ": value/shape mismatch");
    for (auto& p : parents) {
        if (!p.defined()) continue;
        n->requires_grad = n->requires_grad || p.requires_grad();
        n->parents.push_back(p.node_ptr());
    }
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return Tensor(std::move(n));
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) throw std::invalid_argument("backward: loss must be a scalar");

    // Iterative post-order DFS gives a topological order (parents first).
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node_ptr().get(), 0);
    visited.insert(loss.node_ptr().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (n->requires_grad) {
            n->grad.assign(n->value.size(), 0.0);
        } else if (!n->grad.empty()) {
            n->grad.clear();
        }
    }
    Node& root = loss.node();
    root.grad.assign(1, 1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->requires_grad && n->backward_fn) n->backward_fn(*n);
    }
}

GradCheckResult grad_check(const GraphBuilder& builder, std::vector<Tensor> leaves, double eps,
                           std::size_t max_coords) {
    if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");
    GradCheckResult result;

    Tensor loss = builder(leaves);
    if (!std::isfinite(loss.item())) {
        result.finite = false;
        result.max_rel_error = std::numeric_limits<double>::infinity();
        result.message = "non-finite loss at the unperturbed point";
        return result;
    }
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const auto& leaf : leaves) analytic.push_back(leaf.grad());

    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto values = leaves[li].mutable_values();
        const std::size_t n = values.size();
        const std::size_t probes = std::min(n, max_coords);
        for (std::size_t pi = 0; pi < probes; ++pi) {
            const std::size_t idx = probes == n ? pi : pi * n / probes;
            const double saved = values[idx];
            values[idx] = saved + eps;
            const double up = builder(leaves).item();
            values[idx] = saved - eps;
            const double down = builder(leaves).item();
            values[idx] = saved;

            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[li][idx];
            if (!std::isfinite(numeric) || !std::isfinite(a)) {
                result.finite = false;
                result.max_rel_error = std::numeric_limits<double>::infinity();
                result.leaf = li;
                result.coordinate = idx;
                result.analytic = a;
                result.numeric = numeric;
                result.message = "non-finite value at leaf " + std::to_string(li) + " coordinate " +
                                 std::to_string(idx);
                return result;
            }
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                result.leaf = li;
                result.coordinate = idx;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace convlr::ad
