#include "plcrnn/ad/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

#include "plcrnn/error.hpp"

namespace plcrnn::ad {

std::size_t num_elements(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, bool requires_grad) : node_(std::make_shared<Node<Real>>()) {
    node_->value.assign(num_elements(shape), Real{0});
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
}

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> values, bool requires_grad)
    : node_(std::make_shared<Node<Real>>()) {
    if (num_elements(shape) != values.size()) {
        throw DimensionError("tensor: shape " + shape_string(shape) + " needs " +
                             std::to_string(num_elements(shape)) + " values, got " +
                             std::to_string(values.size()));
    }
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
}

template <typename Real>
Tensor<Real> Tensor<Real>::scalar(Real v, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<Real>{v}, requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::full(Shape shape, Real v, bool requires_grad) {
    const auto n = num_elements(shape);
    return Tensor(std::move(shape), std::vector<Real>(n, v), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::from_op(Shape shape, std::vector<Real> values, std::string_view op,
                                   std::vector<Tensor> inputs,
                                   std::function<void(Node<Real>&)> backward_fn) {
    auto node = std::make_shared<Node<Real>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->op = op;
    const bool tracked = std::any_of(inputs.begin(), inputs.end(),
                                     [](const Tensor& t) { return t.requires_grad(); });
    if (tracked) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto& t : inputs) node->inputs.push_back(t.node_);
        node->backward = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

template <typename Real>
std::size_t Tensor<Real>::dim(std::size_t axis) const {
    if (axis >= rank()) {
        throw DimensionError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                             shape_string(shape()));
    }
    return node_->shape[axis];
}

template <typename Real>
void Tensor<Real>::zero_grad() {
    node_->grad.assign(node_->value.size(), Real{0});
}

template <typename Real>
Real Tensor<Real>::item() const {
    if (size() != 1) {
        throw ContractError("tensor: item() on tensor of shape " + shape_string(shape()));
    }
    return node_->value[0];
}

template <typename Real>
std::size_t Tensor<Real>::offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank()) {
        throw DimensionError("tensor: index rank " + std::to_string(index.size()) +
                             " does not match shape " + shape_string(shape()));
    }
    std::size_t off = 0;
    std::size_t axis = 0;
    for (auto i : index) {
        if (i >= node_->shape[axis]) {
            throw DimensionError("tensor: index out of range on axis " + std::to_string(axis));
        }
        off = off * node_->shape[axis] + i;
        ++axis;
    }
    return off;
}

template <typename Real>
Real Tensor<Real>::at(std::initializer_list<std::size_t> index) const {
    return node_->value[offset(index)];
}

template <typename Real>
Tensor<Real> Tensor<Real>::detach() const {
    return Tensor(node_->shape, node_->value, false);
}

template <typename Real>
ComputationTape<Real> ComputationTape<Real>::record(const Tensor<Real>& root) {
    ComputationTape tape;
    if (!root.defined() || !root.requires_grad()) return tape;
    tape.root_ = root.node().get();

    // Iterative post-order DFS; recursion depth would otherwise grow with
    // graph length.
    std::unordered_set<const Node<Real>*> seen;
    std::vector<std::pair<Node<Real>*, std::size_t>> stack;
    stack.emplace_back(tape.root_, 0);
    seen.insert(tape.root_);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node<Real>* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            tape.nodes_.push_back(node);
            stack.pop_back();
        }
    }
    return tape;
}

template <typename Real>
void ComputationTape<Real>::replay_adjoints() const {
    if (root_ == nullptr) return;
    for (Node<Real>* node : nodes_) {
        if (!node->is_leaf()) node->grad.assign(node->value.size(), Real{0});
        else node->ensure_grad();
    }
    root_->grad[0] += Real{1};
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node<Real>* node = *it;
        if (node->backward) {
            for (auto& in : node->inputs) {
                if (in->requires_grad) in->ensure_grad();
            }
            node->backward(*node);
        }
    }
}

template <typename Real>
void backward(const Tensor<Real>& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " +
                            (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward: loss does not depend on any tensor that requires a gradient");
    }
    ComputationTape<Real>::record(loss).replay_adjoints();
}

template class Tensor<float>;
template class Tensor<double>;
template class ComputationTape<float>;
template class ComputationTape<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace plcrnn::ad
