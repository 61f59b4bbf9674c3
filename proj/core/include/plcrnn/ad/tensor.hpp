#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace plcrnn::ad {

using Shape = std::vector<std::size_t>;

std::size_t num_elements(const Shape& shape);
std::string shape_string(const Shape& shape);

// One vertex of the dynamic computation graph. Results of operations keep
// shared ownership of their inputs, so a graph lives exactly as long as the
// tensors that reference it.
template <typename Real>
struct Node {
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;  // empty until the first backward touches it
    bool requires_grad = false;
    std::string_view op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this->grad and accumulates into inputs[i]->grad.
    std::function<void(Node&)> backward;

    bool is_leaf() const { return inputs.empty(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), Real{0});
    }
};

/// Dense row-major tensor handle.
///
/// Copies share the underlying node (handle semantics): mutating data()
/// through one copy is visible through every other. Parameters rely on this
/// so the optimizer can update weights in place while the model holds them.
template <typename Real>
class Tensor {
public:
    using value_type = Real;
    using NodePtr = std::shared_ptr<Node<Real>>;

    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);
    Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

    static Tensor scalar(Real v, bool requires_grad = false);
    static Tensor full(Shape shape, Real v, bool requires_grad = false);

    // Builds an operation result. `backward` is stored only when at least one
    // input requires a gradient; otherwise the result is a constant.
    static Tensor from_op(Shape shape, std::vector<Real> values, std::string_view op,
                          std::vector<Tensor> inputs, std::function<void(Node<Real>&)> backward);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const { return node_->value.size(); }

    std::span<const Real> data() const { return node_->value; }
    std::span<Real> data() { return node_->value; }
    std::span<const Real> grad() const { return node_->grad; }
    std::span<Real> grad() { return node_->grad; }
    bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->value.empty(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    void zero_grad();

    Real item() const;
    Real at(std::initializer_list<std::size_t> index) const;
    std::size_t offset(std::initializer_list<std::size_t> index) const;

    /// Same values, cut off from the graph.
    Tensor detach() const;

    const NodePtr& node() const { return node_; }

private:
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}
    NodePtr node_;
};

/// Ordered record of the operations that produced a tensor, restricted to
/// nodes that carry gradients. Inputs precede the nodes that consume them.
template <typename Real>
class ComputationTape {
public:
    static ComputationTape record(const Tensor<Real>& root);

    std::span<Node<Real>* const> nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }

    /// Zeroes the gradients of every non-leaf node, seeds the root with 1 and
    /// runs each node's adjoint once in reverse order. Leaf gradients
    /// accumulate across calls.
    void replay_adjoints() const;

private:
    std::vector<Node<Real>*> nodes_;
    Node<Real>* root_ = nullptr;
};

/// Populates d(loss)/d(t) for every tensor t reachable from `loss` with
/// requires_grad set.
///
/// Leaf gradients accumulate: running backward twice over the same graph
/// without zero_grad() doubles them exactly. Intermediate gradients are
/// rebuilt from scratch on each call.
///
/// Throws ContractError when `loss` is not a single element or does not
/// depend on any tracked tensor.
template <typename Real>
void backward(const Tensor<Real>& loss);

}  // namespace plcrnn::ad
