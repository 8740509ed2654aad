#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace vigen {

using Shape = std::vector<int>;

int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;  // empty until first touched, then same length as value
    bool requires_grad = false;
};

[[noreturn]] void fail(const std::string& message);

inline void check(bool ok, const std::string& message) {
    if (!ok) fail(message);
}

}  // namespace detail

// Dense row-major float32 tensor. Copies share the underlying node, like a
// shared_ptr handle; fresh storage only comes from the factory functions.
// Values are immutable by convention once an op has consumed the tensor;
// the grad buffer is the one mutable accumulator.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, float v);
    static Tensor ones(Shape shape) { return full(std::move(shape), 1.0f); }
    static Tensor from_data(Shape shape, std::vector<float> data);
    static Tensor scalar(float v) { return from_data({1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int dim(int axis) const { return node_->shape[static_cast<size_t>(axis)]; }
    int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }

    std::span<const float> values() const { return node_->value; }
    std::span<float> values() { return node_->value; }
    float item() const;  // numel() must be 1

    bool requires_grad() const { return node_ && node_->requires_grad; }
    Tensor& set_requires_grad(bool on = true) {
        node_->requires_grad = on;
        return *this;
    }

    // zero-filled on first access
    std::span<float> grad();
    bool has_grad() const { return node_ && !node_->grad.empty(); }
    void zero_grad();

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

  private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::TensorNode> node_;
};

// Ordered record of executed operations. Each forward op that participates in
// differentiation appends one record; backward() replays the records in
// reverse execution order (execution order is a valid topological order).
// The tape is rebuilt every forward pass and is single-threaded.
class Tape {
  public:
    void record(const Tensor& output, std::function<void()> backward_fn);
    size_t size() const { return records_.size(); }
    void clear() { records_.clear(); }

    static Tape* active();

    // RAII activation; nesting restores the previous tape on destruction.
    class Scope {
      public:
        explicit Scope(Tape& tape);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

      private:
        Tape* prev_;
    };

    friend void backward(const Tensor& loss);

  private:
    struct Record {
        std::shared_ptr<detail::TensorNode> output;
        std::function<void()> backward_fn;
    };
    std::vector<Record> records_;
};

// True when an op with any grad-requiring input should be recorded.
inline bool grad_enabled() { return Tape::active() != nullptr; }

// Populates grads of every requires_grad ancestor of `loss` recorded on the
// active tape. Intermediate grads are reset at entry; leaf grads accumulate
// across calls until explicitly zeroed. `loss` must be a scalar.
void backward(const Tensor& loss);

namespace detail {
// dst.grad += scale * src, allocating the grad buffer on demand
void accumulate_grad(const std::shared_ptr<TensorNode>& dst, std::span<const float> src,
                     float scale = 1.0f);
}  // namespace detail

}  // namespace vigen
