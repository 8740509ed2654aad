#include "vigen/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace vigen {

int64_t numel_of(const Shape& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace detail {

void fail(const std::string& message) { throw std::invalid_argument(message); }

void accumulate_grad(const std::shared_ptr<TensorNode>& dst, std::span<const float> src,
                     float scale) {
    if (dst->grad.empty()) dst->grad.assign(dst->value.size(), 0.0f);
    float* g = dst->grad.data();
    for (size_t i = 0; i < src.size(); ++i) g[i] += scale * src[i];
}

}  // namespace detail

Tensor Tensor::zeros(Shape shape) {
    auto node = std::make_shared<detail::TensorNode>();
    node->value.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
    node->shape = std::move(shape);
    return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, float v) {
    Tensor t = zeros(std::move(shape));
    for (float& x : t.node_->value) x = v;
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data) {
    detail::check(numel_of(shape) == static_cast<int64_t>(data.size()),
                  "from_data: shape " + shape_str(shape) + " wants " +
                      std::to_string(numel_of(shape)) + " values, got " +
                      std::to_string(data.size()));
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    return Tensor(std::move(node));
}

float Tensor::item() const {
    detail::check(defined() && numel() == 1,
                  "item: tensor is not a scalar (shape " +
                      (defined() ? shape_str(shape()) : std::string("undefined")) + ")");
    return node_->value[0];
}

std::span<float> Tensor::grad() {
    if (node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0f);
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_ && !node_->grad.empty()) node_->grad.assign(node_->value.size(), 0.0f);
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }

Tape::Scope::~Scope() { g_active_tape = prev_; }

void Tape::record(const Tensor& output, std::function<void()> backward_fn) {
    records_.push_back({output.node(), std::move(backward_fn)});
}

void backward(const Tensor& loss) {
    detail::check(loss.defined() && loss.numel() == 1,
                  "backward: loss must be a scalar, got shape " +
                      (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    Tape* tape = Tape::active();
    detail::check(tape != nullptr, "backward: no active tape");

    // Intermediate grads are transient; reset them so repeated backward calls
    // only accumulate into leaves.
    for (auto& rec : tape->records_) {
        if (!rec.output->grad.empty()) rec.output->grad.assign(rec.output->value.size(), 0.0f);
    }

    auto loss_node = loss.node();
    if (loss_node->grad.empty()) loss_node->grad.assign(loss_node->value.size(), 0.0f);
    loss_node->grad[0] += 1.0f;

    for (auto it = tape->records_.rbegin(); it != tape->records_.rend(); ++it) {
        it->backward_fn();
    }
}

}  // namespace vigen
