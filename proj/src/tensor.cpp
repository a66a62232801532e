#include "edgesr/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace edgesr {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor: non-positive extent in shape " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

Tensor::Tensor(Shape shape, float fill, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
    if (shape.size() > 4) throw std::invalid_argument("tensor: rank > 4 unsupported");
    impl_->shape = std::move(shape);
    impl_->data.assign(shape_numel(impl_->shape), fill);
    impl_->requires_grad = requires_grad;
    impl_->on_tape = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<float> values, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
    if (shape.size() > 4) throw std::invalid_argument("tensor: rank > 4 unsupported");
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
    impl_->shape = std::move(shape);
    impl_->data = std::move(values);
    impl_->requires_grad = requires_grad;
    impl_->on_tape = requires_grad;
}

float Tensor::item() const {
    if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar " + shape_str(shape()));
    return impl_->data[0];
}

void Tensor::set_requires_grad(bool rg) {
    impl_->requires_grad = rg;
    if (rg) impl_->on_tape = true;
}

const std::vector<float>& Tensor::grad() const {
    if (!impl_ || impl_->grad.empty())
        throw std::runtime_error("tensor: grad requested but none populated");
    return impl_->grad;
}

void Tensor::check_finite(const std::string& what) const {
    for (float v : impl_->data) {
        if (!std::isfinite(v))
            throw std::runtime_error("non-finite value in " + what);
    }
}

namespace tape {

namespace {
thread_local std::vector<std::function<void()>> g_tape;
thread_local bool g_recording = true;
}  // namespace

bool recording() { return g_recording; }
std::size_t size() { return g_tape.size(); }
void clear() { g_tape.clear(); }
void record(std::function<void()> backward_fn) { g_tape.push_back(std::move(backward_fn)); }

void set_recording(bool on) { g_recording = on; }

void run_reverse_and_clear() {
    for (auto it = g_tape.rbegin(); it != g_tape.rend(); ++it) (*it)();
    g_tape.clear();
}

}  // namespace tape

NoGradGuard::NoGradGuard() : prev_(tape::recording()) { tape::set_recording(false); }
NoGradGuard::~NoGradGuard() { tape::set_recording(prev_); }

void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
    if (tape::size() == 0) throw std::runtime_error("backward: tape is empty (already consumed?)");
    loss.check_finite("loss");
    loss.impl()->ensure_grad();
    loss.impl()->grad[0] = 1.f;
    NoGradGuard ng;
    tape::run_reverse_and_clear();
}

}  // namespace edgesr
