#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace edgesr {

// Shape of a dense tensor, outermost axis first. Layout is always
// contiguous row-major N,C,H,W (at most 4 axes).
using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    bool requires_grad = false;
    // true if this tensor participates in the current tape (leaf with
    // requires_grad, or output of a recorded op)
    bool on_tape = false;
    std::vector<float> grad;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.f);
    }
};

class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, float fill, bool requires_grad = false);
    Tensor(Shape shape, std::vector<float> values, bool requires_grad = false);

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        return Tensor(std::move(shape), 0.f, requires_grad);
    }
    static Tensor scalar(float v) { return Tensor({1}, {v}); }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    std::size_t numel() const { return impl_->data.size(); }

    float* data() { return impl_->data.data(); }
    const float* data() const { return impl_->data.data(); }
    std::vector<float>& vec() { return impl_->data; }
    const std::vector<float>& vec() const { return impl_->data; }

    // Scalar tensors only.
    float item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool rg);

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    const std::vector<float>& grad() const;
    void zero_grad() {
        if (impl_ && !impl_->grad.empty()) impl_->grad.assign(impl_->grad.size(), 0.f);
    }

    // Throws if any value is NaN or Inf.
    void check_finite(const std::string& what) const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// ---------------------------------------------------------------------------
// Tape: thread-local record of executed differentiable ops. backward()
// replays it in exact reverse execution order.

namespace tape {

bool recording();
std::size_t size();
void clear();
// Appends one executed op. The closure reads output grads and accumulates
// into input grads.
void record(std::function<void()> backward_fn);

}  // namespace tape

// Disables tape recording for the current scope (eval-mode forward).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Runs reverse-mode accumulation from a scalar loss, then clears the tape.
// Throws if loss is non-scalar or the tape is empty (e.g. second call).
void backward(const Tensor& loss);

}  // namespace edgesr
