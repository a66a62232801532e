#pragma once

#include "edgesr/rng.hpp"
#include "edgesr/tensor.hpp"

namespace edgesr::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, float lo = -1.f, float hi = 1.f,
                            bool requires_grad = false) {
    Tensor t(std::move(shape), 0.f, requires_grad);
    for (std::size_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

}  // namespace edgesr::testing
