#pragma once

#include <functional>
#include <string>
#include <vector>

#include "edgesr/tensor.hpp"

namespace edgesr {

struct GradCheckReport {
    bool pass = true;
    double max_rel = 0.0;   // worst relative deviation seen
    double max_abs = 0.0;   // worst absolute deviation seen
    std::size_t checked = 0;
    std::size_t skipped = 0;  // elements whose +-h interval crosses an activation kink
    std::string worst;      // "param#i[j]: analytic=.. fd=.."
};

// Central finite-difference check of reverse-mode gradients.
//
// `forward` must rebuild the scalar loss from the current parameter values.
// Each parameter element is bumped by ±h and the analytic gradient is
// compared against (l+ - l-)/(2h). An element passes when
// |a - fd| <= max(abs_tol, rel_tol * max(|a|, |fd|)).
//
// Elements whose bump flips the sign of any relu/leaky_relu/prelu input are
// skipped (counted in `skipped`): the loss is only piecewise differentiable
// there and a central difference averages the two slopes, so no analytic
// gradient can match it.
GradCheckReport check_gradients(const std::function<Tensor()>& forward,
                                const std::vector<Tensor>& params,
                                double h = 1e-2, double rel_tol = 1e-3,
                                double abs_tol = 1e-5);

// Same check restricted to at most `max_per_param` seed-chosen elements of
// each parameter, for composites too large to bump exhaustively.
GradCheckReport check_gradients_sampled(const std::function<Tensor()>& forward,
                                        const std::vector<Tensor>& params,
                                        std::size_t max_per_param, std::uint64_t seed,
                                        double h = 1e-2, double rel_tol = 1e-3,
                                        double abs_tol = 1e-5);

// Variant for deep composites: `forward` returns the raw output tensor and
// the harness forms mean((out - target)^2) itself — on the tape for the
// analytic pass, in double precision for the finite-difference passes. This
// removes the float quantization of the scalar loss, which otherwise floors
// the achievable fd accuracy above abs_tol. max_per_param = 0 checks every
// element.
GradCheckReport check_gradients_mse(const std::function<Tensor()>& forward,
                                    const Tensor& target,
                                    const std::vector<Tensor>& params,
                                    std::size_t max_per_param, std::uint64_t seed,
                                    double h = 1e-3, double rel_tol = 1e-3,
                                    double abs_tol = 1e-5);

}  // namespace edgesr
