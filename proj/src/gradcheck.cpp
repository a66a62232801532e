#include "edgesr/gradcheck.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "edgesr/ops.hpp"
#include "edgesr/rng.hpp"

namespace edgesr {

namespace {

using IndexSets = std::vector<std::vector<std::size_t>>;

IndexSets all_indices(const std::vector<Tensor>& params) {
    IndexSets indices(params.size());
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        indices[pi].resize(params[pi].numel());
        std::iota(indices[pi].begin(), indices[pi].end(), std::size_t{0});
    }
    return indices;
}

IndexSets sampled_indices(const std::vector<Tensor>& params, std::size_t max_per_param,
                          std::uint64_t seed) {
    if (max_per_param == 0) return all_indices(params);
    Rng rng(seed);
    IndexSets indices(params.size());
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const std::size_t n = params[pi].numel();
        if (n <= max_per_param) {
            indices[pi].resize(n);
            std::iota(indices[pi].begin(), indices[pi].end(), std::size_t{0});
        } else {
            // sample without replacement via partial shuffle of [0, n)
            std::vector<std::size_t> all(n);
            std::iota(all.begin(), all.end(), std::size_t{0});
            for (std::size_t k = 0; k < max_per_param; ++k) {
                const std::size_t pick =
                    k + static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n - k)));
                std::swap(all[k], all[pick]);
            }
            indices[pi].assign(all.begin(), all.begin() + max_per_param);
        }
    }
    return indices;
}

GradCheckReport check_indices(const std::function<Tensor()>& analytic_loss,
                              const std::function<double()>& fd_loss,
                              const std::vector<Tensor>& params, const IndexSets& indices,
                              double h, double rel_tol, double abs_tol) {
    GradCheckReport report;

    for (const Tensor& p : params) {
        const_cast<Tensor&>(p).zero_grad();
    }
    tape::clear();
    Tensor loss = analytic_loss();
    backward(loss);

    std::vector<std::vector<float>> analytic;
    analytic.reserve(params.size());
    for (const Tensor& p : params)
        analytic.push_back(p.has_grad() ? p.grad() : std::vector<float>(p.numel(), 0.f));

    NoGradGuard ng;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        for (std::size_t j : indices[pi]) {
            const float orig = p.data()[j];
            p.data()[j] = orig + static_cast<float>(h);
            ops::kinkprobe::reset();
            const double lp = fd_loss();
            const std::uint64_t sig_p = ops::kinkprobe::signature();
            p.data()[j] = orig - static_cast<float>(h);
            ops::kinkprobe::reset();
            const double lm = fd_loss();
            const std::uint64_t sig_m = ops::kinkprobe::signature();
            p.data()[j] = orig;
            if (sig_p != sig_m) {
                // a kinked activation changed linear region inside [-h, +h]
                ++report.skipped;
                continue;
            }
            const double fd = (lp - lm) / (2.0 * h);
            const double a = analytic[pi][j];
            const double abs_err = std::fabs(a - fd);
            const double scale = std::max(std::fabs(a), std::fabs(fd));
            const double rel = scale > 0.0 ? abs_err / scale : 0.0;
            ++report.checked;
            report.max_abs = std::max(report.max_abs, abs_err);
            if (abs_err > abs_tol && rel > rel_tol) {
                if (rel > report.max_rel || report.pass) {
                    std::ostringstream os;
                    os << "param#" << pi << "[" << j << "]: analytic=" << a << " fd=" << fd;
                    report.worst = os.str();
                }
                report.pass = false;
                report.max_rel = std::max(report.max_rel, rel);
            } else if (abs_err > abs_tol) {
                report.max_rel = std::max(report.max_rel, rel);
            }
        }
    }
    return report;
}

}  // namespace

GradCheckReport check_gradients(const std::function<Tensor()>& forward,
                                const std::vector<Tensor>& params,
                                double h, double rel_tol, double abs_tol) {
    auto fd_loss = [&forward] { return static_cast<double>(forward().item()); };
    return check_indices(forward, fd_loss, params, all_indices(params), h, rel_tol, abs_tol);
}

GradCheckReport check_gradients_sampled(const std::function<Tensor()>& forward,
                                        const std::vector<Tensor>& params,
                                        std::size_t max_per_param, std::uint64_t seed,
                                        double h, double rel_tol, double abs_tol) {
    auto fd_loss = [&forward] { return static_cast<double>(forward().item()); };
    return check_indices(forward, fd_loss, params, sampled_indices(params, max_per_param, seed), h,
                         rel_tol, abs_tol);
}

GradCheckReport check_gradients_mse(const std::function<Tensor()>& forward,
                                    const Tensor& target,
                                    const std::vector<Tensor>& params,
                                    std::size_t max_per_param, std::uint64_t seed,
                                    double h, double rel_tol, double abs_tol) {
    auto analytic_loss = [&] { return ops::mse_mean(forward(), target); };
    auto fd_loss = [&]() -> double {
        const Tensor out = forward();
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) {
            const double d = static_cast<double>(out.data()[i]) - target.data()[i];
            s += d * d;
        }
        return s / static_cast<double>(out.numel());
    };
    return check_indices(analytic_loss, fd_loss, params, sampled_indices(params, max_per_param, seed),
                         h, rel_tol, abs_tol);
}

}  // namespace edgesr
