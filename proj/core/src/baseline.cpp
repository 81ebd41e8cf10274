#include "convlr/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace convlr {

namespace {

using Frames = std::vector<std::vector<cplx>>;

double sq_norm(std::span<const cplx> v) {
    double s = 0.0;
    for (const auto& c : v) s += std::norm(c);
    return s;
}

double sq_norm_frames(const Frames& x) {
    double s = 0.0;
    for (const auto& f : x) s += sq_norm(f);
    return s;
}

double tv_term(const Frames& x) {
    double s = 0.0;
    for (std::size_t t = 0; t + 1 < x.size(); ++t) {
        for (std::size_t i = 0; i < x[t].size(); ++i) s += std::abs(x[t + 1][i] - x[t][i]);
    }
    return s;
}

Frames prox(const Frames& x, double threshold) {
    const std::size_t frames = x.size();
    if (frames < 2 || threshold == 0.0) return x;
    const std::size_t n = x[0].size();
    Frames out(frames, std::vector<cplx>(n));
    for (std::size_t i = 0; i < n; ++i) {
        // Shrink every difference, rebuild by cumulative sum, then restore the temporal mean.
        cplx mean = 0.0;
        for (std::size_t t = 0; t < frames; ++t) mean += x[t][i];
        mean /= static_cast<double>(frames);
        cplx acc = 0.0, acc_mean = 0.0;
        out[0][i] = 0.0;
        for (std::size_t t = 0; t + 1 < frames; ++t) {
            const cplx d = x[t + 1][i] - x[t][i];
            const double mag = std::abs(d);
            const cplx shrunk = mag > threshold ? d * ((mag - threshold) / mag) : cplx(0.0);
            acc += shrunk;
            out[t + 1][i] = acc;
        }
        for (std::size_t t = 0; t < frames; ++t) acc_mean += out[t][i];
        acc_mean /= static_cast<double>(frames);
        const cplx shift = mean - acc_mean;
        for (std::size_t t = 0; t < frames; ++t) out[t][i] += shift;
    }
    return out;
}

Frames to_frames(const std::vector<ComplexImage>& x) {
    Frames f;
    f.reserve(x.size());
    for (const auto& img : x) f.emplace_back(img.values().begin(), img.values().end());
    return f;
}

struct Problem {
    std::span<const NudftOperator> ops;
    std::span<const KSpaceData> y;
    std::size_t width, height;

    // Data term and the residuals it came from.
    double data(const Frames& x, Frames& residual) const {
        residual.resize(x.size());
        double f = 0.0;
        for (std::size_t t = 0; t < x.size(); ++t) {
            auto r = ops[t].forward(ComplexImage(width, height, x[t]));
            for (std::size_t m = 0; m < r.size(); ++m) r[m] -= y[t].samples[m];
            f += sq_norm(r);
            residual[t] = std::move(r);
        }
        return f;
    }

    Frames gradient(const Frames& residual) const {
        Frames g(residual.size());
        for (std::size_t t = 0; t < residual.size(); ++t) {
            const auto a = ops[t].adjoint(residual[t]);
            g[t].assign(a.values().begin(), a.values().end());
            for (auto& v : g[t]) v *= 2.0;
        }
        return g;
    }
};

}  // namespace

void GraspConfig::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("grasp: lambda must be finite and >= 0");
    if (n_iter < 1) throw std::invalid_argument("grasp: n_iter must be >= 1");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
        throw std::invalid_argument("grasp: backtrack_factor must lie in (0, 1)");
    }
    if (max_backtracks < 1) throw std::invalid_argument("grasp: max_backtracks must be >= 1");
}

std::vector<ComplexImage> temporal_tv_prox(const std::vector<ComplexImage>& x, double threshold) {
    if (!(threshold >= 0.0)) throw std::invalid_argument("temporal_tv_prox: threshold must be >= 0");
    for (const auto& f : x) {
        if (!f.same_shape(x.front())) throw std::invalid_argument("temporal_tv_prox: frame shapes differ");
    }
    const auto out = prox(to_frames(x), threshold);
    std::vector<ComplexImage> images;
    images.reserve(out.size());
    for (const auto& f : out) images.emplace_back(x.front().width(), x.front().height(), f);
    return images;
}

double grasp_objective(std::span<const NudftOperator> ops, std::span<const KSpaceData> y,
                       std::span<const ComplexImage> x, double lambda) {
    if (ops.size() != y.size() || ops.size() != x.size()) throw std::invalid_argument("grasp_objective: size mismatch");
    if (x.empty()) throw std::invalid_argument("grasp_objective: no frames");
    Problem p{ops, y, x.front().width(), x.front().height()};
    Frames residual;
    const auto frames = to_frames({x.begin(), x.end()});
    return p.data(frames, residual) + lambda * tv_term(frames);
}

GraspResult grasp_reconstruct(std::span<const KSpaceData> y_frames, std::size_t width, std::size_t height,
                              const GraspConfig& cfg) {
    cfg.validate();
    if (y_frames.empty()) throw std::invalid_argument("grasp_reconstruct: need at least one frame");
    std::vector<NudftOperator> ops;
    ops.reserve(y_frames.size());
    double lipschitz = 0.0;
    std::vector<ComplexImage> init;
    for (const auto& y : y_frames) {
        if (!y.consistent()) throw std::invalid_argument("grasp_reconstruct: samples do not match trajectory");
        ops.emplace_back(y.trajectory, width, height);
        lipschitz = std::max(lipschitz, 2.0 * estimate_max_eigenvalue(ops.back(), 40));
        init.push_back(regrid_reconstruct(y, width, height));
    }
    if (!(lipschitz > 0.0)) throw std::runtime_error("grasp_reconstruct: degenerate encoding operator");

    const Problem p{ops, y_frames, width, height};
    Frames x = to_frames(init);
    Frames residual;
    double obj = p.data(x, residual) + cfg.lambda * tv_term(x);
    if (!std::isfinite(obj)) throw std::runtime_error("grasp_reconstruct: non-finite objective at the initial iterate");

    GraspResult result;
    result.objective.push_back(obj);
    const double base_step = 1.0 / lipschitz;
    const bool adaptive = cfg.step_rule == StepRule::backtracking;

    // Monotone FISTA: the momentum point y drives the prox-gradient step, the
    // kept iterate x is whichever of (candidate, previous) has lower objective.
    // Residuals are affine in the iterate, so r(y) is combined from stored ones.
    Frames x_prev = x, r_prev = residual;
    Frames y = x, r_y = residual;
    double momentum = 1.0;
    double step = base_step;

    auto combine = [](const Frames& a, const Frames& b, const Frames& c, double wb, double wc) {
        Frames out = a;
        for (std::size_t t = 0; t < a.size(); ++t) {
            for (std::size_t i = 0; i < a[t].size(); ++i) out[t][i] += wb * (b[t][i] - a[t][i]) + wc * (a[t][i] - c[t][i]);
        }
        return out;
    };

    for (std::size_t it = 0; it < cfg.n_iter; ++it) {
        const Frames g = p.gradient(r_y);
        const double f_y = sq_norm_frames(r_y);
        if (adaptive) step = std::min(step / cfg.backtrack_factor, 1e6 * base_step);

        bool accepted = false;
        Frames z, r_z;
        double obj_z = 0.0;
        const std::size_t attempts = adaptive ? cfg.max_backtracks : 1;
        for (std::size_t a = 0; a < attempts; ++a) {
            Frames v = y;
            for (std::size_t t = 0; t < y.size(); ++t) {
                for (std::size_t i = 0; i < y[t].size(); ++i) v[t][i] -= step * g[t][i];
            }
            z = prox(v, 2.0 * step * cfg.lambda);
            const double f_z = p.data(z, r_z);
            obj_z = f_z + cfg.lambda * tv_term(z);
            if (!std::isfinite(obj_z)) {
                if (!adaptive) {
                    throw std::runtime_error("grasp_reconstruct: non-finite objective at iteration " + std::to_string(it));
                }
            } else if (!adaptive) {
                accepted = true;
                break;
            } else {
                // Sufficient decrease of the smooth part along the step.
                double lin = 0.0, dist = 0.0;
                for (std::size_t t = 0; t < z.size(); ++t) {
                    for (std::size_t i = 0; i < z[t].size(); ++i) {
                        const cplx d = z[t][i] - y[t][i];
                        lin += std::real(std::conj(g[t][i]) * d);
                        dist += std::norm(d);
                    }
                }
                if (f_z <= f_y + lin + dist / (2.0 * step) + 1e-12 * std::max(1.0, f_y)) {
                    accepted = true;
                    break;
                }
            }
            step *= cfg.backtrack_factor;
        }

        if (!accepted) {
            ++result.rejected_steps;
            result.step_sizes.push_back(0.0);
            result.objective.push_back(obj);
            // Restart momentum from the kept iterate.
            y = x;
            r_y = residual;
            x_prev = x;
            r_prev = residual;
            momentum = 1.0;
            step = base_step;
            continue;
        }

        const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
        x_prev = x;
        r_prev = residual;
        if (obj_z <= obj) {
            x = z;
            residual = r_z;
            obj = obj_z;
        }
        const double wz = momentum / next_momentum;
        const double wm = (momentum - 1.0) / next_momentum;
        y = combine(x, z, x_prev, wz, wm);
        r_y = combine(residual, r_z, r_prev, wz, wm);
        momentum = next_momentum;
        result.step_sizes.push_back(step);
        result.objective.push_back(obj);
    }

    result.frames.reserve(x.size());
    for (auto& f : x) result.frames.emplace_back(width, height, std::move(f));
    return result;
}

}  // namespace convlr
