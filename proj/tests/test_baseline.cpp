#include <gtest/gtest.h>

#include <cmath>

#include "convlr/baseline.hpp"
#include "convlr/simdata.hpp"
#include "support.hpp"

using namespace convlr;

namespace {

std::vector<KSpaceData> measure(const std::vector<ComplexImage>& frames, std::size_t spokes) {
    std::vector<KSpaceData> y;
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const std::size_t n = frames[t].width();
        y.push_back(nudft_forward(frames[t], golden_angle_trajectory(spokes, 2 * n, t * spokes)));
    }
    return y;
}

// Exact minimizer of 0.5 |x - v|^2 + (tau / 2) |x2 - x1| for a pair of complex scalars.
std::pair<cplx, cplx> pair_prox(cplx a, cplx b, double tau) {
    const cplx mid = 0.5 * (a + b);
    const cplx d = b - a;
    const double mag = std::abs(d);
    const cplx shrunk = mag > tau ? d * ((mag - tau) / mag) : cplx(0.0);
    return {mid - 0.5 * shrunk, mid + 0.5 * shrunk};
}

}  // namespace

TEST(TemporalTvProx, ZeroThresholdAndSingleFrameAreIdentity) {
    const std::vector<ComplexImage> x{oracle::random_image(4, 4, 1), oracle::random_image(4, 4, 2)};
    const auto out = temporal_tv_prox(x, 0.0);
    EXPECT_EQ(out[0], x[0]);
    EXPECT_EQ(out[1], x[1]);
    const std::vector<ComplexImage> one{oracle::random_image(4, 4, 3)};
    EXPECT_EQ(temporal_tv_prox(one, 5.0)[0], one[0]);
    EXPECT_THROW(temporal_tv_prox(x, -1.0), std::invalid_argument);
}

TEST(TemporalTvProx, PairMatchesClosedFormProx) {
    const auto a = oracle::random_image(3, 3, 4);
    const auto b = oracle::random_image(3, 3, 5);
    for (double tau : {0.1, 0.7, 5.0}) {
        const auto out = temporal_tv_prox({a, b}, tau);
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto [p, q] = pair_prox(a[i], b[i], tau);
            EXPECT_NEAR(std::abs(out[0][i] - p), 0.0, 1e-14);
            EXPECT_NEAR(std::abs(out[1][i] - q), 0.0, 1e-14);
        }
    }
}

TEST(TemporalTvProx, PreservesTemporalMeanAndShrinksVariation) {
    std::vector<ComplexImage> x;
    for (std::uint64_t s = 0; s < 5; ++s) x.push_back(oracle::random_image(4, 4, 10 + s));
    const auto out = temporal_tv_prox(x, 0.3);
    for (std::size_t i = 0; i < x[0].size(); ++i) {
        cplx m_in = 0.0, m_out = 0.0;
        double tv_in = 0.0, tv_out = 0.0;
        for (std::size_t t = 0; t < 5; ++t) {
            m_in += x[t][i];
            m_out += out[t][i];
            if (t + 1 < 5) {
                tv_in += std::abs(x[t + 1][i] - x[t][i]);
                tv_out += std::abs(out[t + 1][i] - out[t][i]);
            }
        }
        EXPECT_NEAR(std::abs(m_in - m_out), 0.0, 1e-12);
        EXPECT_LT(tv_out, tv_in);
    }
}

TEST(Grasp, ObjectiveMatchesDirectEvaluation) {
    const auto seq = generate_sequence(3, 16, 3);
    const auto y = measure(seq.frames, 8);
    std::vector<NudftOperator> ops;
    for (const auto& k : y) ops.emplace_back(k.trajectory, 16, 16);
    double data = 0.0, tv = 0.0;
    for (std::size_t t = 0; t < 3; ++t) {
        const auto r = oracle::direct_nudft(seq.frames[t], y[t].trajectory.coords);
        for (std::size_t m = 0; m < r.size(); ++m) data += std::norm(r[m] - y[t].samples[m]);
        if (t + 1 < 3) {
            for (std::size_t i = 0; i < seq.frames[t].size(); ++i) tv += std::abs(seq.frames[t + 1][i] - seq.frames[t][i]);
        }
    }
    EXPECT_NEAR(grasp_objective(ops, y, seq.frames, 0.5), data + 0.5 * tv, 1e-9 * (data + tv + 1.0));
}

TEST(Grasp, ObjectiveIsMonotoneNonIncreasing) {
    const auto seq = generate_sequence(5, 16, 4);
    const auto y = measure(seq.frames, 8);
    for (auto rule : {StepRule::backtracking, StepRule::fixed}) {
        GraspConfig cfg;
        cfg.lambda = 0.05;
        cfg.n_iter = 30;
        cfg.step_rule = rule;
        const auto r = grasp_reconstruct(y, 16, 16, cfg);
        ASSERT_EQ(r.objective.size(), 31u);
        for (std::size_t k = 1; k < r.objective.size(); ++k) {
            EXPECT_LE(r.objective[k], r.objective[k - 1] * (1.0 + 1e-12)) << "iteration " << k;
        }
        EXPECT_LT(r.objective.back(), r.objective.front());
        EXPECT_EQ(r.frames.size(), 4u);
    }
}

TEST(Grasp, LargeLambdaFlattensStaticSequence) {
    const auto ref = generate_reference_phantom(6, 16);
    const std::vector<ComplexImage> frames(4, ref);
    const auto y = measure(frames, 8);
    GraspConfig cfg;
    cfg.lambda = 20.0;
    cfg.n_iter = 60;
    const auto r = grasp_reconstruct(y, 16, 16, cfg);
    for (std::size_t t = 1; t < r.frames.size(); ++t) {
        EXPECT_LT(oracle::rel_error(r.frames[t], r.frames[t - 1]), 1e-3);
    }
}

TEST(Grasp, ZeroLambdaMatchesLeastSquaresOracle) {
    const auto seq = generate_sequence(7, 32, 1);
    const auto y = measure(seq.frames, nyquist_spoke_count(32));
    GraspConfig cfg;
    cfg.lambda = 0.0;
    cfg.n_iter = 100;
    const auto r = grasp_reconstruct(y, 32, 32, cfg);
    for (std::size_t t = 0; t < 1; ++t) {
        const NudftOperator op(y[t].trajectory, 32, 32);
        const auto cg = oracle::cg_least_squares(op, y[t].samples, 100);
        const double e_grasp = oracle::rel_error(r.frames[t], seq.frames[t]);
        const double e_cg = oracle::rel_error(cg, seq.frames[t]);
        EXPECT_LT(e_grasp, 0.01);
        EXPECT_LE(std::abs(e_grasp - e_cg), 1e-3) << "grasp " << e_grasp << " cg " << e_cg;
    }
}

TEST(Grasp, ConfigValidation) {
    GraspConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.lambda = -1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = GraspConfig{};
    cfg.n_iter = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = GraspConfig{};
    cfg.backtrack_factor = 1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    EXPECT_THROW(grasp_reconstruct({}, 16, 16, GraspConfig{}), std::invalid_argument);
}
