#include <gtest/gtest.h>

#include <cmath>

#include "convlr/kspace.hpp"
#include "convlr/simdata.hpp"
#include "support.hpp"

using namespace convlr;

TEST(Trajectory, SingleSpokeStartsAtZeroDegrees) {
    const auto t = golden_angle_trajectory(1, 8, 0);
    ASSERT_EQ(t.n_spokes(), 1u);
    EXPECT_EQ(t.spoke_angles[0], 0.0);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(t.coords[i][1], 0.0);
}

TEST(Trajectory, SecondSpokeIsGoldenAngle) {
    const double ga = 180.0 * 2.0 / (1.0 + std::sqrt(5.0));
    const auto t = golden_angle_trajectory(2, 8, 0);
    EXPECT_NEAR(t.spoke_angles[1], ga, 1e-12);
    EXPECT_NEAR(t.spoke_angles[1], 111.2461, 1e-4);
    EXPECT_NEAR(golden_angle_degrees(), ga, 1e-12);
}

TEST(Trajectory, StartIndexContinuesTheSequence) {
    const auto whole = golden_angle_trajectory(12, 8, 0);
    const auto tail = golden_angle_trajectory(4, 8, 8);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(tail.spoke_angles[j], whole.spoke_angles[8 + j], 1e-9);
}

TEST(Trajectory, FullNyquistGeometryFor256) {
    EXPECT_EQ(nyquist_spoke_count(256), 403u);
    EXPECT_EQ(nyquist_spoke_count(32), 51u);
    const auto t = golden_angle_trajectory(402, 512, 0);
    EXPECT_EQ(t.n_samples(), 402u * 512u);
    for (const auto& k : t.coords) {
        EXPECT_LE(std::hypot(k[0], k[1]), 0.5 + 1e-12);
    }
    EXPECT_DOUBLE_EQ(readout_radius(256, 512), 0.0);
    EXPECT_DOUBLE_EQ(readout_radius(0, 512), -0.5);
}

TEST(Trajectory, RejectsBadArguments) {
    EXPECT_THROW(golden_angle_trajectory(0, 8, 0), std::invalid_argument);
    EXPECT_THROW(golden_angle_trajectory(4, 7, 0), std::invalid_argument);
    EXPECT_THROW(trajectory_from_angles({190.0}, 8, 0), std::invalid_argument);
}

TEST(Nudft, ZeroImageGivesZeroSamples) {
    const auto y = nudft_forward(ComplexImage(8, 8), golden_angle_trajectory(4, 16, 0));
    for (const auto& s : y.samples) EXPECT_EQ(s, cplx(0.0));
}

TEST(Nudft, CenteredImpulseHasUnitMagnitudeEverywhere) {
    ComplexImage x(16, 16);
    x.at(8, 8) = 1.0;
    const auto y = nudft_forward(x, golden_angle_trajectory(5, 32, 3));
    for (const auto& s : y.samples) EXPECT_NEAR(std::abs(s), 1.0, 1e-14);
}

TEST(Nudft, CartesianDegenerateMatchesDirectDft) {
    for (std::size_t n : {8u, 12u}) {
        const auto x = oracle::random_image(n, n, 11 + n);
        const auto traj = oracle::cartesian_trajectory(n, n);
        const auto y = nudft_forward(x, traj);
        const auto ref = oracle::cartesian_dft(x);
        EXPECT_LT(oracle::rel_error(y.samples, ref), 1e-9) << n;
    }
}

TEST(Nudft, RadialMatchesDirectSummation) {
    const auto x = oracle::random_image(16, 16, 5);
    const auto traj = golden_angle_trajectory(8, 32, 17);
    EXPECT_LT(oracle::rel_error(nudft_forward(x, traj).samples, oracle::direct_nudft(x, traj.coords)), 1e-12);
}

TEST(Nudft, AdjointIdentityOnRandomCases) {
    for (std::uint64_t c = 0; c < 10; ++c) {
        const auto traj = golden_angle_trajectory(8, 32, c * 8);
        NudftOperator op(traj, 16, 16);
        const auto x = oracle::random_image(16, 16, 100 + c);
        const auto y = oracle::random_samples(traj.n_samples(), 200 + c);
        const auto ex = op.forward(x);
        const auto ehy = op.adjoint(y);
        const cplx lhs = oracle::inner(y, ex);
        const cplx rhs = oracle::inner(ehy.values(), x.values());
        EXPECT_LT(std::abs(lhs - rhs) / (oracle::norm2(ex) * oracle::norm2(y)), 1e-10);
    }
}

TEST(Nudft, AdjointOfZeroSamplesIsZero) {
    const auto traj = golden_angle_trajectory(3, 16, 0);
    const auto img = nudft_adjoint(KSpaceData{std::vector<cplx>(traj.n_samples()), traj}, 8, 8);
    for (const auto& v : img.values()) EXPECT_EQ(v, cplx(0.0));
}

TEST(Nudft, CartesianAdjointMatchesConjugateTransposeDft) {
    const std::size_t n = 8;
    const auto traj = oracle::cartesian_trajectory(n, n);
    const auto y = oracle::random_samples(traj.n_samples(), 3);
    const auto got = nudft_adjoint(KSpaceData{y, traj}, n, n);
    EXPECT_LT(oracle::rel_error(got, oracle::cartesian_dft_adjoint(y, n, n)), 1e-9);
}

TEST(Nudft, NormalEqualsAdjointOfForward) {
    const auto traj = golden_angle_trajectory(6, 16, 2);
    NudftOperator op(traj, 8, 8);
    const auto x = oracle::random_image(8, 8, 9);
    EXPECT_LT(oracle::rel_error(op.normal(x), op.adjoint(op.forward(x))), 1e-14);
}

TEST(Nudft, RejectsMismatchedShapes) {
    const auto traj = golden_angle_trajectory(2, 8, 0);
    NudftOperator op(traj, 8, 8);
    EXPECT_THROW(op.forward(ComplexImage(4, 8)), std::invalid_argument);
    EXPECT_THROW(op.adjoint(std::vector<cplx>(3)), std::invalid_argument);
    std::vector<double> neg(traj.n_samples(), -1.0);
    EXPECT_THROW(nudft_adjoint(KSpaceData{std::vector<cplx>(traj.n_samples()), traj}, 8, 8, std::span<const double>(neg)),
                 std::invalid_argument);
}

TEST(DensityCompensation, RingSumsFollowPolarAreaElement) {
    const std::size_t n_ro = 32;
    const auto traj = golden_angle_trajectory(7, n_ro, 0);
    const auto w = density_compensation(traj, 16, 16);
    ASSERT_EQ(w.size(), traj.n_samples());
    for (double v : w) EXPECT_GE(v, 0.0);
    // Both half-rings at radius |r| together cover a full turn: sum = scale * 2 pi |r| dr.
    const double dr = 1.0 / n_ro;
    std::vector<double> scale;
    for (std::size_t i = 1; i < n_ro / 2; ++i) {
        double ring = 0.0;
        for (std::size_t s = 0; s < 7; ++s) ring += w[s * n_ro + n_ro / 2 + i] + w[s * n_ro + n_ro / 2 - i];
        scale.push_back(ring / (2.0 * M_PI * (double(i) / n_ro) * dr));
    }
    for (double v : scale) EXPECT_NEAR(v, scale.front(), 1e-12 * scale.front());
}

TEST(DensityCompensation, UniformAnglesGiveMirrorSymmetricSpokes) {
    std::vector<double> angles;
    for (int s = 0; s < 6; ++s) angles.push_back(30.0 * s);
    const auto traj = trajectory_from_angles(angles, 32, 0);
    const auto w = density_compensation(traj, 16, 16);
    for (std::size_t s = 0; s < 6; ++s) {
        for (std::size_t i = 1; i < 32; ++i) EXPECT_NEAR(w[s * 32 + i], w[s * 32 + (32 - i)], 1e-15);
        EXPECT_NEAR(w[s * 32 + 5], w[5], 1e-15);
    }
}

TEST(DensityCompensation, WeightingBeatsBestScaledPlainAdjoint) {
    const std::size_t n = 64;
    const auto gt = generate_reference_phantom(3, n);
    const auto y = nudft_forward(gt, golden_angle_trajectory(nyquist_spoke_count(n), 2 * n, 0));
    const auto weighted = regrid_reconstruct(y, n, n);
    auto plain = nudft_adjoint(y, n, n);
    // Give the unweighted adjoint its least-squares optimal global scale.
    const cplx scale = oracle::inner(plain.values(), gt.values()) / std::pow(oracle::norm2(plain.values()), 2);
    for (auto& v : plain.values()) v *= scale;
    EXPECT_LT(oracle::rel_error(weighted, gt), oracle::rel_error(plain, gt));
}

TEST(Regrid, ZeroDataGivesZeroImage) {
    const auto traj = golden_angle_trajectory(4, 16, 0);
    const auto img = regrid_reconstruct(KSpaceData{std::vector<cplx>(traj.n_samples()), traj}, 8, 8);
    for (const auto& v : img.values()) EXPECT_EQ(v, cplx(0.0));
}

TEST(Regrid, FullSamplingIsAccurateAndUndersamplingStreaks) {
    const std::size_t n = 32;
    const auto gt = generate_reference_phantom(21, n);
    const auto full = regrid_reconstruct(nudft_forward(gt, golden_angle_trajectory(nyquist_spoke_count(n), 2 * n, 0)), n, n);
    const auto sparse = regrid_reconstruct(nudft_forward(gt, golden_angle_trajectory(8, 2 * n, 0)), n, n);
    const double e_full = oracle::rel_error(full, gt);
    EXPECT_LT(e_full, 0.05);
    EXPECT_GT(oracle::rel_error(sparse, gt), e_full);
}

TEST(PowerIteration, MatchesOracle) {
    NudftOperator op(golden_angle_trajectory(8, 16, 0), 8, 8);
    const double ref = oracle::power_iteration(op, 300);
    EXPECT_NEAR(estimate_max_eigenvalue(op, 200), ref, 1e-6 * ref);
}

TEST(Noise, DeterministicAndZeroStdIsNoOp) {
    const auto traj = golden_angle_trajectory(2, 8, 0);
    KSpaceData a{std::vector<cplx>(traj.n_samples()), traj};
    auto b = a, c = a;
    add_complex_noise(a, 0.1, 42);
    add_complex_noise(b, 0.1, 42);
    EXPECT_EQ(a.samples, b.samples);
    add_complex_noise(c, 0.0, 42);
    for (const auto& s : c.samples) EXPECT_EQ(s, cplx(0.0));
    EXPECT_THROW(add_complex_noise(c, -1.0, 1), std::invalid_argument);
}
