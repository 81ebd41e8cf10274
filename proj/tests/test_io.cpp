#include <gtest/gtest.h>

#include "convlr/binary_io.hpp"
#include "convlr/checkpoint.hpp"
#include "support.hpp"

using namespace convlr;

TEST(BinaryIo, KspaceRoundTripIsBitwise) {
    const auto traj = golden_angle_trajectory(3, 8, 5);
    const KSpaceData d{oracle::random_samples(traj.n_samples(), 1), traj};
    const auto back = decode_kspace(encode_kspace(d));
    EXPECT_EQ(back.samples, d.samples);
    EXPECT_EQ(back.trajectory, d.trajectory);
}

TEST(BinaryIo, ImageRoundTripIsBitwise) {
    const auto img = oracle::random_image(6, 4, 2);
    EXPECT_EQ(decode_image(encode_image(img)), img);
    const auto dir = oracle::scratch_dir("io");
    write_image(dir / "a.img", img);
    EXPECT_EQ(read_image(dir / "a.img"), img);
}

TEST(BinaryIo, ImageHeaderLayout) {
    const auto bytes = encode_image(ComplexImage(3, 2));
    ASSERT_EQ(bytes.size(), 16u + 3 * 2 * 16);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "IMG1");
    EXPECT_EQ(bytes[4], 3);
    EXPECT_EQ(bytes[8], 2);
}

TEST(BinaryIo, RejectsCorruptInput) {
    auto bytes = encode_image(ComplexImage(2, 2));
    bytes[0] = 'X';
    EXPECT_THROW(decode_image(bytes), std::runtime_error);
    auto k = encode_kspace(KSpaceData{std::vector<cplx>(8), golden_angle_trajectory(1, 8, 0)});
    k.pop_back();
    EXPECT_THROW(decode_kspace(k), std::runtime_error);
    EXPECT_THROW(read_image("/nonexistent/x.img"), std::runtime_error);
}

TEST(Checkpoint, RoundTripIsBitwise) {
    ParamSet p;
    p.add("a", ad::Tensor::parameter({2, 3}, oracle::random_values(6, 1)));
    p.add("b.c", ad::Tensor::parameter({1}, {0.25}));
    const auto back = decode_checkpoint(encode_checkpoint(p));
    ASSERT_EQ(back.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back.entries()[i].name, p.entries()[i].name);
        EXPECT_EQ(back.entries()[i].tensor.shape(), p.entries()[i].tensor.shape());
        const auto a = back.entries()[i].tensor.values();
        const auto b = p.entries()[i].tensor.values();
        EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
    auto bytes = encode_checkpoint(p);
    bytes.push_back(0);
    EXPECT_THROW(decode_checkpoint(bytes), std::runtime_error);
}

TEST(Checkpoint, ParamSetGuards) {
    ParamSet p;
    p.add("a", ad::Tensor::parameter({1}, {1.0}));
    EXPECT_THROW(p.add("a", ad::Tensor::parameter({1}, {1.0})), std::invalid_argument);
    EXPECT_THROW(p.get("missing"), std::out_of_range);
    auto q = p.clone();
    q.entries()[0].tensor.mutable_values()[0] = 5.0;
    EXPECT_EQ(p.get("a").values()[0], 1.0);
    p.assign_values(q);
    EXPECT_EQ(p.get("a").values()[0], 5.0);
}
