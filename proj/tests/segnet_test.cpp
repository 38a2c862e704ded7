#include <gtest/gtest.h>

#include "segnet_support.hpp"
#include "test_support.hpp"

namespace volseg::segnet {
namespace {

TEST(Config, Validation) {
  NetworkConfig c;
  EXPECT_NO_THROW(c.validate());
  c.attention_dim = 10;
  c.attention_heads = 3;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = NetworkConfig{};
  c.patch_size = {24, 32, 32};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = NetworkConfig{};
  c.patch_size = {2, 32, 32};
  c.depth = 2;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = NetworkConfig{};
  c.num_classes = 3;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Config, JsonRoundTripKeepsDefaults) {
  NetworkConfig c = nlohmann::json::parse(R"({"depth": 3, "learning_rate": 0.05})").get<NetworkConfig>();
  EXPECT_EQ(c.depth, 3u);
  EXPECT_EQ(c.learning_rate, 0.05);
  EXPECT_EQ(c.base_channels, NetworkConfig{}.base_channels);
  const NetworkConfig back = nlohmann::json(c).get<NetworkConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
}

TEST(Weights, ParameterCountMatchesLayout) {
  for (std::size_t depth : {1u, 2u, 3u}) {
    for (std::size_t base : {1u, 2u, 4u}) {
      NetworkConfig c;
      c.depth = depth;
      c.base_channels = base;
      const Weights<float> w(c);
      EXPECT_EQ(w.parameter_count(), parameter_count(c)) << depth << " " << base;
    }
  }
}

TEST(Weights, InitialisationIsSeeded) {
  NetworkConfig c = testing::micro_config();
  EXPECT_EQ(initialize_weights<float>(c), initialize_weights<float>(c));
  NetworkConfig other = c;
  other.seed = c.seed + 1;
  EXPECT_FALSE(initialize_weights<float>(c) == initialize_weights<float>(other));
}

TEST(SegNet, ForwardShapeAndFinite) {
  NetworkConfig c;
  c.patch_size = {16, 16, 16};
  c.depth = 2;
  const auto w = initialize_weights<float>(c);
  const SegNet<float> net(c, w);
  Tensor<float> x(1, c.patch_size);
  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0, 1);
  for (auto& v : x.vec()) v = n(rng);
  const auto y = net.forward(x);
  EXPECT_EQ(y.channels(), 2u);
  EXPECT_EQ(y.dims(), c.patch_size);
  for (float v : y.vec()) ASSERT_TRUE(std::isfinite(v));
  EXPECT_THROW(net.forward(Tensor<float>(1, {8, 16, 16})), ShapeMismatch);
}

TEST(SegNet, ZeroHeadGivesUniformScores) {
  NetworkConfig c = testing::micro_config();
  auto w = initialize_weights<double>(c);
  std::fill(w["head.w"].begin(), w["head.w"].end(), 0.0);
  const SegNet<double> net(c, w);
  const auto batch = testing::micro_batch(c, 3);
  const auto y = net.forward(batch[0].image);
  for (std::size_t i = 0; i < y.voxels(); ++i) {
    EXPECT_EQ(y.channel(0)[i], 0.0);
    EXPECT_EQ(y.channel(1)[i], 0.0);
  }
}

TEST(SegNet, GradientsMatchFiniteDifferences) {
  const NetworkConfig c = testing::micro_config();
  const auto w = initialize_weights<double>(c);
  const auto r = testing::gradient_check(w, testing::micro_batch(c, 11), 1e-4);
  EXPECT_EQ(r.checked, parameter_count(c));
  EXPECT_EQ(r.failed, 0u) << "worst " << r.worst_rel << " at " << r.worst_param;
}

TEST(Loss, PerfectConfidentPredictionIsNearZero) {
  Tensor<double> s(2, {2, 2, 1});
  const std::vector<std::uint8_t> lab{1, 0, 1, 0};
  for (std::size_t i = 0; i < 4; ++i) {
    s.channel(0)[i] = lab[i] ? -20 : 20;
    s.channel(1)[i] = lab[i] ? 20 : -20;
  }
  Tensor<double> g;
  EXPECT_LT(dice_ce_loss(s, std::span<const std::uint8_t>(lab), g), 1e-6);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 1);
  Tensor<double> s(2, {3, 2, 2});
  for (auto& v : s.vec()) v = n(rng);
  std::vector<std::uint8_t> lab(12);
  for (auto& l : lab) l = rng() & 1;
  Tensor<double> g, scratch;
  dice_ce_loss(s, std::span<const std::uint8_t>(lab), g);
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto p = s, m = s;
    p.vec()[i] += 1e-6;
    m.vec()[i] -= 1e-6;
    const double fd = (dice_ce_loss(p, std::span<const std::uint8_t>(lab), scratch) -
                       dice_ce_loss(m, std::span<const std::uint8_t>(lab), scratch)) / 2e-6;
    EXPECT_NEAR(g.vec()[i], fd, 1e-7);
  }
}

TEST(WeightsFile, RoundTripAndErrors) {
  NetworkConfig c = testing::micro_config();
  const auto w = initialize_weights<float>(c);
  const auto bytes = serialize_weights(w);
  EXPECT_EQ(deserialize_weights<float>(bytes), w);
  EXPECT_EQ(deserialize_weights<float>(bytes).config().attention_dim, c.attention_dim);

  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_weights<float>(bad), BadMagic);
  bad = bytes;
  bad[4] = 9;
  EXPECT_THROW(deserialize_weights<float>(bad), SchemaError);
  bad = bytes;
  bad.resize(bytes.size() - 3);
  EXPECT_THROW(deserialize_weights<float>(bad), TruncatedData);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(deserialize_weights<float>(bad), SchemaError);
  bad = bytes;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bad.data() + bad.size() - 4, &nan, 4);
  EXPECT_THROW(deserialize_weights<float>(bad), SchemaError);

  const auto dir = testing::temp_dir("weights");
  save_weights(dir / "w.vsgw", w);
  EXPECT_EQ(load_weights<float>(dir / "w.vsgw"), w);
  EXPECT_THROW(load_weights<float>(dir / "missing.vsgw"), IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace volseg::segnet
