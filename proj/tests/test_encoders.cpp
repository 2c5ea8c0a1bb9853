#include <gtest/gtest.h>

#include <cmath>

#include "deepscene/encoders/qnetwork.hpp"
#include "deepscene/errors.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace deepscene;
using namespace deepscene::encoders;
using checks::max_relative_difference;
using checks::permute;
using checks::random_adjacency;
using checks::random_permutation;
using checks::random_set;
using checks::random_static;

namespace {

ArchitectureConfig small(EncoderKind kind) {
  auto c = ArchitectureConfig::defaults(kind);
  c.phi_widths = c.typed() ? std::vector<std::size_t>{5, 6, 6} : std::vector<std::size_t>{5, 6};
  if (!c.gcn_widths.empty()) c.gcn_widths = {6};
  if (!c.rho_widths.empty()) c.rho_widths = {6, 4};
  c.q_widths = {7, 5};
  return c;
}

std::vector<ObjectSet> typed_sets(std::size_t n_vehicles, std::size_t n_lanes, Rng& rng) {
  return {random_set(ObjectType::vehicle, kVehicleFeatures, n_vehicles, rng),
          random_set(ObjectType::lane, kLaneFeatures, n_lanes, rng, 1000)};
}

}  // namespace

TEST(Architecture, DefaultsFollowTableSizes) {
  const auto ds = ArchitectureConfig::defaults(EncoderKind::deepset);
  EXPECT_EQ(ds.phi_widths, (std::vector<std::size_t>{20, 80}));
  EXPECT_EQ(ds.rho_widths, (std::vector<std::size_t>{80, 20}));
  EXPECT_EQ(ds.q_widths, (std::vector<std::size_t>{100, 100}));
  const auto g = ArchitectureConfig::defaults(EncoderKind::gcn);
  EXPECT_EQ(g.gcn_widths, (std::vector<std::size_t>{80}));
  EXPECT_TRUE(g.rho_widths.empty());
  const auto s = ArchitectureConfig::defaults(EncoderKind::deepscene_set);
  EXPECT_EQ(s.object_types.size(), 2u);
}

TEST(Architecture, JsonRoundTrip) {
  for (const auto kind : {EncoderKind::deepset, EncoderKind::gcn, EncoderKind::deepscene_set,
                          EncoderKind::deepscene_graph, EncoderKind::vbin, EncoderKind::multi_rho}) {
    auto c = small(kind);
    c.static_dim = 15;
    nlohmann::json j = c;
    EXPECT_EQ(j.get<ArchitectureConfig>(), c) << to_string(kind);
  }
}

TEST(Architecture, ValidateRejectsInconsistentTypes) {
  auto c = ArchitectureConfig::defaults(EncoderKind::deepscene_set);
  c.object_dims = {4};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_encoder_kind("transformer"), ConfigError);
}

TEST(Encoders, SetEncodersArePermutationInvariant) {
  Rng rng(11);
  const QNetwork<float> ds(ArchitectureConfig::defaults(EncoderKind::deepset), 1);
  const QNetwork<float> dss(ArchitectureConfig::defaults(EncoderKind::deepscene_set), 2);
  const QNetwork<float> mr(ArchitectureConfig::defaults(EncoderKind::multi_rho), 3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 20));
    const auto sets = typed_sets(n, static_cast<std::size_t>(uniform_int(rng, 1, 5)), rng);
    const auto x_static = random_static(3, rng);
    std::vector<ObjectSet> shuffled{permute(sets[0], random_permutation(sets[0].size(), rng)),
                                    permute(sets[1], random_permutation(sets[1].size(), rng))};
    EXPECT_LT(max_relative_difference(deepset_forward(ds, sets[0], x_static),
                                      deepset_forward(ds, shuffled[0], x_static)),
              1e-5);
    EXPECT_LT(max_relative_difference(deepscene_set_forward<float>(dss, sets, x_static),
                                      deepscene_set_forward<float>(dss, shuffled, x_static)),
              1e-5);
    EXPECT_LT(max_relative_difference(multi_rho_forward<float>(mr, sets, x_static),
                                      multi_rho_forward<float>(mr, shuffled, x_static)),
              1e-5);
  }
}

TEST(Encoders, GraphEncodersAreEquivariantUnderRelabeling) {
  Rng rng(12);
  const QNetwork<float> gcn(ArchitectureConfig::defaults(EncoderKind::gcn), 4);
  const QNetwork<float> dsg(ArchitectureConfig::defaults(EncoderKind::deepscene_graph), 5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 15));
    const auto lanes = static_cast<std::size_t>(uniform_int(rng, 1, 4));
    const auto sets = typed_sets(n, lanes, rng);
    const auto x_static = random_static(3, rng);

    const auto adj = random_adjacency(n, 0.3, rng);
    const auto perm = random_permutation(n, rng);
    EXPECT_LT(max_relative_difference(gcn_forward(gcn, sets[0], adj, x_static),
                                      gcn_forward(gcn, permute(sets[0], perm), permute(adj, perm),
                                                  x_static)),
              1e-5);

    // Vehicles and lanes share one node list; permute within each type block.
    const auto full = random_adjacency(n + lanes, 0.3, rng);
    const auto pv = random_permutation(n, rng);
    const auto pl = random_permutation(lanes, rng);
    std::vector<std::size_t> stacked(pv);
    for (const auto i : pl) stacked.push_back(n + i);
    const std::vector<ObjectSet> shuffled{permute(sets[0], pv), permute(sets[1], pl)};
    EXPECT_LT(max_relative_difference(
                  deepscene_graph_forward<float>(dsg, sets, full, x_static),
                  deepscene_graph_forward<float>(dsg, shuffled, permute(full, stacked), x_static)),
              1e-5);
  }
}

TEST(Encoders, VbinDependsOnSlotOrder) {
  Rng rng(13);
  const QNetwork<float> vb(ArchitectureConfig::defaults(EncoderKind::vbin), 6);
  checks::randomize_biases(vb, rng);
  std::vector<float> slots(kVbinSlots * (kVehicleFeatures + 1));
  for (auto& v : slots) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  auto swapped = slots;
  const std::size_t w = kVehicleFeatures + 1;
  std::swap_ranges(swapped.begin(), swapped.begin() + w, swapped.begin() + w);
  const auto x_static = random_static(3, rng);
  EXPECT_GT(max_relative_difference(vbin_forward<float>(vb, slots, x_static),
                                    vbin_forward<float>(vb, swapped, x_static)),
            1e-4);
  EXPECT_THROW(vbin_forward<float>(vb, std::span<const float>(slots).first(w), x_static),
               DimensionError);
}

TEST(Encoders, EmptySetsGiveFiniteOutputs) {
  Rng rng(14);
  const auto x_static = random_static(3, rng);
  const QNetwork<float> ds(ArchitectureConfig::defaults(EncoderKind::deepset), 1);
  ObjectSet none{ObjectType::vehicle, kVehicleFeatures, {}, {}};
  const auto q = deepset_forward(ds, none, x_static);
  ASSERT_EQ(q.size(), 3u);
  for (const float v : q) EXPECT_TRUE(std::isfinite(v));

  // An empty lane set contributes nothing to the pooled sum.
  const QNetwork<float> dss(ArchitectureConfig::defaults(EncoderKind::deepscene_set), 2);
  const auto vehicles = random_set(ObjectType::vehicle, kVehicleFeatures, 4, rng);
  const std::vector<ObjectSet> only{vehicles};
  const std::vector<ObjectSet> with_empty{vehicles, ObjectSet{ObjectType::lane, kLaneFeatures, {}, {}}};
  EXPECT_EQ(deepscene_set_forward<float>(dss, only, x_static),
            deepscene_set_forward<float>(dss, with_empty, x_static));
}

TEST(Encoders, SharedLastLayerIsOneTensor) {
  QNetwork<float> dss(ArchitectureConfig::defaults(EncoderKind::deepscene_set), 2);
  EXPECT_EQ(dss.phi(0).layers().back().get(), dss.phi(1).layers().back().get());
  std::size_t shared = 0;
  for (const auto& p : dss.named_parameters()) shared += p.name.starts_with("phi.shared") ? 1 : 0;
  EXPECT_EQ(shared, 2u);

  auto c = ArchitectureConfig::defaults(EncoderKind::deepscene_set);
  c.shared_last_layer = false;
  QNetwork<float> separate(c, 2);
  EXPECT_NE(separate.phi(0).layers().back().get(), separate.phi(1).layers().back().get());
  EXPECT_GT(separate.parameter_count(), dss.parameter_count());
}

TEST(Encoders, WrongEntryPointOrTypeIsConfigError) {
  Rng rng(15);
  const QNetwork<float> ds(ArchitectureConfig::defaults(EncoderKind::deepset), 1);
  const auto sets = typed_sets(3, 2, rng);
  const auto x_static = random_static(3, rng);
  EXPECT_THROW(deepscene_set_forward<float>(ds, sets, x_static), ConfigError);
  EXPECT_THROW(deepset_forward(ds, sets[1], x_static), ConfigError);
}

// Double precision: the two paths sum the same terms in a different order.
TEST(Equivalence, SingleTypeDeepSceneSetMatchesDeepSet) {
  Rng rng(16);
  const QNetwork<double> ds(ArchitectureConfig::defaults(EncoderKind::deepset), 7);
  auto c = ArchitectureConfig::defaults(EncoderKind::deepscene_set);
  c.object_types = {ObjectType::vehicle};
  c.object_dims = {kVehicleFeatures};
  c.phi_widths = ds.config().phi_widths;
  c.rho_widths = ds.config().rho_widths;
  const QNetwork<double> dss(c, 8);
  checks::copy_in_order(ds.parameters(), dss.parameters());
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = random_set(ObjectType::vehicle, kVehicleFeatures,
                              static_cast<std::size_t>(uniform_int(rng, 0, 12)), rng);
    const auto x_static = random_static(3, rng);
    EXPECT_LT(max_relative_difference(deepset_forward(ds, v, x_static),
                                      deepscene_set_forward<double>(dss, {&v, 1}, x_static)),
              1e-5);
  }
}

TEST(Equivalence, IdentityGraphLayerReducesToDeepSceneSet) {
  Rng rng(17);
  const QNetwork<double> dss(ArchitectureConfig::defaults(EncoderKind::deepscene_set), 9);
  auto c = ArchitectureConfig::defaults(EncoderKind::deepscene_graph);
  c.gcn_widths = {dss.config().phi_out()};
  c.gcn_activation = nn::Activation::linear;
  c.rho_widths = dss.config().rho_widths;
  QNetwork<double> dsg(c, 10);
  EXPECT_EQ(checks::copy_by_name(dss, dsg), dss.named_parameters().size());
  auto w = dsg.gcn_layers()[0].weights();
  const std::size_t f = c.gcn_widths[0];
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < f; ++j) w.mutable_values()[i * f + j] = i == j ? 1.0 : 0.0;
  }
  for (int trial = 0; trial < 20; ++trial) {
    const auto sets = typed_sets(static_cast<std::size_t>(uniform_int(rng, 1, 12)),
                                 static_cast<std::size_t>(uniform_int(rng, 1, 4)), rng);
    const auto x_static = random_static(3, rng);
    std::vector<std::int64_t> ids(sets[0].size() + sets[1].size());
    std::iota(ids.begin(), ids.end(), 0);
    const graph::WeightedAdjacency self_loops(ids);
    EXPECT_LT(max_relative_difference(deepscene_set_forward<double>(dss, sets, x_static),
                                      deepscene_graph_forward<double>(dsg, sets, self_loops, x_static)),
              1e-5);
  }
}

TEST(Equivalence, NormalizedIdentityIsIdentity) {
  for (std::size_t n : {1u, 4u, 17u}) {
    std::vector<std::int64_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    const auto p = graph::normalize(graph::WeightedAdjacency(ids));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(p[i * n + j], i == j ? 1.0 : 0.0);
    }
  }
}

class ArchitectureGradients : public ::testing::TestWithParam<EncoderKind> {};

TEST_P(ArchitectureGradients, MatchCentralDifferences) {
  const auto kind = GetParam();
  Rng rng(100 + static_cast<int>(kind));
  for (int trial = 0; trial < 3; ++trial) {
    const auto config = small(kind);
    const QNetwork<double> net(config, static_cast<std::uint64_t>(trial));
    checks::randomize_biases(net, rng);

    std::vector<PreparedScene> scenes;
    for (int b = 0; b < 3; ++b) {
      if (kind == EncoderKind::vbin) {
        PreparedScene p;
        p.scene.static_features = random_static(3, rng);
        p.slots.resize(kVbinSlots * (kVehicleFeatures + 1));
        for (auto& v : p.slots) v = static_cast<float>(uniform(rng, -1.0, 1.0));
        scenes.push_back(std::move(p));
        continue;
      }
      SceneState s;
      const auto sets = typed_sets(static_cast<std::size_t>(uniform_int(rng, 1, 5)),
                                   static_cast<std::size_t>(uniform_int(rng, 1, 3)), rng);
      s.dynamic_sets.push_back(sets[0]);
      if (config.typed()) s.dynamic_sets.push_back(sets[1]);
      s.static_features = random_static(3, rng);
      s.ego_id = -1;
      std::size_t nodes = sets[0].size() + (config.typed() ? sets[1].size() : 0);
      const auto adj = random_adjacency(nodes, 0.5, rng);
      scenes.push_back(prepare_scene(s, config, {}, config.uses_graph() ? &adj : nullptr));
    }
    std::vector<const PreparedScene*> ptrs;
    for (const auto& s : scenes) ptrs.push_back(&s);
    const auto batch = make_batch<double>(std::span<const PreparedScene* const>(ptrs), config);

    std::vector<double> rv(3 * config.num_actions);
    for (auto& v : rv) v = uniform(rng, -1.0, 1.0);
    const nn::Tensor<double> r({3, config.num_actions}, rv);
    auto params = net.parameters();
    const auto res = checks::check_gradients(
        [&] { return nn::sum(nn::mul(net.forward(batch), r)); },
        std::span<nn::Tensor<double>>(params));
    EXPECT_LT(res.max_relative_error, 1e-4) << to_string(kind) << " trial " << trial;
    EXPECT_GT(res.checked, 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(AllKinds, ArchitectureGradients,
                         ::testing::Values(EncoderKind::deepset, EncoderKind::deepscene_set,
                                           EncoderKind::gcn, EncoderKind::deepscene_graph,
                                           EncoderKind::vbin, EncoderKind::multi_rho),
                         [](const auto& info) { return to_string(info.param); });
