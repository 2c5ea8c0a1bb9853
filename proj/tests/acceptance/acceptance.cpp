// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if a gating
// criterion fails. Heavy training criteria (7-9) take about an hour on one core.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "deepscene/encoders/qnetwork.hpp"
#include "deepscene/errors.hpp"
#include "deepscene/nn/layers.hpp"
#include "deepscene/nn/ops.hpp"
#include "deepscene/rl/pipeline.hpp"
#include "deepscene/sim/policy.hpp"
#include "deepscene/tools/cli.hpp"
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
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, soft_fail };

struct Outcome {
  Verdict verdict = Verdict::fail;
  std::string detail;
  bool gating = true;
  nlohmann::json values = nlohmann::json::object();
};

Outcome make(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void note(const std::string& s) {
  std::cerr << "  .. " << s << std::endl;
}

std::vector<ObjectSet> typed_sets(std::size_t n_vehicles, std::size_t n_lanes, Rng& rng) {
  return {random_set(ObjectType::vehicle, kVehicleFeatures, n_vehicles, rng),
          random_set(ObjectType::lane, kLaneFeatures, n_lanes, rng, 1000)};
}

// 1 --------------------------------------------------------------------------

// Worst relative difference per encoder over `pairs` random (scene, permutation)
// pairs, in deepset, deepscene_set, multi_rho, gcn, deepscene_graph order.
template <typename T>
std::array<double, 5> invariance_gaps(int pairs) {
  Rng rng(1001);
  const QNetwork<T> ds(ArchitectureConfig::defaults(EncoderKind::deepset), 1);
  const QNetwork<T> dss(ArchitectureConfig::defaults(EncoderKind::deepscene_set), 2);
  const QNetwork<T> mr(ArchitectureConfig::defaults(EncoderKind::multi_rho), 3);
  const QNetwork<T> gcn(ArchitectureConfig::defaults(EncoderKind::gcn), 4);
  const QNetwork<T> dsg(ArchitectureConfig::defaults(EncoderKind::deepscene_graph), 5);
  std::array<double, 5> worst{};
  for (int trial = 0; trial < pairs; ++trial) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 30));
    const auto lanes = static_cast<std::size_t>(uniform_int(rng, 1, 5));
    const auto sets = typed_sets(n, lanes, rng);
    const auto x_static = random_static(3, rng);
    const auto pv = random_permutation(n, rng);
    const auto pl = random_permutation(lanes, rng);
    const std::vector<ObjectSet> shuffled{permute(sets[0], pv), permute(sets[1], pl)};

    worst[0] = std::max(worst[0], max_relative_difference(deepset_forward(ds, sets[0], x_static),
                                                          deepset_forward(ds, shuffled[0], x_static)));
    worst[1] = std::max(worst[1], max_relative_difference(deepscene_set_forward<T>(dss, sets, x_static),
                                                          deepscene_set_forward<T>(dss, shuffled, x_static)));
    worst[2] = std::max(worst[2], max_relative_difference(multi_rho_forward<T>(mr, sets, x_static),
                                                          multi_rho_forward<T>(mr, shuffled, x_static)));

    const auto adj = random_adjacency(n, 0.3, rng);
    worst[3] = std::max(worst[3], max_relative_difference(gcn_forward(gcn, sets[0], adj, x_static),
                                                          gcn_forward(gcn, shuffled[0], permute(adj, pv), x_static)));

    // Vehicles and lanes share one node list; permute within each type block.
    const auto full = random_adjacency(n + lanes, 0.3, rng);
    std::vector<std::size_t> stacked(pv);
    for (const auto i : pl) stacked.push_back(n + i);
    worst[4] = std::max(worst[4], max_relative_difference(
                                      deepscene_graph_forward<T>(dsg, sets, full, x_static),
                                      deepscene_graph_forward<T>(dsg, shuffled, permute(full, stacked), x_static)));
  }
  return worst;
}

// Gated in double: float sums in a different order drift by ~1e-7 absolute,
// which is a large relative error on Q values near zero.
Outcome permutation_invariance() {
  constexpr int kPairs = 1000;
  const auto t0 = std::chrono::steady_clock::now();
  const auto exact = invariance_gaps<double>(kPairs);
  const double secs = seconds_since(t0);
  const auto single = invariance_gaps<float>(kPairs);
  const char* names[5] = {"deepset", "deepscene_set", "multi_rho", "gcn", "deepscene_graph"};
  std::string detail = std::to_string(kPairs) + " pairs per encoder, max rel diff (double)";
  std::string floats = "; float32 for reference";
  bool ok = secs < 60.0;
  Outcome out;
  for (int k = 0; k < 5; ++k) {
    detail += std::string(" ") + names[k] + "=" + fmt("%.1e", exact[k]);
    floats += std::string(" ") + names[k] + "=" + fmt("%.1e", single[k]);
    ok = ok && exact[k] <= 1e-5;
    out.values[names[k]] = exact[k];
    out.values[std::string(names[k]) + "_float"] = single[k];
  }
  out.verdict = ok ? Verdict::pass : Verdict::fail;
  out.detail = detail + ", " + fmt("%.1f", secs) + " s (limit 60 s)" + floats;
  out.values["seconds"] = secs;
  return out;
}

// 2 --------------------------------------------------------------------------

nn::Tensor<double> random_tensor(nn::Shape shape, Rng& rng, bool grad = true) {
  std::vector<double> v(nn::element_count(shape));
  for (auto& x : v) x = uniform(rng, -1.0, 1.0);
  return nn::Tensor<double>(std::move(shape), std::move(v), grad);
}

using Grad = checks::GradCheckResult;

Grad merge(Grad a, const Grad& b) {
  a.max_relative_error = std::max(a.max_relative_error, b.max_relative_error);
  a.checked += b.checked;
  a.kinks += b.kinks;
  return a;
}

Grad op_gradients(std::uint64_t seed) {
  using nn::Tensor;
  Rng rng(seed);
  auto x = random_tensor({5, 4}, rng);
  auto w = random_tensor({4, 3}, rng);
  auto b = random_tensor({3}, rng);
  auto y = random_tensor({5, 3}, rng);
  auto l = random_tensor({2, 3}, rng);
  const std::vector<std::size_t> offsets{0, 2, 2, 5};
  const std::vector<std::size_t> rows{4, 0, 0, 2};
  const std::vector<std::size_t> picks{0, 2, 1, 1, 0};
  std::vector<double> target(5);
  for (auto& t : target) t = uniform(rng, -1.0, 1.0);
  nn::SparseMatrix<double> a;
  a.rows = a.cols = 5;
  a.row_ptr = {0, 2, 3, 5, 6, 7};
  a.col_index = {0, 1, 1, 2, 4, 3, 4};
  a.values.resize(7);
  for (auto& v : a.values) v = uniform(rng, 0.1, 1.0);
  const auto r1 = random_tensor({5, 3}, rng, false);
  const auto r2 = random_tensor({3, 3}, rng, false);
  const auto r3 = random_tensor({5, 7}, rng, false);
  const auto r4 = random_tensor({7, 3}, rng, false);
  const auto r5 = random_tensor({4, 3}, rng, false);
  const auto r6 = random_tensor({3, 5}, rng, false);

  const std::vector<std::function<Tensor<double>()>> losses{
      [&] { return nn::sum(nn::mul(nn::linear(x, w, b), r1)); },
      [&] { return nn::sum(nn::mul(nn::relu(nn::matmul(x, w)), r1)); },
      [&] { return nn::sum(nn::mul(nn::sub(nn::add(nn::matmul(x, w), y), nn::scale(y, 0.3)), r1)); },
      [&] { return nn::sum(nn::mul(nn::square(y), r1)); },
      [&] { return nn::mean(nn::mul(y, nn::matmul(x, w))); },
      [&] { return nn::sum(nn::mul(nn::segment_sum(nn::matmul(x, w), offsets), r2)); },
      [&] { return nn::sum(nn::mul(nn::segment_max(nn::matmul(x, w), offsets), r2)); },
      [&] {
        const std::vector<Tensor<double>> parts{nn::matmul(x, w), x};
        return nn::sum(nn::mul(nn::concat_cols(std::span<const Tensor<double>>(parts)), r3));
      },
      [&] {
        const std::vector<Tensor<double>> parts{y, l};
        return nn::sum(nn::mul(nn::concat_rows(std::span<const Tensor<double>>(parts)), r4));
      },
      [&] { return nn::sum(nn::mul(nn::gather_rows(nn::matmul(x, w), rows), r5)); },
      [&] { return nn::sum(nn::mul(nn::reshape(nn::matmul(x, w), {3, 5}), r6)); },
      [&] { return nn::sum(nn::mul(nn::sparse_matmul(a, nn::matmul(x, w)), r1)); },
      [&] { return nn::mse(nn::pick(nn::linear(x, w, b), picks), std::span<const double>(target)); },
  };
  std::vector<Tensor<double>> params{x, w, b, y, l};
  Grad worst;
  for (const auto& loss : losses) worst = merge(worst, checks::check_gradients(loss, std::span<Tensor<double>>(params)));
  return worst;
}

Grad mlp_gradients(std::uint64_t seed) {
  Rng rng(seed);
  nn::Mlp<double> mlp(4, {6, 5, 3}, nn::Activation::relu, nn::Activation::linear, rng);
  const auto x = random_tensor({7, 4}, rng, false);
  const auto r = random_tensor({7, 3}, rng, false);
  std::vector<nn::NamedParameter<double>> named;
  mlp.collect("mlp", named);
  std::vector<nn::Tensor<double>> params;
  for (auto& p : named) {
    if (p.name.ends_with("bias")) {
      for (auto& v : p.tensor.mutable_values()) v = uniform(rng, -0.2, 0.2);
    }
    params.push_back(p.tensor);
  }
  return checks::check_gradients([&] { return nn::sum(nn::mul(mlp.forward(x), r)); },
                                 std::span<nn::Tensor<double>>(params));
}

ArchitectureConfig small_architecture(EncoderKind kind) {
  auto c = ArchitectureConfig::defaults(kind);
  c.phi_widths = c.typed() ? std::vector<std::size_t>{5, 6, 6} : std::vector<std::size_t>{5, 6};
  if (!c.gcn_widths.empty()) c.gcn_widths = {6};
  if (!c.rho_widths.empty()) c.rho_widths = {6, 4};
  c.q_widths = {7, 5};
  return c;
}

Grad architecture_gradients(EncoderKind kind, std::uint64_t seed) {
  Rng rng(seed);
  const auto config = small_architecture(kind);
  const QNetwork<double> net(config, seed);
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
    const std::size_t nodes = sets[0].size() + (config.typed() ? sets[1].size() : 0);
    const auto adj = random_adjacency(nodes, 0.5, rng);
    scenes.push_back(prepare_scene(s, config, {}, config.uses_graph() ? &adj : nullptr));
  }
  std::vector<const PreparedScene*> ptrs;
  for (const auto& s : scenes) ptrs.push_back(&s);
  const auto batch = make_batch<double>(std::span<const PreparedScene* const>(ptrs), config);
  const auto r = random_tensor({3, config.num_actions}, rng, false);
  auto params = net.parameters();
  return checks::check_gradients([&] { return nn::sum(nn::mul(net.forward(batch), r)); },
                                 std::span<nn::Tensor<double>>(params));
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  constexpr int kInstances = 10;
  Grad ops, mlp;
  const std::vector<EncoderKind> kinds{EncoderKind::deepset, EncoderKind::deepscene_set, EncoderKind::gcn,
                                       EncoderKind::deepscene_graph, EncoderKind::vbin, EncoderKind::multi_rho};
  std::vector<Grad> arch(kinds.size());
  for (int i = 0; i < kInstances; ++i) {
    const auto seed = static_cast<std::uint64_t>(2000 + i);
    ops = merge(ops, op_gradients(seed));
    mlp = merge(mlp, mlp_gradients(seed));
    for (std::size_t k = 0; k < kinds.size(); ++k) arch[k] = merge(arch[k], architecture_gradients(kinds[k], seed * 10 + k));
  }
  const double secs = seconds_since(t0);
  Outcome out;
  bool ok = ops.max_relative_error < 1e-4 && mlp.max_relative_error < 1e-4 && secs < 300.0;
  std::string detail = std::to_string(kInstances) + " instances, max rel err ops=" + fmt("%.1e", ops.max_relative_error) +
                       " dense/mlp=" + fmt("%.1e", mlp.max_relative_error);
  std::size_t checked = ops.checked + mlp.checked, kinks = ops.kinks + mlp.kinks;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    ok = ok && arch[k].max_relative_error < 1e-4;
    detail += " " + to_string(kinds[k]) + "=" + fmt("%.1e", arch[k].max_relative_error);
    out.values[to_string(kinds[k])] = arch[k].max_relative_error;
    checked += arch[k].checked;
    kinks += arch[k].kinks;
  }
  detail += "; " + std::to_string(checked) + " coordinates, " + std::to_string(kinks) +
            " judged one-sided at a ReLU kink; " + fmt("%.1f", secs) + " s (limit 300 s)";
  out.values["ops"] = ops.max_relative_error;
  out.values["mlp"] = mlp.max_relative_error;
  out.values["kinks"] = kinks;
  out.values["seconds"] = secs;
  out.verdict = ok ? Verdict::pass : Verdict::fail;
  out.detail = detail;
  return out;
}

// 3 --------------------------------------------------------------------------

Outcome degenerate_equivalences() {
  Rng rng(3003);
  constexpr int kTrials = 100;

  // (a) one object type
  const QNetwork<double> ds(ArchitectureConfig::defaults(EncoderKind::deepset), 7);
  auto ca = ArchitectureConfig::defaults(EncoderKind::deepscene_set);
  ca.object_types = {ObjectType::vehicle};
  ca.object_dims = {kVehicleFeatures};
  ca.phi_widths = ds.config().phi_widths;
  ca.rho_widths = ds.config().rho_widths;
  const QNetwork<double> single(ca, 8);
  checks::copy_in_order(ds.parameters(), single.parameters());
  double worst_a = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    const auto v = random_set(ObjectType::vehicle, kVehicleFeatures, static_cast<std::size_t>(uniform_int(rng, 0, 20)),
                              rng);
    const auto x_static = random_static(3, rng);
    worst_a = std::max(worst_a, max_relative_difference(deepset_forward(ds, v, x_static),
                                                        deepscene_set_forward<double>(single, {&v, 1}, x_static)));
  }

  // (b) self-loops only, W = I, linear activation
  const QNetwork<double> dss(ArchitectureConfig::defaults(EncoderKind::deepscene_set), 9);
  auto cb = ArchitectureConfig::defaults(EncoderKind::deepscene_graph);
  cb.gcn_widths = {dss.config().phi_out()};
  cb.gcn_activation = nn::Activation::linear;
  cb.rho_widths = dss.config().rho_widths;
  QNetwork<double> dsg(cb, 10);
  const bool copied_all = checks::copy_by_name(dss, dsg) == dss.named_parameters().size();
  auto w = dsg.gcn_layers()[0].weights();
  const std::size_t f = cb.gcn_widths[0];
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < f; ++j) w.mutable_values()[i * f + j] = i == j ? 1.0 : 0.0;
  }
  double worst_b = 0.0;
  for (int t = 0; t < kTrials; ++t) {
    const auto sets = typed_sets(static_cast<std::size_t>(uniform_int(rng, 1, 20)),
                                 static_cast<std::size_t>(uniform_int(rng, 1, 5)), rng);
    const auto x_static = random_static(3, rng);
    std::vector<std::int64_t> ids(sets[0].size() + sets[1].size());
    std::iota(ids.begin(), ids.end(), 0);
    const graph::WeightedAdjacency self_loops(ids);
    worst_b = std::max(worst_b, max_relative_difference(deepscene_set_forward<double>(dss, sets, x_static),
                                                        deepscene_graph_forward<double>(dsg, sets, self_loops,
                                                                                        x_static)));
  }

  // (c)
  bool exact = true;
  for (std::size_t n = 1; n <= 60; ++n) {
    std::vector<std::int64_t> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    const auto p = graph::normalize(graph::WeightedAdjacency(ids));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) exact = exact && p[i * n + j] == (i == j ? 1.0 : 0.0);
    }
  }

  Outcome out = make(worst_a <= 1e-5 && worst_b <= 1e-5 && copied_all && exact,
                     "(a) K=1 vs deepset max rel " + fmt("%.1e", worst_a) + ", (b) identity graph vs deepscene_set " +
                         fmt("%.1e", worst_b) + ", (c) normalize(I)==I " + (exact ? "exact" : "NOT exact") +
                         " for n=1..60; " + std::to_string(kTrials) + " trials each, double precision");
  out.values = {{"a", worst_a}, {"b", worst_b}, {"c_exact", exact}};
  return out;
}

// 4 --------------------------------------------------------------------------

Outcome target_algebra() {
  sim::CollectConfig cc;
  cc.scenario = sim::ScenarioConfig::desk_highway();
  cc.transitions = 2000;
  cc.min_vehicles = 8;
  cc.max_vehicles = 16;
  cc.seed = 4004;
  const auto transitions = sim::collect_transitions(cc);
  Rng rng(4004);
  int exact_failures = 0, order_failures = 0, algebra_failures = 0;
  std::size_t checked = 0;
  const std::vector<EncoderKind> kinds{EncoderKind::deepset, EncoderKind::gcn};
  for (int trial = 0; trial < 100; ++trial) {
    const auto kind = kinds[static_cast<std::size_t>(trial) % kinds.size()];
    const auto arch = ArchitectureConfig::defaults(kind);
    const QNetwork<float> ta(arch, static_cast<std::uint64_t>(2 * trial + 1));
    const QNetwork<float> tb(arch, static_cast<std::uint64_t>(2 * trial + 2));
    checks::randomize_biases(ta, rng);
    checks::randomize_biases(tb, rng);

    std::vector<sim::Transition> picked;
    for (int i = 0; i < 64; ++i) {
      picked.push_back(transitions[static_cast<std::size_t>(uniform_int(rng, 0, int(transitions.size()) - 1))]);
    }
    const rl::ReplayBuffer buffer(picked, arch, {});
    std::vector<const PreparedScene*> scenes;
    std::vector<float> r;
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      scenes.push_back(&buffer.next_state(i));
      r.push_back(trial % 2 == 0 ? buffer.reward(i) : static_cast<float>(uniform(rng, -1.0, 1.0)));
    }
    const auto batch = make_batch<float>(std::span<const PreparedScene* const>(scenes), arch);
    const double gamma = trial < 50 ? 0.99 : uniform(rng, 0.0, 1.0);

    const auto y0 = rl::compute_targets<float>(batch, r, ta, tb, 0.0);
    const auto y = rl::compute_targets<float>(batch, r, ta, tb, gamma);
    const auto ya = rl::compute_targets<float>(batch, r, ta, ta, gamma);
    const auto yb = rl::compute_targets<float>(batch, r, tb, tb, gamma);

    const auto qa = ta.forward(batch);
    const auto qb = tb.forward(batch);
    const std::vector<double> da(qa.values().begin(), qa.values().end());
    const std::vector<double> db(qb.values().begin(), qb.values().end());
    const std::vector<double> dr(r.begin(), r.end());
    const auto oracle = rl::min_max_targets(da, db, dr, arch.num_actions, gamma);

    for (std::size_t i = 0; i < r.size(); ++i) {
      ++checked;
      if (y0[i] != r[i]) ++exact_failures;
      if (y[i] > ya[i] || y[i] > yb[i]) ++order_failures;
      if (std::abs(y[i] - oracle[i]) > 1e-5 * std::max(1.0, std::abs(oracle[i]))) ++algebra_failures;
    }
  }
  Outcome out = make(exact_failures == 0 && order_failures == 0 && algebra_failures == 0,
                     "100 batches x 64 rows (deepset and gcn targets): gamma=0 mismatches " +
                         std::to_string(exact_failures) + ", min-max above a single-net target " +
                         std::to_string(order_failures) + ", disagreements with the scalar oracle " +
                         std::to_string(algebra_failures) + " of " + std::to_string(checked));
  out.values = {{"gamma0_mismatch", exact_failures}, {"order_violations", order_failures},
                {"oracle_mismatch", algebra_failures}};
  return out;
}

// 5 --------------------------------------------------------------------------

Outcome simulator_safety() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = sim::ScenarioConfig::highway();
  constexpr int kWorlds = 50;
  constexpr int kSteps = 2000;
  long steps = 0, violations = 0, count_changes = 0, lane_changes = 0;
  double min_gap = 1e300;
  std::string first_error;
  for (int k = 0; k < kWorlds; ++k) {
    const int n = 30 + (30 * k) / (kWorlds - 1);
    auto w = sim::spawn_scenario(cfg, n, static_cast<std::uint64_t>(5000 + k));
    Rng rng(static_cast<std::uint64_t>(5000 + k));
    const auto count = w.vehicles().size();
    for (int s = 0; s < kSteps; ++s) {
      const auto action = sim::rule_based_policy(w, sim::PolicyMode::collector, rng);
      try {
        const auto r = w.step(action);
        if (r.executed != sim::Action::keep) ++lane_changes;
        w.check_invariants();
      } catch (const SimulatorBug& e) {
        ++violations;
        if (first_error.empty()) first_error = e.what();
      }
      const double g = w.min_same_lane_gap();
      min_gap = std::min(min_gap, g);
      if (g < 0.0) ++violations;
      if (w.vehicles().size() != count) ++count_changes;
      ++steps;
    }
  }
  const double secs = seconds_since(t0);
  Outcome out = make(violations == 0 && count_changes == 0 && secs < 300.0,
                     std::to_string(steps) + " steps over " + std::to_string(kWorlds) +
                         " highway worlds (n=30..60): gap violations " + std::to_string(violations) +
                         ", vehicle-count changes " + std::to_string(count_changes) + ", min same-lane gap " +
                         fmt("%.2f", min_gap) + " m, agent lane changes " + std::to_string(lane_changes) + ", " +
                         fmt("%.1f", secs) + " s (limit 300 s)" + (first_error.empty() ? "" : "; " + first_error));
  out.values = {{"steps", steps}, {"violations", violations}, {"count_changes", count_changes},
                {"min_gap_m", min_gap}, {"seconds", secs}};
  return out;
}

// 6 --------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "deepscene");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = tools::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

Outcome determinism(const fs::path& dir) {
  const auto data = dir / "c6_dataset.jsonl";
  const auto ckpt = dir / "c6_model.ckpt";
  const auto log = dir / "c6_loss.csv";
  const auto report = dir / "c6_report.json";
  const auto baseline = dir / "c6_baseline.json";
  const std::vector<std::vector<std::string>> commands{
      {"collect", "--scenario", "desk_highway", "--seed", "42", "--transitions", "5000", "--out", data.string()},
      {"train", "--dataset", data.string(), "--out", ckpt.string(), "--algo", "graph_q", "--seed", "42", "--steps",
       "1500", "--log-every", "100", "--loss-log", log.string(), "--no-snapshots", "--quiet"},
      {"evaluate", "--checkpoint", ckpt.string(), "--seed", "7", "--densities", "8:16:4", "--episodes", "3", "--out",
       report.string()},
      {"evaluate", "--baseline", "rule", "--scenario", "desk_highway", "--seed", "7", "--densities", "8:16:4",
       "--episodes", "3", "--out", baseline.string()},
  };
  const std::vector<fs::path> products{data, ckpt, log, report, baseline};
  std::vector<std::string> first;
  for (int run = 0; run < 2; ++run) {
    for (const auto& p : products) fs::remove(p);
    for (const auto& c : commands) {
      if (const int code = cli(c); code != 0) {
        return make(false, "`deepscene " + c[0] + "` exited with " + std::to_string(code) + " on run " +
                               std::to_string(run + 1));
      }
    }
    for (std::size_t i = 0; i < products.size(); ++i) {
      auto bytes = slurp(products[i]);
      if (run == 0) {
        first.push_back(std::move(bytes));
      } else if (bytes != first[i]) {
        return make(false, products[i].filename().string() + " differs between two identical runs");
      }
    }
  }
  std::string detail = "two identical CLI runs gave byte-identical";
  for (std::size_t i = 0; i < products.size(); ++i) {
    detail += " " + products[i].filename().string() + " (" + std::to_string(first[i].size()) + " B)";
  }
  return make(!first[0].empty() && !first[2].empty() && !first[3].empty(), detail);
}

// 7-9 ------------------------------------------------------------------------

constexpr std::size_t kDeskTransitions = 50'000;
constexpr std::size_t kDeskSteps = 100'000;
const std::vector<std::uint64_t> kSeeds{1, 2, 3};
constexpr std::uint64_t kEvalSeed = 777;

rl::EvaluateConfig desk_eval(const sim::ScenarioConfig& scenario) {
  rl::EvaluateConfig e;
  e.scenario = scenario;
  e.vehicle_counts = {8, 10, 12, 14, 16};
  e.episodes_per_count = 4;  // 20 episodes per seed
  e.episode_length = 200;
  e.seed = kEvalSeed;
  return e;
}

sim::Dataset desk_dataset(const sim::ScenarioConfig& scenario, std::uint64_t seed) {
  sim::CollectConfig cc;
  cc.scenario = scenario;
  cc.transitions = kDeskTransitions;
  cc.min_vehicles = 8;
  cc.max_vehicles = 16;
  cc.episode_length = 200;
  cc.seed = seed;
  return {{{"format", sim::kDatasetFormat}, {"scenario", sim::scenario_to_json(scenario)}},
          sim::collect_transitions(cc)};
}

// Trains with the default TrainConfig except for the step count.
fs::path train_desk(rl::Algo algo, const sim::ScenarioConfig& scenario, const std::string& label,
                    const sim::Dataset& data, std::uint64_t seed, const fs::path& dir) {
  rl::TrainJob job;
  job.algo = algo;
  job.arch = rl::default_architecture(algo, scenario);
  job.train.steps = kDeskSteps;
  job.train.log_every = 10'000;
  job.seed = seed;
  job.snapshots = false;
  job.checkpoint = dir / (rl::to_string(algo) + "_" + label + "_s" + std::to_string(seed) + ".ckpt");
  job.loss_log = dir / (rl::to_string(algo) + "_" + label + "_s" + std::to_string(seed) + ".loss.csv");
  rl::train(job, data);
  return job.checkpoint;
}

struct TrainedAgent {
  std::vector<fs::path> checkpoints;
  std::vector<double> speeds;  // per seed
  double minutes = 0.0;
};

struct DeskHighway {
  TrainedAgent deepset, graph;
  double keep = 0.0, rule = 0.0;
  bool ran = false;
};

DeskHighway run_desk_highway(const fs::path& dir) {
  DeskHighway out;
  const auto scenario = sim::ScenarioConfig::desk_highway();
  const auto eval = desk_eval(scenario);
  out.keep = rl::evaluate_baseline(eval, sim::PolicyMode::keep_lane).overall_mean_speed();
  out.rule = rl::evaluate_baseline(eval, sim::PolicyMode::baseline).overall_mean_speed();
  for (const auto seed : kSeeds) {
    const auto data = desk_dataset(scenario, seed);
    for (auto* agent : {&out.deepset, &out.graph}) {
      const auto algo = agent == &out.deepset ? rl::Algo::deepset_q : rl::Algo::graph_q;
      const auto t0 = std::chrono::steady_clock::now();
      const auto ckpt = train_desk(algo, scenario, "desk_highway", data, seed, dir);
      agent->minutes += seconds_since(t0) / 60.0;
      const auto speed = rl::evaluate_checkpoint(eval, rl::load_policy(ckpt)).overall_mean_speed();
      agent->checkpoints.push_back(ckpt);
      agent->speeds.push_back(speed);
      note(rl::to_string(algo) + " seed " + std::to_string(seed) + ": mean speed " + fmt("%.3f", speed) + " m/s");
    }
  }
  out.ran = true;
  return out;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); }

std::string list(const std::vector<double>& v) {
  std::string s;
  for (const double x : v) s += (s.empty() ? "" : "/") + fmt("%.2f", x);
  return s;
}

Outcome desk_highway_training(const DeskHighway& r) {
  const double ds = mean(r.deepset.speeds);
  const double gq = mean(r.graph.speeds);
  const auto passes = [&](double s) { return s >= 1.10 * r.keep && s >= 1.00 * r.rule; };
  Outcome out = make(passes(ds) && passes(gq),
                     "mean speed over 20 episodes x 3 seeds: DeepSet-Q " + fmt("%.3f", ds) + " (" + list(r.deepset.speeds) +
                         ") Graph-Q " + fmt("%.3f", gq) + " (" + list(r.graph.speeds) + ") vs keep " +
                         fmt("%.3f", r.keep) + " (x1.10 = " + fmt("%.3f", 1.10 * r.keep) + ") and rule " +
                         fmt("%.3f", r.rule) + " m/s; training " + fmt("%.1f", r.deepset.minutes) + " / " +
                         fmt("%.1f", r.graph.minutes) + " min per agent (target 45)");
  out.values = {{"deepset_q", r.deepset.speeds}, {"graph_q", r.graph.speeds}, {"keep", r.keep},
                {"rule", r.rule}, {"deepset_minutes", r.deepset.minutes}, {"graph_minutes", r.graph.minutes}};
  return out;
}

Outcome fast_lane_direction(const fs::path& dir) {
  const auto scenario = sim::ScenarioConfig::desk_fast_lanes();
  const auto eval = desk_eval(scenario);
  const auto rule = rl::evaluate_baseline(eval, sim::PolicyMode::baseline);
  std::vector<double> fractions, speeds;
  for (const auto seed : kSeeds) {
    const auto data = desk_dataset(scenario, seed);
    const auto ckpt = train_desk(rl::Algo::deepscene_q_set, scenario, "desk_fast_lanes", data, seed, dir);
    const auto report = rl::evaluate_checkpoint(eval, rl::load_policy(ckpt));
    fractions.push_back(report.overall_fast_lane_fraction());
    speeds.push_back(report.overall_mean_speed());
    note("deepscene_q_set seed " + std::to_string(seed) + ": fast-lane fraction " +
         fmt("%.3f", fractions.back()));
  }
  const double learned = mean(fractions);
  const double baseline = rule.overall_fast_lane_fraction();
  Outcome out;
  out.detail = "fast-lane share of driving time: DeepScene-Q (set) " + fmt("%.1f%%", 100 * learned) + " (" +
               list(fractions) + ") vs rule " + fmt("%.1f%%", 100 * baseline) +
               " (targets >= 20% and < 10%); speeds " + list(speeds) + " vs rule " +
               fmt("%.2f", rule.overall_mean_speed()) + " m/s";
  if (learned >= 0.20 && baseline < 0.10) {
    out.verdict = Verdict::pass;
  } else if (learned > baseline) {
    out.verdict = Verdict::soft_fail;
    out.detail += "; ordering holds, magnitude short";
  } else {
    out.verdict = Verdict::fail;
    out.detail += "; ordering inverted";
  }
  out.values = {{"learned", fractions}, {"rule", baseline}, {"learned_speed", speeds},
                {"rule_speed", rule.overall_mean_speed()}};
  return out;
}

Outcome dense_trend(const DeskHighway& r) {
  auto eval = desk_eval(sim::ScenarioConfig::desk_highway());
  eval.vehicle_counts = {16};
  eval.episodes_per_count = 20;
  int wins = 0;
  std::vector<double> ds, gq;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    ds.push_back(rl::evaluate_checkpoint(eval, rl::load_policy(r.deepset.checkpoints[i])).overall_mean_speed());
    gq.push_back(rl::evaluate_checkpoint(eval, rl::load_policy(r.graph.checkpoints[i])).overall_mean_speed());
    if (gq.back() >= ds.back()) ++wins;
  }
  Outcome out = make(wins >= 2, "n=16, 20 episodes: Graph-Q " + list(gq) + " vs DeepSet-Q " + list(ds) +
                                    " m/s per seed, Graph-Q ahead in " + std::to_string(wins) + " of 3 (non-gating)");
  out.gating = false;
  out.values = {{"graph_q", gq}, {"deepset_q", ds}, {"wins", wins}};
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string workdir = (fs::temp_directory_path() / "deepscene_acceptance").string();
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory for datasets, checkpoints and the summary");
  app.add_option("--only", only, "Run only these criteria (1-9)");
  CLI11_PARSE(app, argc, argv);
  const fs::path dir(workdir);
  fs::create_directories(dir);
  const std::set<int> selected(only.begin(), only.end());
  const auto wanted = [&](int k) { return selected.empty() || selected.count(k) > 0; };

  const char* titles[10] = {"",
                            "permutation invariance",
                            "gradient correctness",
                            "degenerate equivalences",
                            "double-Q target algebra",
                            "simulator safety and conservation",
                            "determinism",
                            "desk-scale highway training",
                            "desk-scale fast-lane direction",
                            "dense-traffic trend"};
  DeskHighway desk;
  nlohmann::json summary = nlohmann::json::object();
  bool all_gating_pass = true;
  for (int k = 1; k <= 9; ++k) {
    if (!wanted(k)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      switch (k) {
        case 1: o = permutation_invariance(); break;
        case 2: o = gradient_correctness(); break;
        case 3: o = degenerate_equivalences(); break;
        case 4: o = target_algebra(); break;
        case 5: o = simulator_safety(); break;
        case 6: o = determinism(dir); break;
        case 7:
        case 9:
          if (!desk.ran) desk = run_desk_highway(dir);
          o = k == 7 ? desk_highway_training(desk) : dense_trend(desk);
          break;
        case 8: o = fast_lane_direction(dir); break;
        default: break;
      }
    } catch (const std::exception& e) {
      o = make(false, std::string("exception: ") + e.what());
      if (k == 9) o.gating = false;
    }
    const char* label = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::soft_fail ? "SOFT-FAIL" : "FAIL";
    if (o.gating && o.verdict == Verdict::fail) all_gating_pass = false;
    std::cout << label << " criterion " << k << " (" << titles[k] << "): " << o.detail << " ["
              << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
    summary[std::to_string(k)] = {{"verdict", label}, {"gating", o.gating}, {"detail", o.detail}, {"values", o.values}};
  }
  std::ofstream(dir / "acceptance_summary.json") << summary.dump(2) << '\n';
  return all_gating_pass ? 0 : 1;
}
