#include <doctest.h>

#include <random>

#include "dml/backbones.hpp"
#include "dml/error.hpp"
#include "dml/model.hpp"
#include "oracles.hpp"

using dml::BackboneConfig;
using dml::BackboneKind;
using dml::NodeId;
using dml::ParamContext;
using dml::ParameterStore;
using dml::Shape;
using dml::Tape;
using dml::Tensor;
using oracle::Mat;

namespace {

BackboneConfig small(BackboneKind kind, std::size_t tasks = 2) {
  BackboneConfig c;
  c.kind = kind;
  c.num_tasks = tasks;
  c.experts_per_level = kind == BackboneKind::ple ? tasks + 1 : 3;
  c.expert_dim = 4;
  return c;
}

// Creates parameters for a backbone on input width `width`.
ParameterStore create(const BackboneConfig& c, std::size_t width, std::uint64_t seed = 21) {
  ParameterStore s;
  Tape t;
  ParamContext ctx(t, s, seed);
  dml::backbone_forward(ctx, c, t.constant(Tensor(Shape(1, width))), {});
  return s;
}

std::vector<Mat> run(const BackboneConfig& c, const ParameterStore& s, const Mat& x) {
  Tape t;
  ParamContext ctx(t, s);
  const auto out = dml::backbone_forward(ctx, c, t.constant(oracle::to_tensor(x)), {});
  std::vector<Mat> res;
  for (NodeId id : out.per_task_inputs) res.push_back(oracle::to_mat(t.value(id)));
  return res;
}

Mat layer(const ParameterStore& s, const std::string& prefix, const Mat& x) {
  const auto& b = s.at(prefix + "/0/b");
  return oracle::relu(oracle::add_row(oracle::matmul(x, oracle::to_mat(s.at(prefix + "/0/W"))),
                                      std::vector<double>(b.data().begin(), b.data().end())));
}

Mat gate(const ParameterStore& s, const std::string& prefix, const Mat& x) {
  const auto& b = s.at(prefix + "/0/b");
  return oracle::softmax_rows(oracle::add_row(oracle::matmul(x, oracle::to_mat(s.at(prefix + "/0/W"))),
                                              std::vector<double>(b.data().begin(), b.data().end())));
}

Mat mix(const Mat& g, const std::vector<Mat>& experts) {
  Mat out(g.size(), std::vector<double>(experts[0][0].size(), 0.0));
  for (std::size_t r = 0; r < g.size(); ++r)
    for (std::size_t e = 0; e < experts.size(); ++e)
      for (std::size_t c = 0; c < out[r].size(); ++c) out[r][c] += g[r][e] * experts[e][r][c];
  return out;
}

void zero_gates(ParameterStore& s) {
  for (const auto& name : s.names()) {
    if (name.find("/gate_") != std::string::npos) s.at(name) = Tensor(s.at(name).shape());
  }
}

}  // namespace

TEST_SUITE("backbones") {

TEST_CASE("shared bottom hands every task the same node") {
  const auto c = small(BackboneKind::shared_bottom, 3);
  const auto s = create(c, 6);
  Tape t;
  ParamContext ctx(t, s);
  const auto out = dml::shared_bottom_forward(ctx, c, t.constant(Tensor(Shape(2, 6), 0.3)));
  REQUIRE(out.per_task_inputs.size() == 3);
  CHECK(out.per_task_inputs[0] == out.per_task_inputs[1]);
  CHECK(out.per_task_inputs[1] == out.per_task_inputs[2]);
}

TEST_CASE("shared bottom with identity-extended weights copies the leading inputs") {
  const auto c = small(BackboneKind::shared_bottom);
  ParameterStore s = create(c, 6);
  Tensor w(Shape(6, 4));
  for (std::size_t i = 0; i < 4; ++i) w(i, i) = 1.0;
  s.at("backbone/shared_bottom/0/shared/0/W") = w;
  const Mat x = {{0.5, 1, 2, 3, 4, 5}, {0, 0.25, 7, 1, 9, 9}};
  const auto l = run(c, s, x);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < 4; ++j) CHECK(l[0][r][j] == x[r][j]);
}

TEST_CASE("task-1 loss reaches the shared layer") {
  const auto c = small(BackboneKind::shared_bottom);
  const auto s = create(c, 5);
  std::mt19937_64 rng(22);
  const Mat x = oracle::random_mat(rng, 3, 5, 0.1, 1.0);
  auto loss = [&](const ParameterStore& p) {
    Tape t;
    ParamContext ctx(t, p);
    const auto out = dml::backbone_forward(ctx, c, t.constant(oracle::to_tensor(x)), {});
    const NodeId l = t.reduce_mean(t.square(out.per_task_inputs[0]));
    return std::pair{t.value(l).item(), dml::backward(t, l).of(*t.find_parameter(
                                            "backbone/shared_bottom/0/shared/0/W"))};
  };
  const auto [f0, g] = loss(s);
  CHECK_FALSE(g.all_zero());
  // Central difference on the largest component.
  std::size_t i = 0;
  for (std::size_t j = 0; j < g.size(); ++j) if (std::abs(g[j]) > std::abs(g[i])) i = j;
  ParameterStore up = s, down = s;
  up.at("backbone/shared_bottom/0/shared/0/W")[i] += 1e-5;
  down.at("backbone/shared_bottom/0/shared/0/W")[i] -= 1e-5;
  const double numeric = (loss(up).first - loss(down).first) / 2e-5;
  CHECK(numeric == doctest::Approx(g[i]).epsilon(1e-6));
}

TEST_CASE("mmoe uniform gate averages the experts") {
  const auto c = small(BackboneKind::mmoe);
  ParameterStore s = create(c, 5);
  zero_gates(s);
  std::mt19937_64 rng(23);
  const Mat x = oracle::random_mat(rng, 4, 5);
  const auto l = run(c, s, x);
  std::vector<Mat> ex;
  for (int e = 0; e < 3; ++e) ex.push_back(layer(s, "backbone/mmoe/0/expert_" + std::to_string(e), x));
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t j = 0; j < 4; ++j) {
      const double mean = (ex[0][r][j] + ex[1][r][j] + ex[2][r][j]) / 3.0;
      CHECK(l[0][r][j] == doctest::Approx(mean).epsilon(1e-14));
      CHECK(l[1][r][j] == doctest::Approx(mean).epsilon(1e-14));
    }
}

TEST_CASE("mmoe saturated gate selects one expert") {
  const auto c = small(BackboneKind::mmoe);
  ParameterStore s = create(c, 5);
  zero_gates(s);
  s.at("backbone/mmoe/0/gate_1/0/b") = Tensor::vector({0.0, 40.0, 0.0});
  std::mt19937_64 rng(24);
  const Mat x = oracle::random_mat(rng, 3, 5);
  const auto l = run(c, s, x);
  const Mat e1 = layer(s, "backbone/mmoe/0/expert_1", x);
  CHECK(oracle::max_diff(l[1], e1) < 1e-6);
}

TEST_CASE("mmoe generic case matches the direct formula and gates are distributions") {
  const auto c = small(BackboneKind::mmoe, 3);
  const auto s = create(c, 6);
  std::mt19937_64 rng(25);
  const Mat x = oracle::random_mat(rng, 5, 6);
  const auto l = run(c, s, x);
  std::vector<Mat> ex;
  for (int e = 0; e < 3; ++e) ex.push_back(layer(s, "backbone/mmoe/0/expert_" + std::to_string(e), x));
  for (std::size_t k = 0; k < 3; ++k) {
    const Mat g = gate(s, "backbone/mmoe/0/gate_" + std::to_string(k), x);
    CHECK(oracle::max_diff(l[k], mix(g, ex)) < 1e-14);
  }

  Tape t;
  ParamContext ctx(t, s);
  const NodeId xin = t.constant(oracle::to_tensor(x));
  std::vector<NodeId> experts;
  for (int e = 0; e < 3; ++e) {
    experts.push_back(dml::mlp_forward(ctx, "backbone/mmoe/0/expert_" + std::to_string(e),
                                       {{4}, dml::Activation::relu}, xin));
  }
  NodeId g{};
  dml::gated_mixture(ctx, "backbone/mmoe/0/gate_0", xin, experts, &g);
  const Tensor gv = t.value(g);
  for (std::size_t r = 0; r < gv.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t e = 0; e < gv.cols(); ++e) {
      CHECK(gv(r, e) >= 0.0);
      sum += gv(r, e);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-10);
  }
}

TEST_CASE("ple generic case matches a layered formula") {
  const auto c = small(BackboneKind::ple);
  const auto s = create(c, 5);
  std::mt19937_64 rng(26);
  const Mat x = oracle::random_mat(rng, 4, 5);
  const auto l = run(c, s, x);

  const std::string p = "backbone/ple/";
  const Mat t0 = layer(s, p + "0/task_0", x), t1 = layer(s, p + "0/task_1", x);
  const Mat sh = layer(s, p + "0/shared", x);
  const Mat f0 = mix(gate(s, p + "0/gate_0", x), {t0, sh});
  const Mat f1 = mix(gate(s, p + "0/gate_1", x), {t1, sh});
  const Mat fs = mix(gate(s, p + "0/gate_shared", x), {t0, t1, sh});
  const Mat u0 = layer(s, p + "1/task_0", f0), u1 = layer(s, p + "1/task_1", f1);
  const Mat ush = layer(s, p + "1/shared", fs);
  const Mat l0 = mix(gate(s, p + "1/gate_0", f0), {u0, ush});
  const Mat l1 = mix(gate(s, p + "1/gate_1", f1), {u1, ush});
  CHECK(oracle::max_diff(l[0], l0) < 1e-14);
  CHECK(oracle::max_diff(l[1], l1) < 1e-14);
  CHECK_FALSE(s.contains(p + "1/gate_shared/0/W"));
}

TEST_CASE("ple with identical experts and uniform gates gives equal task inputs") {
  const auto c = small(BackboneKind::ple);
  ParameterStore s = create(c, 5);
  zero_gates(s);
  for (int level = 0; level < 2; ++level) {
    const std::string p = "backbone/ple/" + std::to_string(level) + "/";
    for (const std::string e : {"task_0", "task_1"}) {
      s.at(p + e + "/0/W") = s.at(p + "shared/0/W");
      s.at(p + e + "/0/b") = s.at(p + "shared/0/b");
    }
  }
  std::mt19937_64 rng(27);
  const auto l = run(c, s, oracle::random_mat(rng, 3, 5));
  CHECK(l[0] == l[1]);
}

TEST_CASE("ple task chain saturated on its own expert ignores the shared experts") {
  const auto c = small(BackboneKind::ple);
  ParameterStore s = create(c, 5);
  zero_gates(s);
  for (int level = 0; level < 2; ++level) {
    s.at("backbone/ple/" + std::to_string(level) + "/gate_0/0/b") = Tensor::vector({40.0, 0.0});
  }
  std::mt19937_64 rng(28);
  const Mat x = oracle::random_mat(rng, 3, 5);
  const auto base = run(c, s, x);
  for (const std::string name : {"backbone/ple/0/shared/0/W", "backbone/ple/1/shared/0/W"}) {
    for (std::size_t i = 0; i < s.at(name).size(); ++i) {
      ParameterStore p = s;
      p.at(name)[i] += 1e-3;
      const auto moved = run(c, p, x);
      // Finite-difference Jacobian entry, scaled by the softmax tail e^-40.
      CHECK(oracle::max_diff(moved[0], base[0]) / 1e-3 < 1e-12);
    }
  }
}

TEST_CASE("tied experts with uniform gates reduce mmoe and ple to shared bottom") {
  std::mt19937_64 rng(29);
  const Mat x = oracle::random_mat(rng, 4, 5);
  const auto sbc = small(BackboneKind::shared_bottom);
  const auto sb_s = create(sbc, 5);
  const auto sb = run(sbc, sb_s, x);
  const Tensor& W = sb_s.at("backbone/shared_bottom/0/shared/0/W");
  const Tensor& b = sb_s.at("backbone/shared_bottom/0/shared/0/b");

  const auto mc = small(BackboneKind::mmoe);
  ParameterStore ms = create(mc, 5);
  zero_gates(ms);
  for (int e = 0; e < 3; ++e) {
    ms.at("backbone/mmoe/0/expert_" + std::to_string(e) + "/0/W") = W;
    ms.at("backbone/mmoe/0/expert_" + std::to_string(e) + "/0/b") = b;
  }
  const auto mm = run(mc, ms, x);
  CHECK(oracle::max_diff(mm[0], sb[0]) <= 1e-10);
  CHECK(oracle::max_diff(mm[1], sb[0]) <= 1e-10);

  // PLE has two levels; with level-2 experts as identities on relu outputs
  // (non-negative) the stack reduces to the level-1 shared layer.
  const auto pc = small(BackboneKind::ple);
  ParameterStore ps = create(pc, 5);
  zero_gates(ps);
  for (const std::string e : {"task_0", "task_1", "shared"}) {
    ps.at("backbone/ple/0/" + e + "/0/W") = W;
    ps.at("backbone/ple/0/" + e + "/0/b") = b;
    ps.at("backbone/ple/1/" + e + "/0/W") = Tensor::identity(4);
    ps.at("backbone/ple/1/" + e + "/0/b") = Tensor(Shape(4));
  }
  const auto pl = run(pc, ps, x);
  CHECK(oracle::max_diff(pl[0], sb[0]) <= 1e-10);
  CHECK(oracle::max_diff(pl[1], sb[0]) <= 1e-10);
}

TEST_CASE("every backbone yields K inputs of the expert width") {
  for (auto kind : {BackboneKind::shared_bottom, BackboneKind::mmoe, BackboneKind::ple}) {
    for (std::size_t k : {2u, 3u}) {
      const auto c = small(kind, k);
      const auto s = create(c, 5);
      const auto l = run(c, s, Mat(2, std::vector<double>(5, 0.5)));
      CHECK(l.size() == k);
      for (const auto& m : l) CHECK(m[0].size() == 4);
    }
  }
  BackboneConfig bad = small(BackboneKind::ple, 3);
  bad.experts_per_level = 3;
  CHECK_THROWS_AS(dml::validate(bad), dml::ConfigError);
  CHECK_THROWS_AS(dml::parse_backbone("mssm"), dml::ConfigError);
}

TEST_CASE("single-task model: zero weights give neutral predictions") {
  const std::vector<dml::FieldInfo> fields = {{"user", 4, false}, {"item", 3, false}};
  auto config = dml::make_model_config(BackboneKind::single_task, dml::DmlVariant::none, fields,
                                       {{"positive", dml::TaskKind::classification},
                                        {"rating", dml::TaskKind::regression}});
  config.backbone.expert_dim = config.head.d0 = 6;
  config.head.tower_hidden = 5;
  config.head.d1 = 3;
  ParameterStore s = dml::initialize_model(config, 1);
  for (const auto& n : s.names()) {
    if (n.rfind("embed/", 0) != 0) s.at(n) = Tensor(s.at(n).shape());
  }
  dml::Batch batch;
  batch.size = 2;
  for (int f = 0; f < 2; ++f) {
    auto b = std::make_shared<dml::IndexBags>();
    b->push(1);
    b->push(2);
    batch.fields.push_back(b);
  }
  Tape t;
  ParamContext ctx(t, s);
  CHECK(t.value(dml::single_task_forward(ctx, config, batch, 0)) == Tensor(Shape(2, 1), 0.5));
  CHECK(t.value(dml::single_task_forward(ctx, config, batch, 1)) == Tensor(Shape(2, 1), 0.0));
}

TEST_CASE("single-task model: one-dimensional toy matches hand computation") {
  const std::vector<dml::FieldInfo> fields = {{"f", 2, false}};
  auto config = dml::make_model_config(BackboneKind::single_task, dml::DmlVariant::none, fields,
                                       {{"r", dml::TaskKind::regression}});
  config.embed_dim = 1;
  config.backbone.num_tasks = 1;
  config.backbone.expert_dim = config.head.d0 = 1;
  config.head.tower_hidden = 1;
  config.head.d1 = 1;
  ParameterStore s;
  s.add("embed/task_0/f", Tensor::matrix(2, 1, {0.0, 1.5}));
  s.add("backbone/single_task/0/task_0/0/W", Tensor::matrix(1, 1, {2.0}));
  s.add("backbone/single_task/0/task_0/0/b", Tensor::vector({-1.0}));
  s.add("dml/tower/0/0/W", Tensor::matrix(1, 1, {-0.5}));
  s.add("dml/tower/0/0/b", Tensor::vector({3.0}));
  s.add("dml/tower/0/1/W", Tensor::matrix(1, 1, {4.0}));
  s.add("dml/tower/0/1/b", Tensor::vector({0.0}));
  s.add("dml/tower/0/2/W", Tensor::matrix(1, 1, {0.25}));
  s.add("dml/tower/0/2/b", Tensor::vector({1.0}));
  dml::Batch batch;
  batch.size = 1;
  auto b = std::make_shared<dml::IndexBags>();
  b->push(1);
  batch.fields.push_back(b);
  Tape t;
  ParamContext ctx(t, s);
  // relu(1.5*2-1)=2; relu(2*-0.5+3)=2; relu(2*4)=8; 8*0.25+1=3.
  CHECK(t.value(dml::single_task_forward(ctx, config, batch, 0)).item() == 3.0);
}

TEST_CASE("single-task models share no parameters") {
  const std::vector<dml::FieldInfo> fields = {{"user", 4, false}, {"item", 3, false}};
  auto config = dml::make_model_config(BackboneKind::single_task, dml::DmlVariant::none, fields,
                                       {{"positive", dml::TaskKind::classification},
                                        {"rating", dml::TaskKind::regression}});
  config.backbone.expert_dim = config.head.d0 = 6;
  config.head.tower_hidden = 5;
  config.head.d1 = 3;
  ParameterStore s = dml::initialize_model(config, 2);
  dml::Batch batch;
  batch.size = 2;
  for (int f = 0; f < 2; ++f) {
    auto b = std::make_shared<dml::IndexBags>();
    b->push(1);
    b->push(2);
    batch.fields.push_back(b);
  }
  const ParameterStore before = s;
  Tape t;
  ParamContext ctx(t, s);
  const NodeId pred = dml::single_task_forward(ctx, config, batch, 0);
  const NodeId loss = dml::task_loss(t, dml::LossKind::binary_cross_entropy, pred,
                                     Tensor::matrix(2, 1, {1, 0}));
  auto grads = dml::parameter_gradients(t, dml::backward(t, loss));
  for (const auto& n : s.names()) {
    const bool task0 = n.find("task_0") != std::string::npos || n.rfind("dml/tower/0/", 0) == 0;
    CHECK(grads.count(n) == (task0 ? 1u : 0u));
    if (!task0) s.freeze(n);
  }
  dml::AdamState st;
  dml::adam_step(st, s, grads);
  for (const auto& n : s.names()) {
    if (s.is_frozen(n)) CHECK(s.at(n) == before.at(n));
    else CHECK_FALSE(s.at(n) == before.at(n));
  }
}

}  // TEST_SUITE
