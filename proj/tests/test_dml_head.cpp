#include <doctest.h>

#include <cmath>
#include <random>

#include "dml/dml_head.hpp"
#include "dml/error.hpp"
#include "dml/grad_audit.hpp"
#include "oracles.hpp"

using dml::DmlVariant;
using dml::HeadConfig;
using dml::NodeId;
using dml::ParamContext;
using dml::ParameterStore;
using dml::Shape;
using dml::Tape;
using dml::TaskKind;
using dml::Tensor;
using oracle::Mat;

namespace {

HeadConfig head(DmlVariant v, std::size_t tasks = 2, std::size_t d0 = 4, std::size_t h = 5,
                std::size_t d1 = 3) {
  HeadConfig c;
  c.variant = v;
  for (std::size_t k = 0; k < tasks; ++k) {
    c.tasks.push_back(k % 2 ? TaskKind::regression : TaskKind::classification);
  }
  c.d0 = d0;
  c.tower_hidden = h;
  c.d1 = d1;
  return c;
}

ParameterStore create_head(const HeadConfig& c, std::uint64_t seed = 31) {
  ParameterStore s;
  Tape t;
  ParamContext ctx(t, s, seed);
  std::vector<NodeId> l;
  for (std::size_t k = 0; k < c.tasks.size(); ++k) l.push_back(t.constant(Tensor(Shape(1, c.d0))));
  dml::dml_head_forward(ctx, l, c);
  return s;
}

std::vector<double> row(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Mat affine(const ParameterStore& s, const std::string& p, const Mat& x) {
  return oracle::add_row(oracle::matmul(x, oracle::to_mat(s.at(p + "/W"))), row(s.at(p + "/b")));
}

Mat tower(const ParameterStore& s, std::size_t k, const Mat& x) {
  const std::string p = "dml/tower/" + std::to_string(k);
  return oracle::relu(affine(s, p + "/1", oracle::relu(affine(s, p + "/0", x))));
}

Mat hadamard(const Mat& a, const Mat& b) {
  Mat c = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) c[i][j] *= b[i][j];
  return c;
}

Mat scale(Mat a, double f) {
  for (auto& r : a)
    for (auto& x : r) x *= f;
  return a;
}

// Per-sample CTFM: O (K x d0) rows l^k + t^k, attention over the K rows.
std::vector<Mat> ctfm_oracle(const ParameterStore& s, const std::vector<Mat>& l) {
  const std::size_t K = l.size(), B = l[0].size(), d = l[0][0].size();
  const Mat wq = oracle::to_mat(s.at("dml/ctfm/Wq")), wk = oracle::to_mat(s.at("dml/ctfm/Wk")),
            wv = oracle::to_mat(s.at("dml/ctfm/Wv"));
  std::vector<Mat> out(K, Mat(B, std::vector<double>(d)));
  for (std::size_t b = 0; b < B; ++b) {
    Mat o(K, std::vector<double>(d));
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = 0; j < d; ++j) o[k][j] = l[k][b][j] + s.at("dml/ctfm/t_" + std::to_string(k))[j];
    const Mat q = oracle::matmul(o, wq), kk = oracle::matmul(o, wk), v = oracle::matmul(o, wv);
    const Mat w = oracle::softmax_rows(scale(oracle::matmul(q, oracle::transpose(kk)), 1.0 / std::sqrt(double(d))));
    const Mat r = oracle::add(o, oracle::matmul(w, v));
    for (std::size_t k = 0; k < K; ++k) out[k][b] = r[k];
  }
  return out;
}

Mat gkd_oracle(const ParameterStore& s, std::size_t k, const std::vector<Mat>& h, TaskKind task) {
  const std::string p = "dml/gkd/" + std::to_string(k);
  Mat all = h[0];
  for (std::size_t j = 1; j < h.size(); ++j) all = oracle::concat(all, h[j]);
  const Mat gk = oracle::relu(affine(s, p + "/distill/0", all));
  const Mat gw = oracle::sigmoid(affine(s, p + "/gate/0", oracle::concat(gk, h[k])));
  const Mat o = affine(s, p + "/out/0", oracle::concat(hadamard(gk, gw), h[k]));
  return task == TaskKind::classification ? oracle::sigmoid(o) : o;
}

std::vector<Mat> random_inputs(std::mt19937_64& rng, std::size_t K, std::size_t B, std::size_t d) {
  std::vector<Mat> l;
  for (std::size_t k = 0; k < K; ++k) l.push_back(oracle::random_mat(rng, B, d));
  return l;
}

}  // namespace

TEST_SUITE("dml_head") {

TEST_CASE("ctfm with zero value projection is the residual only") {
  const auto c = head(DmlVariant::full);
  ParameterStore s = create_head(c);
  s.at("dml/ctfm/Wv") = Tensor(Shape(4, 4));
  std::mt19937_64 rng(32);
  const auto l = random_inputs(rng, 2, 3, 4);
  Tape t;
  ParamContext ctx(t, s);
  std::vector<NodeId> ln;
  for (const auto& m : l) ln.push_back(t.constant(oracle::to_tensor(m)));
  const auto out = dml::ctfm_forward(ctx, ln, 4, true);
  for (std::size_t k = 0; k < 2; ++k) {
    Tape u;
    const Tensor expect = u.value(u.add(u.constant(oracle::to_tensor(l[k])),
                                        u.constant(s.at("dml/ctfm/t_" + std::to_string(k)))));
    CHECK(t.value(out[k]) == expect);
  }
}

TEST_CASE("ctfm blocking: zero adjoint to the other input, nonzero forward sensitivity") {
  const auto c = head(DmlVariant::full);
  const ParameterStore s = create_head(c);
  std::mt19937_64 rng(33);
  const auto l = random_inputs(rng, 2, 3, 4);
  auto forward = [&](const std::vector<Mat>& in, bool block) {
    Tape t;
    ParamContext ctx(t, s);
    std::vector<NodeId> ln;
    for (const auto& m : in) ln.push_back(t.variable(oracle::to_tensor(m)));
    const auto out = dml::ctfm_forward(ctx, ln, 4, block);
    const NodeId loss = t.reduce_mean(out[0]);
    const auto g = dml::backward(t, loss);
    return std::pair{t.value(out[0]), g.of(ln[1])};
  };
  const auto [h_blocked, g_blocked] = forward(l, true);
  CHECK(g_blocked.all_zero());
  const auto [h_open, g_open] = forward(l, false);
  CHECK_FALSE(g_open.all_zero());
  CHECK(h_blocked == h_open);

  auto moved = l;
  moved[1][0][2] += 0.5;
  CHECK_FALSE(forward(moved, true).first == h_blocked);
}

TEST_CASE("ctfm K=2, d0=2 matches the per-sample formula") {
  const auto c = head(DmlVariant::full, 2, 2, 3, 2);
  ParameterStore s = create_head(c);
  s.at("dml/ctfm/t_0") = Tensor::vector({0.1, -0.2});
  s.at("dml/ctfm/t_1") = Tensor::vector({0.3, 0.05});
  s.at("dml/ctfm/Wq") = Tensor::matrix(2, 2, {0.5, -0.3, 0.2, 0.8});
  s.at("dml/ctfm/Wk") = Tensor::matrix(2, 2, {-0.4, 0.6, 0.9, 0.1});
  s.at("dml/ctfm/Wv") = Tensor::matrix(2, 2, {0.7, 0.2, -0.5, 0.3});
  const std::vector<Mat> l = {{{1.0, 2.0}, {-0.5, 0.25}}, {{0.0, -1.0}, {2.0, 1.5}}};
  Tape t;
  ParamContext ctx(t, s);
  std::vector<NodeId> ln;
  for (const auto& m : l) ln.push_back(t.constant(oracle::to_tensor(m)));
  const auto out = dml::ctfm_forward(ctx, ln, 2, true);
  const auto expect = ctfm_oracle(s, l);
  for (std::size_t k = 0; k < 2; ++k) CHECK(oracle::max_diff(oracle::to_mat(t.value(out[k])), expect[k]) < 1e-14);
}

TEST_CASE("ctfm random batches with three tasks match the per-sample formula") {
  const auto c = head(DmlVariant::full, 3, 5, 4, 3);
  const ParameterStore s = create_head(c);
  std::mt19937_64 rng(34);
  const auto l = random_inputs(rng, 3, 7, 5);
  Tape t;
  ParamContext ctx(t, s);
  std::vector<NodeId> ln;
  for (const auto& m : l) ln.push_back(t.constant(oracle::to_tensor(m)));
  const auto out = dml::ctfm_forward(ctx, ln, 5, true);
  const auto expect = ctfm_oracle(s, l);
  for (std::size_t k = 0; k < 3; ++k) CHECK(oracle::max_diff(oracle::to_mat(t.value(out[k])), expect[k]) < 1e-13);
}

TEST_CASE("ctfm input validation") {
  const auto c = head(DmlVariant::full);
  const ParameterStore s = create_head(c);
  Tape t;
  ParamContext ctx(t, s);
  const NodeId a = t.constant(Tensor(Shape(2, 4))), b = t.constant(Tensor(Shape(2, 3)));
  const NodeId one[] = {a};
  CHECK_THROWS_AS(dml::ctfm_forward(ctx, one, 4, true), dml::ShapeError);
  const NodeId mixed[] = {a, b};
  CHECK_THROWS_AS(dml::ctfm_forward(ctx, mixed, 4, true), dml::ShapeError);
}

TEST_CASE("tower hidden: zero weights, identity padding, random formula") {
  const auto c = head(DmlVariant::none, 2, 4, 5, 3);
  ParameterStore s = create_head(c);
  std::mt19937_64 rng(35);
  const Mat x = oracle::random_mat(rng, 3, 4, 0.0, 2.0);
  auto run = [&](const ParameterStore& p) {
    Tape t;
    ParamContext ctx(t, p);
    return oracle::to_mat(t.value(dml::tower_hidden(ctx, 0, t.constant(oracle::to_tensor(x)), c)));
  };
  CHECK(oracle::max_diff(run(s), tower(s, 0, x)) < 1e-14);

  ParameterStore z = s;
  for (const std::string n : {"dml/tower/0/0/W", "dml/tower/0/0/b", "dml/tower/0/1/W", "dml/tower/0/1/b"}) {
    z.at(n) = Tensor(z.at(n).shape());
  }
  CHECK(oracle::max_diff(run(z), Mat(3, std::vector<double>(3, 0.0))) == 0.0);

  ParameterStore id = z;
  for (std::size_t i = 0; i < 4; ++i) id.at("dml/tower/0/0/W")(i, i) = 1.0;
  for (std::size_t i = 0; i < 3; ++i) id.at("dml/tower/0/1/W")(i, i) = 1.0;
  const Mat through = run(id);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 3; ++j) CHECK(through[r][j] == x[r][j]);
}

TEST_CASE("gkd matches its formula and isolates other towers") {
  const auto c = head(DmlVariant::gkd_only, 2, 4, 5, 2);
  const ParameterStore s = create_head(c);
  std::mt19937_64 rng(36);
  const auto h = random_inputs(rng, 2, 4, 2);
  for (std::size_t k = 0; k < 2; ++k) {
    Tape t;
    ParamContext ctx(t, s);
    std::vector<NodeId> hn;
    for (const auto& m : h) hn.push_back(t.variable(oracle::to_tensor(m)));
    const NodeId o = dml::gkd_forward(ctx, k, hn, c.tasks[k], 2);
    CHECK(oracle::max_diff(oracle::to_mat(t.value(o)), gkd_oracle(s, k, h, c.tasks[k])) < 1e-14);
    const auto g = dml::backward(t, t.reduce_mean(o));
    CHECK(g.of(hn[1 - k]).all_zero());
    CHECK_FALSE(g.of(hn[k]).all_zero());
  }
  // Forward still reads the other tower.
  auto moved = h;
  for (auto& r : moved[1]) r[0] += 0.7;
  CHECK(oracle::max_diff(gkd_oracle(s, 0, moved, TaskKind::classification),
                         gkd_oracle(s, 0, h, TaskKind::classification)) > 0.0);
  Tape t;
  ParamContext ctx(t, s);
  std::vector<NodeId> hn;
  for (const auto& m : moved) hn.push_back(t.constant(oracle::to_tensor(m)));
  CHECK(oracle::max_diff(oracle::to_mat(t.value(dml::gkd_forward(ctx, 0, hn, TaskKind::classification, 2))),
                         gkd_oracle(s, 0, moved, TaskKind::classification)) < 1e-14);
  CHECK_THROWS_AS(dml::gkd_forward(ctx, 2, hn, TaskKind::classification, 2), dml::ShapeError);
  CHECK_THROWS_AS(dml::gkd_forward(ctx, 0, hn, TaskKind::classification, 3), dml::ShapeError);
}

TEST_CASE("gkd with zero gating weights halves the global knowledge") {
  const auto c = head(DmlVariant::gkd_only, 2, 4, 5, 2);
  ParameterStore s = create_head(c);
  s.at("dml/gkd/0/gate/0/W") = Tensor(s.at("dml/gkd/0/gate/0/W").shape());
  s.at("dml/gkd/0/gate/0/b") = Tensor(s.at("dml/gkd/0/gate/0/b").shape());
  std::mt19937_64 rng(37);
  const auto h = random_inputs(rng, 2, 3, 2);
  Mat all = oracle::concat(h[0], h[1]);
  const Mat gk = oracle::relu(affine(s, "dml/gkd/0/distill/0", all));
  const Mat expect = oracle::sigmoid(affine(s, "dml/gkd/0/out/0", oracle::concat(scale(gk, 0.5), h[0])));
  Tape t;
  ParamContext ctx(t, s);
  std::vector<NodeId> hn;
  for (const auto& m : h) hn.push_back(t.constant(oracle::to_tensor(m)));
  CHECK(oracle::max_diff(oracle::to_mat(t.value(dml::gkd_forward(ctx, 0, hn, TaskKind::classification, 2))),
                         expect) < 1e-15);
}

TEST_CASE("variant none is the plain tower baseline") {
  const auto c = head(DmlVariant::none);
  const ParameterStore s = create_head(c);
  CHECK_FALSE(s.contains("dml/ctfm/Wq"));
  CHECK_FALSE(s.contains("dml/gkd/0/out/0/W"));
  std::mt19937_64 rng(38);
  const auto l = random_inputs(rng, 2, 3, 4);
  Tape t;
  ParamContext ctx(t, s);
  std::vector<NodeId> ln;
  for (const auto& m : l) ln.push_back(t.constant(oracle::to_tensor(m)));
  const auto preds = dml::dml_head_forward(ctx, ln, c);
  for (std::size_t k = 0; k < 2; ++k) {
    Mat o = affine(s, "dml/tower/" + std::to_string(k) + "/2", tower(s, k, l[k]));
    if (c.tasks[k] == TaskKind::classification) o = oracle::sigmoid(o);
    CHECK(oracle::max_diff(oracle::to_mat(t.value(preds[k])), o) < 1e-14);
  }
}

TEST_CASE("full variant with zero value path and zero gates composes the simple cases") {
  const auto c = head(DmlVariant::full);
  ParameterStore s = create_head(c);
  s.at("dml/ctfm/Wv") = Tensor(Shape(4, 4));
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string g = "dml/gkd/" + std::to_string(k) + "/gate/0/";
    s.at(g + "W") = Tensor(s.at(g + "W").shape());
    s.at(g + "b") = Tensor(s.at(g + "b").shape());
  }
  std::mt19937_64 rng(39);
  const auto l = random_inputs(rng, 2, 3, 4);
  std::vector<Mat> h;
  for (std::size_t k = 0; k < 2; ++k) {
    const Tensor& tk = s.at("dml/ctfm/t_" + std::to_string(k));
    h.push_back(tower(s, k, oracle::add_row(l[k], row(tk))));
  }
  Tape t;
  ParamContext ctx(t, s);
  std::vector<NodeId> ln;
  for (const auto& m : l) ln.push_back(t.constant(oracle::to_tensor(m)));
  const auto preds = dml::dml_head_forward(ctx, ln, c);
  for (std::size_t k = 0; k < 2; ++k) {
    const std::string p = "dml/gkd/" + std::to_string(k);
    const Mat gk = oracle::relu(affine(s, p + "/distill/0", oracle::concat(h[0], h[1])));
    Mat o = affine(s, p + "/out/0", oracle::concat(scale(gk, 0.5), h[k]));
    if (c.tasks[k] == TaskKind::classification) o = oracle::sigmoid(o);
    CHECK(oracle::max_diff(oracle::to_mat(t.value(preds[k])), o) < 1e-14);
  }
}

TEST_CASE("full and v0 predictions are bit-identical under shared parameters") {
  for (std::size_t K : {2u, 3u}) {
    const auto full = head(DmlVariant::full, K);
    auto v0 = full;
    v0.variant = DmlVariant::v0;
    const ParameterStore s = create_head(full);
    CHECK(s == create_head(v0));
    std::mt19937_64 rng(40 + K);
    const auto l = random_inputs(rng, K, 6, 4);
    auto predict = [&](const HeadConfig& c) {
      Tape t;
      ParamContext ctx(t, s);
      std::vector<NodeId> ln;
      for (const auto& m : l) ln.push_back(t.variable(oracle::to_tensor(m)));
      std::vector<Tensor> out;
      for (NodeId p : dml::dml_head_forward(ctx, ln, c)) out.push_back(t.value(p));
      return out;
    };
    CHECK(predict(full) == predict(v0));
  }
}

TEST_CASE("ctfm shares one projection set; gkd grows linearly with tasks") {
  auto count = [](const ParameterStore& s, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& [name, v] : s) {
      if (name.rfind(prefix, 0) == 0) n += v.size();
    }
    return n;
  };
  std::vector<std::size_t> gkd_sizes;
  for (std::size_t K : {2u, 3u, 4u}) {
    const ParameterStore s = create_head(head(DmlVariant::full, K));
    std::size_t projections = 0;
    for (const auto& [name, v] : s) {
      if (name == "dml/ctfm/Wq" || name == "dml/ctfm/Wk" || name == "dml/ctfm/Wv") ++projections;
    }
    CHECK(projections == 3);
    CHECK(count(s, "dml/ctfm/") == 3 * 16 + K * 4);
    gkd_sizes.push_back(count(s, "dml/gkd/"));
  }
  // per task: distill K*d1*d1 + d1, gate 2*d1*d1 + d1, out 2*d1 + 1 (d1 = 3)
  for (std::size_t i = 0; i < 3; ++i) {
    const std::size_t K = i + 2;
    CHECK(gkd_sizes[i] == K * (K * 9 + 3 + 18 + 3 + 7));
  }
}

TEST_CASE("isolation audit holds exactly for full and fails for v0") {
  for (const auto& c : dml::isolation_checks({})) {
    CAPTURE(c.name);
    CAPTURE(c.detail);
    CHECK(c.passed);
  }
}

TEST_CASE("variant names") {
  CHECK(dml::parse_variant("full") == DmlVariant::full);
  CHECK(dml::parse_variant("v0") == DmlVariant::v0);
  CHECK(dml::parse_variant("none") == DmlVariant::none);
  CHECK_THROWS_AS(dml::parse_variant("mssm"), dml::ConfigError);
  for (auto v : dml::kAllVariants) CHECK(dml::parse_variant(dml::to_string(v)) == v);
}

}  // TEST_SUITE
