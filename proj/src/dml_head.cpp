#include "dml/dml_head.hpp"

#include <cmath>

#include "dml/error.hpp"

namespace dml {

namespace {

std::string tower_prefix(std::size_t k) { return "dml/tower/" + std::to_string(k); }
std::string gkd_prefix(std::size_t k) { return "dml/gkd/" + std::to_string(k); }

}  // namespace

std::string_view to_string(DmlVariant variant) {
  switch (variant) {
    case DmlVariant::full: return "full";
    case DmlVariant::ctfm_only: return "ctfm_only";
    case DmlVariant::gkd_only: return "gkd_only";
    case DmlVariant::v0: return "v0";
    case DmlVariant::none: return "none";
  }
  return "unknown";
}

DmlVariant parse_variant(std::string_view name) {
  if (name == "full" || name == "dml") return DmlVariant::full;
  if (name == "ctfm_only" || name == "ctfm") return DmlVariant::ctfm_only;
  if (name == "gkd_only" || name == "gkd") return DmlVariant::gkd_only;
  if (name == "v0") return DmlVariant::v0;
  if (name == "none" || name == "base") return DmlVariant::none;
  throw ConfigError("unknown dml variant '" + std::string(name) + "'");
}

Activation output_activation(TaskKind task) {
  return task == TaskKind::classification ? Activation::sigmoid : Activation::linear;
}

std::vector<NodeId> ctfm_forward(ParamContext& ctx, std::span<const NodeId> l, std::size_t d0,
                                 bool block_gradients) {
  const std::size_t tasks = l.size();
  if (tasks < 2) throw ShapeError("ctfm: need at least two tasks, got " + std::to_string(tasks));
  Tape& tape = ctx.tape();
  const std::size_t batch = tape.value(l[0]).rows();
  for (NodeId li : l) {
    const Tensor& v = tape.value(li);
    if (v.cols() != d0 || v.rows() != batch) {
      throw ShapeError("ctfm: tower input " + v.shape().to_string() + ", expected [" +
                       std::to_string(batch) + "x" + std::to_string(d0) + "]");
    }
  }

  std::vector<NodeId> rows;
  for (std::size_t k = 0; k < tasks; ++k) {
    const NodeId t = ctx.uniform("dml/ctfm/t_" + std::to_string(k), Shape(d0));
    rows.push_back(tape.add(l[k], t));
  }
  // Task-major stacking: rows [k*batch, (k+1)*batch) hold task k.
  const NodeId mat_o = tape.row_stack(rows);
  const NodeId kv_source = block_gradients ? tape.stop_gradient(mat_o) : mat_o;
  const NodeId mat_q = tape.matmul(mat_o, ctx.weight("dml/ctfm/Wq", d0, d0));
  const NodeId mat_k = tape.matmul(kv_source, ctx.weight("dml/ctfm/Wk", d0, d0));
  const NodeId mat_v = tape.matmul(kv_source, ctx.weight("dml/ctfm/Wv", d0, d0));

  const std::vector<NodeId> q = tape.split_rows(mat_q, tasks);
  const std::vector<NodeId> key = tape.split_rows(mat_k, tasks);
  const std::vector<NodeId> val = tape.split_rows(mat_v, tasks);

  const NodeId ones = tape.constant(Tensor(Shape(d0, 1), 1.0));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d0));
  std::vector<NodeId> selectors;
  for (std::size_t j = 0; j < tasks; ++j) {
    Tensor sel(Shape(tasks, d0));
    for (std::size_t c = 0; c < d0; ++c) sel(j, c) = 1.0;
    selectors.push_back(tape.constant(std::move(sel)));
  }

  std::vector<NodeId> attended;
  for (std::size_t k = 0; k < tasks; ++k) {
    std::vector<NodeId> scores;
    for (std::size_t j = 0; j < tasks; ++j) {
      scores.push_back(tape.matmul(tape.hadamard(q[k], key[j]), ones));
    }
    const NodeId weights = tape.row_softmax(tape.scale(tape.concat_cols(scores), inv_sqrt_d));
    NodeId r{};
    for (std::size_t j = 0; j < tasks; ++j) {
      const NodeId term = tape.hadamard(tape.matmul(weights, selectors[j]), val[j]);
      r = j == 0 ? term : tape.add(r, term);
    }
    attended.push_back(r);
  }
  const NodeId mat_r = tape.row_stack(attended);
  return tape.split_rows(tape.add(mat_o, mat_r), tasks);
}

NodeId tower_hidden(ParamContext& ctx, std::size_t k, NodeId input, const HeadConfig& config) {
  return mlp_forward(ctx, tower_prefix(k), MLPSpec{{config.tower_hidden, config.d1}, Activation::relu},
                     input);
}

NodeId plain_output(ParamContext& ctx, std::size_t k, NodeId h, TaskKind task) {
  Tape& tape = ctx.tape();
  const std::string base = tower_prefix(k) + "/2";
  const NodeId w = ctx.weight(base + "/W", tape.value(h).cols(), 1);
  const NodeId b = ctx.bias(base + "/b", 1);
  return activate(tape, tape.add(tape.matmul(h, w), b), output_activation(task));
}

NodeId gkd_forward(ParamContext& ctx, std::size_t k, std::span<const NodeId> h_all, TaskKind task,
                   std::size_t d1) {
  if (k >= h_all.size()) {
    throw ShapeError("gkd: task " + std::to_string(k) + " out of range for " +
                     std::to_string(h_all.size()) + " tasks");
  }
  Tape& tape = ctx.tape();
  for (NodeId h : h_all) {
    if (tape.value(h).cols() != d1) {
      throw ShapeError("gkd: hidden state " + tape.value(h).shape().to_string() +
                       ", expected width " + std::to_string(d1));
    }
  }
  const std::string base = gkd_prefix(k);
  const NodeId global = tape.stop_gradient(tape.concat_cols(h_all));
  const NodeId gk = mlp_forward(ctx, base + "/distill", MLPSpec{{d1}, Activation::relu}, global);
  const NodeId own = h_all[k];
  const NodeId gate_in[] = {gk, own};
  const NodeId gw =
      mlp_forward(ctx, base + "/gate", MLPSpec{{d1}, Activation::sigmoid}, tape.concat_cols(gate_in));
  const NodeId out_in[] = {tape.hadamard(gk, gw), own};
  return mlp_forward(ctx, base + "/out", MLPSpec{{1}, output_activation(task)},
                     tape.concat_cols(out_in));
}

std::vector<NodeId> dml_head_forward(ParamContext& ctx, std::span<const NodeId> l,
                                     const HeadConfig& config) {
  const std::size_t tasks = config.tasks.size();
  if (l.size() != tasks) {
    throw ShapeError("dml head: " + std::to_string(l.size()) + " tower inputs for " +
                     std::to_string(tasks) + " tasks");
  }
  const DmlVariant v = config.variant;
  const bool use_ctfm = v == DmlVariant::full || v == DmlVariant::ctfm_only || v == DmlVariant::v0;
  const bool use_gkd = v == DmlVariant::full || v == DmlVariant::gkd_only || v == DmlVariant::v0;

  std::vector<NodeId> inputs(l.begin(), l.end());
  if (use_ctfm) inputs = ctfm_forward(ctx, l, config.d0, v != DmlVariant::v0);

  std::vector<NodeId> hidden;
  for (std::size_t k = 0; k < tasks; ++k) hidden.push_back(tower_hidden(ctx, k, inputs[k], config));

  std::vector<NodeId> preds;
  for (std::size_t k = 0; k < tasks; ++k) {
    preds.push_back(use_gkd ? gkd_forward(ctx, k, hidden, config.tasks[k], config.d1)
                            : plain_output(ctx, k, hidden[k], config.tasks[k]));
  }
  return preds;
}

}  // namespace dml
