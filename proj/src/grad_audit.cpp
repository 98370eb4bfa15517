#include "dml/grad_audit.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "dml/gradcheck.hpp"
#include "dml/random.hpp"

namespace dml {

namespace {

std::string describe(const FiniteDifferenceResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "max_rel_err=%.3g over %zu checks (worst %s #%zu: %.6g vs %.6g)",
                r.max_relative_error, r.elements_checked, r.worst_parameter.c_str(), r.worst_index,
                r.worst_analytic, r.worst_numeric);
  return buf;
}

Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Tensor t = Tensor(Shape(rows, cols));
  for (auto& x : t.data()) x = lo + (hi - lo) * rng.uniform();
  return t;
}

// Values bounded away from zero, for ops with a kink there.
Tensor off_zero_tensor(Rng& rng, std::size_t rows, std::size_t cols) {
  Tensor t = Tensor(Shape(rows, cols));
  for (auto& x : t.data()) {
    const double m = 0.2 + 0.8 * rng.uniform();
    x = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// Contracts a node against fixed random weights so every output element
// carries a distinct adjoint.
NodeId contract(Tape& tape, NodeId x, std::uint64_t seed) {
  const Shape s = tape.value(x).shape();
  Rng rng(derive_seed(seed, "contract"));
  const NodeId w = tape.constant(random_tensor(rng, s.rows(), s.cols(), -1.0, 1.0));
  return tape.reduce_mean(tape.hadamard(x, w));
}

}  // namespace

ModelConfig audit_model_config(BackboneKind backbone, DmlVariant variant) {
  const Dataset probe = make_synthetic({4, 8, 6, 4, 1});
  ModelConfig config = make_model_config(backbone, variant, probe.fields(), probe.tasks());
  config.embed_dim = 3;
  config.backbone.expert_dim = 6;
  config.head.d0 = 6;
  config.head.tower_hidden = 5;
  config.head.d1 = 4;
  return config;
}

ParameterStore audit_parameters(const ModelConfig& config, std::uint64_t seed) {
  ParameterStore params = initialize_model(config, seed);
  for (const auto& name : params.names()) {
    Tensor& t = params.at(name);
    t = uniform_init(seed, "audit/" + name, t.shape(), 0.5);
  }
  return params;
}

Batch audit_batch(std::size_t batch_size, std::uint64_t seed) {
  const Dataset data = make_synthetic({batch_size, 8, 6, 4, seed});
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return make_batch(data, rows);
}

std::vector<AuditCheck> primitive_gradient_checks(const AuditOptions& options) {
  struct Case {
    std::string name;
    std::function<void(Rng&, ParameterStore&)> init;
    std::function<NodeId(Tape&, NodeId, NodeId)> op;
  };
  const auto pair = [](std::size_t ar, std::size_t ac, std::size_t br, std::size_t bc) {
    return [=](Rng& rng, ParameterStore& p) {
      p.add("a", random_tensor(rng, ar, ac, -1.0, 1.0));
      p.add("b", random_tensor(rng, br, bc, -1.0, 1.0));
    };
  };
  const auto single = [](std::function<Tensor(Rng&)> make) {
    return [=](Rng& rng, ParameterStore& p) {
      p.add("a", make(rng));
      p.add("b", Tensor(Shape(1, 1)));
    };
  };
  auto bags = std::make_shared<IndexBags>();
  bags->push(std::vector<std::int32_t>{1, 3});
  bags->push(2);
  bags->push(std::span<const std::int32_t>{});
  bags->push(std::vector<std::int32_t>{4, 4, 0});

  const std::vector<Case> cases = {
      {"matmul", pair(3, 4, 4, 2), [](Tape& t, NodeId a, NodeId b) { return t.matmul(a, b); }},
      {"add", pair(3, 4, 3, 4), [](Tape& t, NodeId a, NodeId b) { return t.add(a, b); }},
      {"add_broadcast", pair(3, 4, 1, 4), [](Tape& t, NodeId a, NodeId b) { return t.add(a, b); }},
      {"subtract_broadcast", pair(3, 4, 1, 4),
       [](Tape& t, NodeId a, NodeId b) { return t.subtract(a, b); }},
      {"scale", pair(3, 4, 1, 1), [](Tape& t, NodeId a, NodeId) { return t.scale(a, -1.7); }},
      {"hadamard", pair(3, 4, 3, 4), [](Tape& t, NodeId a, NodeId b) { return t.hadamard(a, b); }},
      {"relu", single([](Rng& r) { return off_zero_tensor(r, 3, 4); }),
       [](Tape& t, NodeId a, NodeId) { return t.relu(a); }},
      {"sigmoid", pair(3, 4, 1, 1), [](Tape& t, NodeId a, NodeId) { return t.sigmoid(a); }},
      {"row_softmax", pair(3, 4, 1, 1), [](Tape& t, NodeId a, NodeId) { return t.row_softmax(a); }},
      {"transpose", pair(3, 4, 1, 1), [](Tape& t, NodeId a, NodeId) { return t.transpose(a); }},
      {"concat_cols", pair(3, 4, 3, 2),
       [](Tape& t, NodeId a, NodeId b) {
         const NodeId parts[] = {a, b, a};
         return t.concat_cols(parts);
       }},
      {"slice_rows", pair(5, 3, 1, 1), [](Tape& t, NodeId a, NodeId) { return t.slice_rows(a, 1, 3); }},
      {"row_stack", pair(2, 3, 3, 3),
       [](Tape& t, NodeId a, NodeId b) {
         const NodeId parts[] = {b, a};
         return t.row_stack(parts);
       }},
      {"reduce_mean", pair(3, 4, 1, 1), [](Tape& t, NodeId a, NodeId) { return t.reduce_mean(a); }},
      {"square", pair(3, 4, 1, 1), [](Tape& t, NodeId a, NodeId) { return t.square(a); }},
      {"log", single([](Rng& r) { return random_tensor(r, 3, 4, 0.3, 2.0); }),
       [](Tape& t, NodeId a, NodeId) { return t.log(a); }},
      {"clamp", single([](Rng& r) { return random_tensor(r, 3, 4, -0.5, 0.5); }),
       [](Tape& t, NodeId a, NodeId) { return t.clamp(a, -2.0, 2.0); }},
      {"lookup_rows", pair(5, 3, 1, 1),
       [bags](Tape& t, NodeId a, NodeId) { return t.lookup_rows(a, bags); }},
      {"attention", pair(4, 3, 3, 3),
       [](Tape& t, NodeId a, NodeId b) {
         const NodeId q = t.matmul(a, b);
         return scaled_dot_attention(t, q, a, t.sigmoid(a));
       }},
  };

  std::vector<AuditCheck> out;
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto& cs = cases[c];
    Rng rng(derive_seed(options.seed, cs.name));
    ParameterStore params;
    cs.init(rng, params);
    const std::uint64_t seed = derive_seed(options.seed, c);
    const ScalarFn fn = [&cs, seed](Tape& tape, const ParameterStore& p) {
      const NodeId a = tape.parameter("a", p.at("a"));
      const NodeId b = tape.parameter("b", p.at("b"));
      return contract(tape, cs.op(tape, a, b), seed);
    };
    FiniteDifferenceOptions fd;
    fd.eps = options.eps;
    const auto r = finite_difference_check(fn, params, fd);
    out.push_back({"primitive/" + cs.name, r.max_relative_error < options.tolerance, describe(r)});
  }
  return out;
}

std::vector<AuditCheck> model_gradient_checks(const AuditOptions& options) {
  const Batch batch = audit_batch(options.batch_size, options.seed);
  const BackboneKind backbones[] = {BackboneKind::single_task, BackboneKind::shared_bottom,
                                    BackboneKind::mmoe, BackboneKind::ple};
  std::vector<AuditCheck> out;
  for (const auto backbone : backbones) {
    for (const auto variant : kAllVariants) {
      const auto config = audit_model_config(backbone, variant);
      const ParameterStore params = audit_parameters(config, options.seed);
      const ScalarFn fn = [&config, &batch](Tape& tape, const ParameterStore& p) {
        ParamContext ctx(tape, p);
        const auto preds = model_forward(ctx, config, batch);
        return total_loss(tape, preds, batch, config);
      };
      const std::string name =
          std::string(to_string(backbone)) + "+" + std::string(to_string(variant));

      Tape probe;
      fn(probe, params);
      FiniteDifferenceOptions plain;
      plain.eps = options.eps;
      plain.directions_per_parameter = options.directions_per_parameter;
      plain.sample_seed = options.seed;
      plain.excluded = parameters_behind_stop_gradient(probe);
      const auto r1 = finite_difference_check(fn, params, plain);
      out.push_back({"model/" + name + "/unblocked_params", r1.max_relative_error < options.tolerance,
                     describe(r1) + ", " + std::to_string(plain.excluded.size()) + " excluded"});

      FiniteDifferenceOptions held = plain;
      held.excluded.clear();
      held.hold_detached = true;
      const auto r2 = finite_difference_check(fn, params, held);
      out.push_back({"model/" + name + "/held_detached", r2.max_relative_error < options.tolerance,
                     describe(r2)});
    }
  }
  return out;
}

std::vector<AuditCheck> isolation_checks(const AuditOptions& options) {
  std::vector<AuditCheck> out;
  for (const std::size_t num_tasks : {std::size_t{2}, std::size_t{3}}) {
    for (const auto variant : {DmlVariant::full, DmlVariant::v0}) {
      HeadConfig head;
      head.variant = variant;
      head.d0 = 6;
      head.tower_hidden = 5;
      head.d1 = 4;
      for (std::size_t k = 0; k < num_tasks; ++k) {
        head.tasks.push_back(k % 2 ? TaskKind::regression : TaskKind::classification);
      }
      Rng rng(derive_seed(options.seed, "isolation"));
      std::vector<Tensor> inputs;
      for (std::size_t k = 0; k < num_tasks; ++k) {
        inputs.push_back(random_tensor(rng, options.batch_size, head.d0, -1.0, 1.0));
      }

      ParameterStore store;
      {
        Tape tape;
        ParamContext ctx(tape, store, options.seed);
        std::vector<NodeId> l;
        for (const auto& x : inputs) l.push_back(tape.constant(x));
        dml_head_forward(ctx, l, head);
      }

      for (std::size_t target = 0; target < num_tasks; ++target) {
        Tape tape;
        ParamContext ctx(tape, store);
        std::vector<NodeId> l;
        for (const auto& x : inputs) l.push_back(tape.variable(x));
        const auto preds = dml_head_forward(ctx, l, head);
        Tensor labels(Shape(options.batch_size, 1));
        for (std::size_t i = 0; i < options.batch_size; ++i) labels[i] = static_cast<double>(i % 2);
        const NodeId loss = task_loss(tape, loss_for(head.tasks[target]), preds[target], labels);
        const GradientMap grads = backward(tape, loss);

        // Everything that belongs to another task only.
        double leak = 0.0;
        std::size_t entries = 0;
        auto note = [&](const Tensor& g) {
          for (double v : g.data()) leak = std::max(leak, std::abs(v));
          ++entries;
        };
        for (std::size_t j = 0; j < num_tasks; ++j) {
          if (j == target) continue;
          note(grads.of(l[j]));
          for (const auto& [name, id] : tape.parameters()) {
            const std::string j_tag = std::to_string(j);
            if (name == "dml/ctfm/t_" + j_tag || name.rfind("dml/tower/" + j_tag + "/", 0) == 0 ||
                name.rfind("dml/gkd/" + j_tag + "/", 0) == 0) {
              note(grads.of(id));
            }
          }
        }
        const std::string name = "isolation/" + std::string(to_string(variant)) + "/K" +
                                 std::to_string(num_tasks) + "/task" + std::to_string(target);
        char buf[128];
        std::snprintf(buf, sizeof buf, "max |other-task adjoint| = %.3g over %zu tensors", leak,
                      entries);
        const bool passed = variant == DmlVariant::full ? leak == 0.0 : leak > 0.0;
        out.push_back({name, passed, buf});
      }
    }
  }
  return out;
}

std::vector<AuditCheck> run_grad_audit(const AuditOptions& options) {
  auto out = primitive_gradient_checks(options);
  for (auto& c : isolation_checks(options)) out.push_back(std::move(c));
  for (auto& c : model_gradient_checks(options)) out.push_back(std::move(c));
  return out;
}

}  // namespace dml
