#include "dml/backbones.hpp"

#include "dml/error.hpp"

namespace dml {

namespace {

std::string expert_prefix(BackboneKind kind, std::size_t level, const std::string& expert) {
  return "backbone/" + std::string(to_string(kind)) + "/" + std::to_string(level) + "/" + expert;
}

NodeId expert(ParamContext& ctx, const std::string& prefix, std::size_t dim, NodeId input) {
  return mlp_forward(ctx, prefix, MLPSpec{{dim}, Activation::relu}, input);
}

// [experts x dim] constant whose row e is ones: gate·selector broadcasts gate column e.
Tensor column_selector(std::size_t experts, std::size_t e, std::size_t dim) {
  Tensor sel(Shape(experts, dim));
  for (std::size_t j = 0; j < dim; ++j) sel(e, j) = 1.0;
  return sel;
}

}  // namespace

std::string_view to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::single_task: return "single_task";
    case BackboneKind::shared_bottom: return "shared_bottom";
    case BackboneKind::mmoe: return "mmoe";
    case BackboneKind::ple: return "ple";
  }
  return "unknown";
}

BackboneKind parse_backbone(std::string_view name) {
  if (name == "single_task" || name == "single") return BackboneKind::single_task;
  if (name == "shared_bottom" || name == "sb") return BackboneKind::shared_bottom;
  if (name == "mmoe") return BackboneKind::mmoe;
  if (name == "ple") return BackboneKind::ple;
  throw ConfigError("unknown backbone '" + std::string(name) + "'");
}

void validate(const BackboneConfig& config) {
  if (config.num_tasks < 1) throw ConfigError("backbone: need at least one task");
  if (config.expert_dim == 0) throw ConfigError("backbone: expert_dim must be positive");
  if (config.kind == BackboneKind::mmoe && config.experts_per_level < 1) {
    throw ConfigError("mmoe: need at least one expert");
  }
  if (config.kind == BackboneKind::ple && config.experts_per_level != config.num_tasks + 1) {
    throw ConfigError("ple: " + std::to_string(config.num_tasks) + " tasks need " +
                      std::to_string(config.num_tasks + 1) +
                      " experts per level (one shared + one per task), got " +
                      std::to_string(config.experts_per_level));
  }
}

NodeId gated_mixture(ParamContext& ctx, const std::string& gate_prefix, NodeId gate_input,
                     std::span<const NodeId> experts, NodeId* gate_out) {
  Tape& tape = ctx.tape();
  const std::size_t n = experts.size();
  const NodeId gate =
      tape.row_softmax(mlp_forward(ctx, gate_prefix, MLPSpec{{n}, Activation::linear}, gate_input));
  if (gate_out) *gate_out = gate;
  const std::size_t dim = tape.value(experts.front()).cols();
  NodeId fused{};
  for (std::size_t e = 0; e < n; ++e) {
    const NodeId weight = tape.matmul(gate, tape.constant(column_selector(n, e, dim)));
    const NodeId term = tape.hadamard(weight, experts[e]);
    fused = e == 0 ? term : tape.add(fused, term);
  }
  return fused;
}

BackboneOutput shared_bottom_forward(ParamContext& ctx, const BackboneConfig& config, NodeId x) {
  const NodeId shared = expert(ctx, expert_prefix(config.kind, 0, "shared"), config.expert_dim, x);
  return BackboneOutput{std::vector<NodeId>(config.num_tasks, shared)};
}

BackboneOutput mmoe_forward(ParamContext& ctx, const BackboneConfig& config, NodeId x) {
  std::vector<NodeId> experts;
  for (std::size_t e = 0; e < config.experts_per_level; ++e) {
    experts.push_back(expert(ctx, expert_prefix(config.kind, 0, "expert_" + std::to_string(e)),
                             config.expert_dim, x));
  }
  BackboneOutput out;
  for (std::size_t k = 0; k < config.num_tasks; ++k) {
    out.per_task_inputs.push_back(gated_mixture(
        ctx, expert_prefix(config.kind, 0, "gate_" + std::to_string(k)), x, experts));
  }
  return out;
}

BackboneOutput ple_forward(ParamContext& ctx, const BackboneConfig& config, NodeId x) {
  const std::size_t tasks = config.num_tasks;
  std::vector<NodeId> task_inputs(tasks, x);
  NodeId shared_input = x;

  for (std::size_t level = 0; level < config.num_levels(); ++level) {
    const bool last = level + 1 == config.num_levels();
    std::vector<NodeId> task_experts;
    for (std::size_t k = 0; k < tasks; ++k) {
      task_experts.push_back(expert(ctx, expert_prefix(config.kind, level, "task_" + std::to_string(k)),
                                    config.expert_dim, task_inputs[k]));
    }
    const NodeId shared_expert =
        expert(ctx, expert_prefix(config.kind, level, "shared"), config.expert_dim, shared_input);

    std::vector<NodeId> fused(tasks);
    for (std::size_t k = 0; k < tasks; ++k) {
      const NodeId pair[] = {task_experts[k], shared_expert};
      fused[k] = gated_mixture(ctx, expert_prefix(config.kind, level, "gate_" + std::to_string(k)),
                               task_inputs[k], pair);
    }
    if (!last) {
      std::vector<NodeId> all = task_experts;
      all.push_back(shared_expert);
      shared_input = gated_mixture(ctx, expert_prefix(config.kind, level, "gate_shared"),
                                   shared_input, all);
    }
    task_inputs = std::move(fused);
  }
  return BackboneOutput{std::move(task_inputs)};
}

BackboneOutput single_task_backbone(ParamContext& ctx, const BackboneConfig& config,
                                    std::span<const NodeId> per_task_x) {
  if (per_task_x.size() != config.num_tasks) {
    throw ShapeError("single_task: expected " + std::to_string(config.num_tasks) +
                     " per-task inputs, got " + std::to_string(per_task_x.size()));
  }
  BackboneOutput out;
  for (std::size_t k = 0; k < config.num_tasks; ++k) {
    out.per_task_inputs.push_back(expert(
        ctx, expert_prefix(config.kind, 0, "task_" + std::to_string(k)), config.expert_dim, per_task_x[k]));
  }
  return out;
}

BackboneOutput backbone_forward(ParamContext& ctx, const BackboneConfig& config, NodeId shared_x,
                                std::span<const NodeId> per_task_x) {
  validate(config);
  switch (config.kind) {
    case BackboneKind::single_task: return single_task_backbone(ctx, config, per_task_x);
    case BackboneKind::shared_bottom: return shared_bottom_forward(ctx, config, shared_x);
    case BackboneKind::mmoe: return mmoe_forward(ctx, config, shared_x);
    case BackboneKind::ple: return ple_forward(ctx, config, shared_x);
  }
  throw ConfigError("unknown backbone kind");
}

}  // namespace dml
