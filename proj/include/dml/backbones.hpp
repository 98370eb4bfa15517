#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dml/nn.hpp"

namespace dml {

enum class BackboneKind { single_task, shared_bottom, mmoe, ple };

std::string_view to_string(BackboneKind kind);
BackboneKind parse_backbone(std::string_view name);

struct BackboneConfig {
  BackboneKind kind = BackboneKind::shared_bottom;
  std::size_t num_tasks = 2;
  /// Experts per extraction level (MMoE, PLE). PLE requires num_tasks + 1.
  std::size_t experts_per_level = 3;
  std::size_t expert_dim = 128;

  std::size_t num_levels() const { return kind == BackboneKind::ple ? 2 : 1; }
};

/// Throws ConfigError for inconsistent settings.
void validate(const BackboneConfig& config);

/// One tower input l^k per task, each [batch x expert_dim].
struct BackboneOutput {
  std::vector<NodeId> per_task_inputs;
};

// Parameters follow "backbone/<kind>/<level>/<expert>/<layer>/{W,b}".

/// One shared relu layer; every task reads the same node.
BackboneOutput shared_bottom_forward(ParamContext& ctx, const BackboneConfig& config, NodeId x);

/// Shared experts mixed by one softmax gate per task.
BackboneOutput mmoe_forward(ParamContext& ctx, const BackboneConfig& config, NodeId x);

/// Two extraction levels, each with one shared expert and one expert per
/// task. Task gates mix the task's own expert with the shared one; the
/// level-1 shared gate mixes all experts and feeds the level-2 shared expert.
BackboneOutput ple_forward(ParamContext& ctx, const BackboneConfig& config, NodeId x);

/// Independent per-task first layers over per-task inputs (separate embeddings).
BackboneOutput single_task_backbone(ParamContext& ctx, const BackboneConfig& config,
                                    std::span<const NodeId> per_task_x);

/// Dispatches on config.kind. per_task_x is used only for single_task; the
/// other kinds read shared_x.
BackboneOutput backbone_forward(ParamContext& ctx, const BackboneConfig& config, NodeId shared_x,
                                std::span<const NodeId> per_task_x);

/// Softmax gate over the given experts followed by the weighted sum.
/// Returns the fused representation; gate_out receives the gate weights.
NodeId gated_mixture(ParamContext& ctx, const std::string& gate_prefix, NodeId gate_input,
                     std::span<const NodeId> experts, NodeId* gate_out = nullptr);

}  // namespace dml
