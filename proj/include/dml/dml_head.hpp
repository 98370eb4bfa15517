#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "dml/nn.hpp"
#include "dml/task.hpp"

namespace dml {

/// Upper-network wiring.
///   full       CTFM (blocked) -> towers -> GKD
///   ctfm_only  CTFM (blocked) -> towers -> plain output layer
///   gkd_only   towers on l^k directly -> GKD
///   v0         CTFM without gradient blocking -> towers -> GKD
///   none       plain towers, the baseline
enum class DmlVariant { full, ctfm_only, gkd_only, v0, none };

std::string_view to_string(DmlVariant variant);
DmlVariant parse_variant(std::string_view name);
inline constexpr DmlVariant kAllVariants[] = {DmlVariant::none, DmlVariant::ctfm_only,
                                              DmlVariant::gkd_only, DmlVariant::v0,
                                              DmlVariant::full};

struct HeadConfig {
  DmlVariant variant = DmlVariant::full;
  std::vector<TaskKind> tasks;
  /// Width of each l^k and of the task embeddings.
  std::size_t d0 = 128;
  /// First tower layer width.
  std::size_t tower_hidden = 128;
  /// Width of h^k and of the GKD layers.
  std::size_t d1 = 80;
};

/// Cross-task feature mining over K tower inputs, each [batch x d0].
///
/// Per sample, the rows l^k + t^k form a K x d0 matrix O. Queries are O·Wq;
/// keys and values are O·Wk and O·Wv with O behind a stop-gradient when
/// block_gradients is set. Scaled dot-product attention over the K rows
/// gives R and the result is split back out of O + R. The batch is handled
/// by stacking the K task blocks vertically, so one projection matmul covers
/// every sample and attention scores are formed per row.
///
/// Parameters: dml/ctfm/t_<k> [d0], dml/ctfm/{Wq,Wk,Wv} [d0 x d0].
std::vector<NodeId> ctfm_forward(ParamContext& ctx, std::span<const NodeId> l, std::size_t d0,
                                 bool block_gradients);

/// H^k: relu MLP (tower_hidden, d1) under dml/tower/<k>.
NodeId tower_hidden(ParamContext& ctx, std::size_t k, NodeId input, const HeadConfig& config);

/// GKD for task k over all tower hidden states h_all (each [batch x d1]).
/// GK = relu-MLP(stop_gradient(concat h_all)); GW = sigmoid-MLP(concat(GK, h^k));
/// o^k = output layer over concat(GK ⊙ GW, h^k).
/// Parameters: dml/gkd/<k>/{distill,gate,out}/0/{W,b}.
NodeId gkd_forward(ParamContext& ctx, std::size_t k, std::span<const NodeId> h_all, TaskKind task,
                   std::size_t d1);

/// Single output unit on h^k (dml/tower/<k>/2), sigmoid for classification.
NodeId plain_output(ParamContext& ctx, std::size_t k, NodeId h, TaskKind task);

/// Prediction per task, [batch x 1] each.
std::vector<NodeId> dml_head_forward(ParamContext& ctx, std::span<const NodeId> l,
                                     const HeadConfig& config);

Activation output_activation(TaskKind task);

}  // namespace dml
