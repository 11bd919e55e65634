#pragma once

#include <array>

#include <json.hpp>

#include "smokeseg/student.hpp"
#include "smokeseg/tensor.hpp"
#include "smokeseg/types.hpp"

namespace smokeseg {

struct LossConfig {
  double lambda0 = 0.4;   // aux segmentation BCE
  double lambda1 = 20.0;  // final segmentation BCE
  double lambda2 = 1.0;   // weighted boundary CE
  double lambda3 = 1.0;   // boundary-gated segmentation BCE
  double boundary_threshold = 0.8;  // gate t on the boundary sigmoid

  // Ablation toggles; a disabled term contributes exactly 0 and no gradient.
  bool enable_l0 = true;
  bool enable_l1 = true;
  bool enable_l2 = true;
  bool enable_l3 = true;

  bool operator==(const LossConfig&) const = default;
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

struct LossBreakdown {
  double total = 0.0;
  // Unweighted component values l0..l3; disabled components are 0.
  std::array<double, 4> components{};
  std::array<double, 4> lambdas{};

  double contribution(int i) const { return lambdas[i] * components[i]; }
};

// Probabilities are clamped to [kProbEps, 1 - kProbEps] inside every log.
inline constexpr double kProbEps = 1e-7;

// Pixel-mean binary cross entropy on logits.
double seg_bce(const Grid& logits, const SegMask& target);

// Class-balanced boundary cross entropy: with beta = #non-edge / #total the
// y=1 term is weighted beta and the y=0 term (1 - beta), averaged over all
// pixels. Constant targets (beta 0 or 1) fall back to unweighted seg_bce.
double weighted_boundary_ce(const Grid& boundary_logits, const EdgeMap& target);

// BCE of the final head restricted to pixels whose boundary sigmoid exceeds
// t, averaged over the gated set; 0 when the gate is empty. The gate is a
// non-differentiated selection: gradients flow only through final_logits.
double bas_loss(const Grid& final_logits, const SegMask& target, const Grid& boundary_logits,
                double t);

LossBreakdown total_loss(const StudentOutputs& outputs, const SegMask& target,
                         const EdgeMap& edges, const LossConfig& cfg);

// As total_loss, and writes dTotal/dLogits into grads (grids are reset to the
// output shapes before accumulation).
LossBreakdown total_loss_with_grad(const StudentOutputs& outputs, const SegMask& target,
                                   const EdgeMap& edges, const LossConfig& cfg,
                                   StudentOutputs& grads);

}  // namespace smokeseg
