#include "smokeseg/losses.hpp"

#include <cmath>

#include "smokeseg/common.hpp"

namespace smokeseg {
namespace {

double sigmoid_scalar(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_dims(const Grid& g, int width, int height, const char* what) {
  if (g.width != width || g.height != height) {
    throw Error(std::string(what) + ": dimension mismatch");
  }
}

// Per-pixel BCE value and d/dz. The clamp makes saturated logits finite;
// inside a clamped log the derivative is 0.
struct BceTerm {
  double value;
  double dz;
};

BceTerm bce_term(double z, bool positive) {
  const double p = sigmoid_scalar(z);
  if (positive) {
    if (p < kProbEps) return {-std::log(kProbEps), 0.0};
    return {-std::log(p), p - 1.0};
  }
  const double q = 1.0 - p;
  if (q < kProbEps) return {-std::log(kProbEps), 0.0};
  return {-std::log(q), p};
}

}  // namespace

void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"lambda0", c.lambda0},
                     {"lambda1", c.lambda1},
                     {"lambda2", c.lambda2},
                     {"lambda3", c.lambda3},
                     {"boundary_threshold", c.boundary_threshold},
                     {"enable_l0", c.enable_l0},
                     {"enable_l1", c.enable_l1},
                     {"enable_l2", c.enable_l2},
                     {"enable_l3", c.enable_l3}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
  j.at("lambda0").get_to(c.lambda0);
  j.at("lambda1").get_to(c.lambda1);
  j.at("lambda2").get_to(c.lambda2);
  j.at("lambda3").get_to(c.lambda3);
  j.at("boundary_threshold").get_to(c.boundary_threshold);
  j.at("enable_l0").get_to(c.enable_l0);
  j.at("enable_l1").get_to(c.enable_l1);
  j.at("enable_l2").get_to(c.enable_l2);
  j.at("enable_l3").get_to(c.enable_l3);
}

namespace {

double seg_bce_impl(const Grid& logits, const SegMask& target, double grad_scale, Grid* dlogits) {
  check_dims(logits, target.width, target.height, "seg_bce");
  const std::size_t n = logits.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const BceTerm t = bce_term(logits.v[i], target.data[i] != 0);
    sum += t.value;
    if (dlogits) dlogits->v[i] += grad_scale * t.dz / n;
  }
  return sum / n;
}

double weighted_boundary_ce_impl(const Grid& logits, const EdgeMap& target, double grad_scale,
                                 Grid* dlogits) {
  check_dims(logits, target.width, target.height, "weighted_boundary_ce");
  const std::size_t n = logits.size();
  const long long edge_count = target.positive_count();
  if (edge_count == 0 || edge_count == static_cast<long long>(n)) {
    SegMask as_mask{target.width, target.height, target.data};
    return seg_bce_impl(logits, as_mask, grad_scale, dlogits);
  }
  const double beta = static_cast<double>(n - edge_count) / n;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool edge = target.data[i] != 0;
    const double w = edge ? beta : 1.0 - beta;
    const BceTerm t = bce_term(logits.v[i], edge);
    sum += w * t.value;
    if (dlogits) dlogits->v[i] += grad_scale * w * t.dz / n;
  }
  return sum / n;
}

double bas_loss_impl(const Grid& final_logits, const SegMask& target, const Grid& boundary_logits,
                     double t, double grad_scale, Grid* dfinal) {
  check_dims(final_logits, target.width, target.height, "bas_loss");
  check_dims(boundary_logits, target.width, target.height, "bas_loss (boundary)");
  // t = 0 is allowed so the full-gate reduction to seg_bce stays testable.
  if (!(t >= 0.0 && t < 1.0)) throw Error("bas_loss: threshold t must be in [0,1)");
  const std::size_t n = final_logits.size();
  std::size_t gated = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sigmoid_scalar(boundary_logits.v[i]) > t) ++gated;
  }
  if (gated == 0) return 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sigmoid_scalar(boundary_logits.v[i]) <= t) continue;
    const BceTerm term = bce_term(final_logits.v[i], target.data[i] != 0);
    sum += term.value;
    if (dfinal) dfinal->v[i] += grad_scale * term.dz / gated;
  }
  return sum / gated;
}

LossBreakdown total_loss_impl(const StudentOutputs& outputs, const SegMask& target,
                              const EdgeMap& edges, const LossConfig& cfg,
                              StudentOutputs* grads) {
  LossBreakdown out;
  out.lambdas = {cfg.lambda0, cfg.lambda1, cfg.lambda2, cfg.lambda3};

  Grid* d_aux = nullptr;
  Grid* d_final = nullptr;
  Grid* d_boundary = nullptr;
  if (grads) {
    grads->aux_seg_logits = Grid::zeros(outputs.aux_seg_logits.height, outputs.aux_seg_logits.width);
    grads->final_seg_logits =
        Grid::zeros(outputs.final_seg_logits.height, outputs.final_seg_logits.width);
    grads->boundary_logits =
        Grid::zeros(outputs.boundary_logits.height, outputs.boundary_logits.width);
    d_aux = &grads->aux_seg_logits;
    d_final = &grads->final_seg_logits;
    d_boundary = &grads->boundary_logits;
  }

  if (cfg.enable_l0) {
    out.components[0] = seg_bce_impl(outputs.aux_seg_logits, target, cfg.lambda0, d_aux);
  }
  if (cfg.enable_l1) {
    out.components[1] = seg_bce_impl(outputs.final_seg_logits, target, cfg.lambda1, d_final);
  }
  if (cfg.enable_l2) {
    out.components[2] =
        weighted_boundary_ce_impl(outputs.boundary_logits, edges, cfg.lambda2, d_boundary);
  }
  if (cfg.enable_l3) {
    out.components[3] = bas_loss_impl(outputs.final_seg_logits, target, outputs.boundary_logits,
                                      cfg.boundary_threshold, cfg.lambda3, d_final);
  }

  double total = 0.0;
  for (int i = 0; i < 4; ++i) total += out.contribution(i);
  out.total = total;
  return out;
}

}  // namespace

double seg_bce(const Grid& logits, const SegMask& target) {
  return seg_bce_impl(logits, target, 1.0, nullptr);
}

double weighted_boundary_ce(const Grid& boundary_logits, const EdgeMap& target) {
  return weighted_boundary_ce_impl(boundary_logits, target, 1.0, nullptr);
}

double bas_loss(const Grid& final_logits, const SegMask& target, const Grid& boundary_logits,
                double t) {
  return bas_loss_impl(final_logits, target, boundary_logits, t, 1.0, nullptr);
}

LossBreakdown total_loss(const StudentOutputs& outputs, const SegMask& target,
                         const EdgeMap& edges, const LossConfig& cfg) {
  return total_loss_impl(outputs, target, edges, cfg, nullptr);
}

LossBreakdown total_loss_with_grad(const StudentOutputs& outputs, const SegMask& target,
                                   const EdgeMap& edges, const LossConfig& cfg,
                                   StudentOutputs& grads) {
  return total_loss_impl(outputs, target, edges, cfg, &grads);
}

}  // namespace smokeseg
