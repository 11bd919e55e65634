#include "smokeseg/student.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "smokeseg/common.hpp"

namespace smokeseg {
namespace {

constexpr char kCheckpointMagic[] = "SSCK1\n";

struct RefCache final : public ForwardCache {
  Tensor input;
  std::vector<Tensor> trunk_outputs;                 // post-ReLU, per trunk layer
  std::vector<std::array<Tensor, 2>> head_tensors;   // [hidden post-ReLU, logits low-res]
};

Grid plane_to_grid(const Tensor& t) {
  Grid g = Grid::zeros(t.height, t.width);
  g.v = t.v;
  return g;
}

Tensor grid_to_plane(const Grid& g) {
  Tensor t = Tensor::zeros(1, g.height, g.width);
  t.v = g.v;
  return t;
}

}  // namespace

void to_json(nlohmann::json& j, const StudentConfig& c) {
  j = nlohmann::json{{"stem_channels", c.stem_channels},
                     {"body_channels", c.body_channels},
                     {"body_convs", c.body_convs},
                     {"head_channels", c.head_channels},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, StudentConfig& c) {
  j.at("stem_channels").get_to(c.stem_channels);
  j.at("body_channels").get_to(c.body_channels);
  j.at("body_convs").get_to(c.body_convs);
  j.at("head_channels").get_to(c.head_channels);
  j.at("seed").get_to(c.seed);
}

ReferenceStudent::ReferenceStudent(const StudentConfig& config) : config_(config) {
  if (config.stem_channels < 1 || config.body_channels < 1 || config.head_channels < 1 ||
      config.body_convs < 1) {
    throw Error("ReferenceStudent: channel counts and body_convs must be positive");
  }

  std::size_t offset = 0;
  auto add_layer = [&offset](int in_c, int out_c, int stride) {
    LayerSpec spec{in_c, out_c, stride, offset, offset + static_cast<std::size_t>(out_c) * in_c * 9};
    offset = spec.b_off + out_c;
    return spec;
  };

  trunk_.push_back(add_layer(3, config.stem_channels, 2));
  trunk_.push_back(add_layer(config.stem_channels, config.body_channels, 2));
  for (int i = 1; i < config.body_convs; ++i) {
    trunk_.push_back(add_layer(config.body_channels, config.body_channels, 1));
  }
  for (int h = 0; h < 3; ++h) {
    heads_.push_back({add_layer(config.body_channels, config.head_channels, 1),
                      add_layer(config.head_channels, 1, 1)});
  }

  params_.assign(offset, 0.0);
  std::mt19937_64 rng(config.seed);
  auto init_layer = [&](const LayerSpec& spec) {
    const double stddev = std::sqrt(2.0 / (spec.in_c * 9));
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t i = spec.w_off; i < spec.b_off; ++i) params_[i] = dist(rng);
    // biases stay zero
  };
  for (const auto& spec : trunk_) init_layer(spec);
  for (const auto& head : heads_) {
    init_layer(head[0]);
    init_layer(head[1]);
  }
}

std::string ReferenceStudent::descriptor() const {
  std::ostringstream os;
  os << "reference-tiny(c" << config_.stem_channels << "/" << config_.body_channels << "x"
     << config_.body_convs << "/h" << config_.head_channels << ", " << params_.size()
     << " params)";
  return os.str();
}

std::size_t ReferenceStudent::head_logit_bias_offset(int head) const {
  return heads_.at(head)[1].b_off;
}

std::pair<StudentOutputs, std::unique_ptr<ForwardCache>> ReferenceStudent::forward_train(
    const Tensor& image) const {
  if (image.channels != 3) throw Error("ReferenceStudent: expected 3-channel input");
  if (image.height % input_stride() != 0 || image.width % input_stride() != 0) {
    std::ostringstream os;
    os << "ReferenceStudent: input " << image.width << "x" << image.height
       << " not divisible by trunk stride " << input_stride();
    throw Error(os.str());
  }

  auto cache = std::make_unique<RefCache>();
  cache->input = image;

  const Tensor* x = &cache->input;
  for (const auto& spec : trunk_) {
    Tensor y;
    conv3x3_forward(*x, std::span<const double>(params_).subspan(spec.w_off, spec.b_off - spec.w_off),
                    std::span<const double>(params_).subspan(spec.b_off, spec.out_c), spec.out_c,
                    spec.stride, y);
    relu_inplace(y);
    cache->trunk_outputs.push_back(std::move(y));
    x = &cache->trunk_outputs.back();
  }

  StudentOutputs outputs;
  Grid* grids[3] = {&outputs.aux_seg_logits, &outputs.final_seg_logits, &outputs.boundary_logits};
  for (int h = 0; h < 3; ++h) {
    const auto& [conv_a, conv_b] = heads_[h];
    Tensor hidden;
    conv3x3_forward(*x,
                    std::span<const double>(params_).subspan(conv_a.w_off, conv_a.b_off - conv_a.w_off),
                    std::span<const double>(params_).subspan(conv_a.b_off, conv_a.out_c),
                    conv_a.out_c, 1, hidden);
    relu_inplace(hidden);
    Tensor logits_low;
    conv3x3_forward(hidden,
                    std::span<const double>(params_).subspan(conv_b.w_off, conv_b.b_off - conv_b.w_off),
                    std::span<const double>(params_).subspan(conv_b.b_off, conv_b.out_c),
                    conv_b.out_c, 1, logits_low);
    Tensor logits = upsample_bilinear(logits_low, input_stride());
    *grids[h] = plane_to_grid(logits);
    cache->head_tensors.push_back({std::move(hidden), std::move(logits_low)});
  }
  return {std::move(outputs), std::move(cache)};
}

StudentOutputs ReferenceStudent::forward(const Tensor& image) const {
  return forward_train(image).first;
}

void ReferenceStudent::backward(const ForwardCache& cache_base, const StudentOutputs& output_grads,
                                std::span<double> param_grads) const {
  const auto& cache = dynamic_cast<const RefCache&>(cache_base);
  if (param_grads.size() != params_.size()) {
    throw Error("ReferenceStudent::backward: gradient buffer size mismatch");
  }

  const Tensor& trunk_out = cache.trunk_outputs.back();
  Tensor d_trunk_out = Tensor::zeros(trunk_out.channels, trunk_out.height, trunk_out.width);

  const Grid* grids[3] = {&output_grads.aux_seg_logits, &output_grads.final_seg_logits,
                          &output_grads.boundary_logits};
  for (int h = 0; h < 3; ++h) {
    const auto& [conv_a, conv_b] = heads_[h];
    const auto& [hidden, logits_low] = cache.head_tensors[h];

    Tensor d_logits = grid_to_plane(*grids[h]);
    Tensor d_logits_low;
    upsample_bilinear_backward(d_logits, input_stride(), logits_low.height, logits_low.width,
                               d_logits_low);

    Tensor d_hidden;
    conv3x3_backward(hidden,
                     std::span<const double>(params_).subspan(conv_b.w_off, conv_b.b_off - conv_b.w_off),
                     conv_b.out_c, 1, d_logits_low, &d_hidden,
                     param_grads.subspan(conv_b.w_off, conv_b.b_off - conv_b.w_off),
                     param_grads.subspan(conv_b.b_off, conv_b.out_c));
    relu_backward(hidden, d_hidden);

    Tensor d_in;
    conv3x3_backward(trunk_out,
                     std::span<const double>(params_).subspan(conv_a.w_off, conv_a.b_off - conv_a.w_off),
                     conv_a.out_c, 1, d_hidden, &d_in,
                     param_grads.subspan(conv_a.w_off, conv_a.b_off - conv_a.w_off),
                     param_grads.subspan(conv_a.b_off, conv_a.out_c));
    for (std::size_t i = 0; i < d_trunk_out.v.size(); ++i) d_trunk_out.v[i] += d_in.v[i];
  }

  Tensor dy = std::move(d_trunk_out);
  for (int layer = static_cast<int>(trunk_.size()) - 1; layer >= 0; --layer) {
    const auto& spec = trunk_[layer];
    const Tensor& y = cache.trunk_outputs[layer];
    const Tensor& x = layer == 0 ? cache.input : cache.trunk_outputs[layer - 1];
    relu_backward(y, dy);
    Tensor dx;
    conv3x3_backward(x,
                     std::span<const double>(params_).subspan(spec.w_off, spec.b_off - spec.w_off),
                     spec.out_c, spec.stride, dy, layer > 0 ? &dx : nullptr,
                     param_grads.subspan(spec.w_off, spec.b_off - spec.w_off),
                     param_grads.subspan(spec.b_off, spec.out_c));
    dy = std::move(dx);
  }
}

std::unique_ptr<ReferenceStudent> reference_student(const StudentConfig& config) {
  return std::make_unique<ReferenceStudent>(config);
}

std::string save_checkpoint(const std::string& dir, const ReferenceStudent& model,
                            const nlohmann::json& meta) {
  nlohmann::json header = meta;
  header["student"] = model.config();
  header["descriptor"] = model.descriptor();
  const std::string header_line = header.dump();

  std::vector<std::uint8_t> payload;
  payload.insert(payload.end(), kCheckpointMagic, kCheckpointMagic + 6);
  payload.insert(payload.end(), header_line.begin(), header_line.end());
  payload.push_back('\n');
  const auto params = model.parameters();
  const auto* raw = reinterpret_cast<const std::uint8_t*>(params.data());
  payload.insert(payload.end(), raw, raw + params.size_bytes());

  const std::string hash = hex64(fnv1a64(payload));
  std::ostringstream name;
  name << "ckpt_";
  if (meta.contains("epoch")) name << "epoch" << meta["epoch"].get<int>() << "_";
  name << hash << ".bin";
  const std::string path = (std::filesystem::path(dir) / name.str()).string();

  ensure_parent_dir(path);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) throw Error("checkpoint write failed: " + path);
  return path;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint not found: " + path);
  std::vector<std::uint8_t> payload((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
  if (payload.size() < 7 || std::memcmp(payload.data(), kCheckpointMagic, 6) != 0) {
    throw Error("not a checkpoint file: " + path);
  }
  const auto newline = std::find(payload.begin() + 6, payload.end(), '\n');
  if (newline == payload.end()) throw Error("corrupt checkpoint header: " + path);

  Checkpoint ckpt;
  ckpt.meta = nlohmann::json::parse(std::string(payload.begin() + 6, newline));
  ckpt.student = ckpt.meta.at("student").get<StudentConfig>();
  ckpt.content_hash = hex64(fnv1a64(payload));

  const std::size_t data_off = static_cast<std::size_t>(newline - payload.begin()) + 1;
  const std::size_t n_bytes = payload.size() - data_off;
  if (n_bytes % sizeof(double) != 0) throw Error("corrupt checkpoint payload: " + path);
  ckpt.params.resize(n_bytes / sizeof(double));
  std::memcpy(ckpt.params.data(), payload.data() + data_off, n_bytes);
  return ckpt;
}

std::unique_ptr<ReferenceStudent> student_from_checkpoint(const Checkpoint& ckpt) {
  auto model = std::make_unique<ReferenceStudent>(ckpt.student);
  if (ckpt.params.size() != model->parameter_count()) {
    throw Error("checkpoint parameter count does not match student config");
  }
  std::copy(ckpt.params.begin(), ckpt.params.end(), model->parameters().begin());
  return model;
}

}  // namespace smokeseg
