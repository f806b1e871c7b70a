#include "walnet/model.hpp"

#include <algorithm>
#include <string>

#include "walnet/errors.hpp"
#include "walnet/ops.hpp"

namespace walnet::model {

using nn::Conv2d;
using nn::Conv2dSpec;
using nn::Linear;
using nn::Tensor;

ModelConfig ModelConfig::paper_scale() {
  ModelConfig cfg;
  cfg.input_size = 224;
  cfg.widths = {256, 512, 1024, 2048};
  cfg.blocks = {3, 4, 6, 3};
  cfg.stem_width = 64;
  cfg.use_split_attention = true;
  cfg.aspp_width = 256;
  cfg.decoder_width = 256;
  return cfg;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig cfg;
  cfg.input_size = 8;
  cfg.widths = {4, 8, 16, 32};
  cfg.blocks = {1, 1, 1, 1};
  cfg.stem_width = 4;
  cfg.aspp_width = 8;
  cfg.low_level_width = 4;
  cfg.decoder_width = 8;
  return cfg;
}

void ModelConfig::validate() const {
  if (input_size < 8) throw ConfigError("model.input_size must be >= 8");
  if (in_channels != 1 && in_channels != 3) throw ConfigError("model.in_channels must be 1 or 3");
  for (int w : widths) {
    if (w < 1) throw ConfigError("model.widths entries must be positive");
  }
  for (int b : blocks) {
    if (b < 1) throw ConfigError("model.blocks entries must be >= 1");
  }
  if (stem_width < 1) throw ConfigError("model.stem_width must be positive");
  if (aspp_width < 1 || low_level_width < 1 || decoder_width < 1) {
    throw ConfigError("model decoder widths must be positive");
  }
  if (aspp_rates.empty()) throw ConfigError("model.aspp_rates must not be empty");
  for (int r : aspp_rates) {
    if (r < 1) throw ConfigError("model.aspp_rates entries must be >= 1");
  }
  roi.validate();
  if (!use_segmentation && roi.strategy != rcm::RoiStrategy::none) {
    throw ConfigError("roi_strategy must be 'none' when the segmentation branch is disabled");
  }
}

namespace {

constexpr Conv2dSpec k3s1{1, 1, 1};
constexpr Conv2dSpec k3s2{2, 1, 1};
constexpr Conv2dSpec k1{1, 0, 1};

class ResidualBlock {
 public:
  ResidualBlock(nn::ParameterStore& s, const std::string& name, int in, int out, int stride,
                bool split_attention, Rng& rng)
      : split_(split_attention), out_(out) {
    const Conv2dSpec first{stride, 1, 1};
    if (split_) {
      conv1_ = Conv2d(s, name + ".splat_conv", in, out * kRadix, 3, first, rng);
      const int hidden = std::max(out / 4, 4);
      fc1_ = Linear(s, name + ".splat_fc1", out, hidden, rng, nn::Init::he_normal);
      fc2_ = Linear(s, name + ".splat_fc2", hidden, out * kRadix, rng);
    } else {
      conv1_ = Conv2d(s, name + ".conv1", in, out, 3, first, rng);
    }
    conv2_ = Conv2d(s, name + ".conv2", out, out, 3, k3s1, rng);
    if (in != out || stride != 1) {
      shortcut_ = Conv2d(s, name + ".shortcut", in, out, 1, Conv2dSpec{stride, 0, 1}, rng, false);
      has_shortcut_ = true;
    }
  }

  Tensor operator()(const Tensor& x) const {
    Tensor h = split_ ? split_attention(x) : nn::relu(conv1_(x));
    h = conv2_(h);
    return nn::relu(nn::add(h, has_shortcut_ ? shortcut_(x) : x));
  }

 private:
  static constexpr int kRadix = 2;

  // Radix-2 split attention: two conv splits fused by a softmax over splits
  // computed from their pooled sum.
  Tensor split_attention(const Tensor& x) const {
    const Tensor u = nn::relu(conv1_(x));
    std::vector<Tensor> splits;
    for (int r = 0; r < kRadix; ++r) splits.push_back(nn::slice_channels(u, r * out_, out_));
    Tensor gap = nn::global_avg_pool(nn::add(splits[0], splits[1]));
    const Tensor weights = nn::radix_softmax(fc2_(nn::relu(fc1_(gap))), kRadix);
    Tensor acc;
    for (int r = 0; r < kRadix; ++r) {
      const Tensor w = nn::slice_channels(nn::reshape(weights, {kRadix * out_, 1, 1}), r * out_, out_);
      const Tensor part = nn::mul_channels(splits[r], nn::reshape(w, {out_}));
      acc = acc.defined() ? nn::add(acc, part) : part;
    }
    return acc;
  }

  bool split_;
  int out_;
  Conv2d conv1_;
  Conv2d conv2_;
  Conv2d shortcut_;
  bool has_shortcut_ = false;
  Linear fc1_;
  Linear fc2_;
};

struct Gate {
  Conv2d theta;  // 3x3 on x at its own grid
  Conv2d phi;    // 1x1 on the gating signal
  Conv2d psi;    // 1x1 to one channel
  int inter = 1;
};

}  // namespace

struct WalNet::Impl {
  Conv2d stem1;
  Conv2d stem2;
  std::array<std::vector<ResidualBlock>, 4> stages;
  std::array<Gate, 3> gates;
  std::vector<Conv2d> aspp_branches;
  Conv2d aspp_pool;
  Conv2d aspp_project;
  Conv2d low_level;
  Conv2d dec1;
  Conv2d dec2;
  Conv2d seg_head;
  std::vector<Linear> heads;
};

WalNet::WalNet(const ModelConfig& config, std::uint64_t seed)
    : config_(config), impl_(std::make_unique<Impl>()) {
  config_.validate();
  Rng rng(seed);
  auto& s = store_;
  auto& m = *impl_;
  const auto& w = config_.widths;

  m.stem1 = Conv2d(s, "stem.conv1", config_.in_channels, config_.stem_width, 3, k3s2, rng);
  m.stem2 = Conv2d(s, "stem.conv2", config_.stem_width, w[0], 3, k3s2, rng);
  int in = w[0];
  for (int stage = 0; stage < 4; ++stage) {
    for (int b = 0; b < config_.blocks[stage]; ++b) {
      const int stride = (stage > 0 && b == 0) ? 2 : 1;
      m.stages[stage].emplace_back(s, "encoder.stage" + std::to_string(stage + 1) + ".block" + std::to_string(b),
                                   in, w[stage], stride, config_.use_split_attention, rng);
      in = w[stage];
    }
  }
  if (config_.use_attention) {
    for (int level = 0; level < 3; ++level) {
      Gate& g = m.gates[level];
      const std::string name = "gate" + std::to_string(level + 1);
      g.inter = std::max(w[level] / 2, 1);
      g.theta = Conv2d(s, name + ".theta", w[level], g.inter, 3, k3s1, rng, false);
      g.phi = Conv2d(s, name + ".phi", w[3], g.inter, 1, k1, rng);
      g.psi = Conv2d(s, name + ".psi", g.inter, 1, 1, k1, rng, true, nn::Init::lecun_normal);
    }
  }
  if (config_.use_segmentation) {
    const int a = config_.aspp_width;
    for (std::size_t i = 0; i < config_.aspp_rates.size(); ++i) {
      const int rate = config_.aspp_rates[i];
      const std::string name = "decoder.aspp.rate" + std::to_string(rate);
      if (rate == 1) {
        m.aspp_branches.emplace_back(s, name, w[3], a, 1, k1, rng);
      } else {
        m.aspp_branches.emplace_back(s, name, w[3], a, 3, Conv2dSpec{1, rate, rate}, rng);
      }
    }
    m.aspp_pool = Conv2d(s, "decoder.aspp.pool", w[3], a, 1, k1, rng);
    const int branches = static_cast<int>(config_.aspp_rates.size()) + 1;
    m.aspp_project = Conv2d(s, "decoder.aspp.project", a * branches, a, 1, k1, rng);
    m.low_level = Conv2d(s, "decoder.low_level", w[0], config_.low_level_width, 1, k1, rng);
    const int d = config_.decoder_width;
    m.dec1 = Conv2d(s, "decoder.conv1", a + config_.low_level_width, d, 3, k3s1, rng);
    m.dec2 = Conv2d(s, "decoder.conv2", d, d, 3, k3s1, rng);
    m.seg_head = Conv2d(s, "decoder.head", d, 1, 1, k1, rng, true, nn::Init::lecun_normal);
  }
  for (int depth = 0; depth < 4; ++depth) {
    m.heads.emplace_back(s, "head.depth" + std::to_string(depth + 1), w[depth], kNumClasses, rng);
  }
}

WalNet::WalNet(WalNet&&) noexcept = default;
WalNet& WalNet::operator=(WalNet&&) noexcept = default;
WalNet::~WalNet() = default;

Tensor WalNet::input_tensor(const imaging::RasterImage& img) const {
  if (img.rows() != config_.input_size || img.cols() != config_.input_size) {
    throw InputError("model input must be " + std::to_string(config_.input_size) + "x" +
                     std::to_string(config_.input_size) + ", got " + std::to_string(img.rows()) +
                     "x" + std::to_string(img.cols()));
  }
  if (img.channels() != config_.in_channels) {
    throw InputError("model expects " + std::to_string(config_.in_channels) + " channel(s), got " +
                     std::to_string(img.channels()));
  }
  imaging::require_min_side(img);
  return Tensor::from({img.channels(), img.rows(), img.cols()},
                      std::vector<double>(img.values().begin(), img.values().end()));
}

GateOutput WalNet::attention_gate(int level, const Tensor& x, const Tensor& gating) const {
  if (!config_.use_attention) throw InternalError("attention_gate called with attention disabled");
  const Gate& g = impl_->gates.at(level);
  const Tensor theta = g.theta(x);
  const Tensor phi = nn::resize(g.phi(gating), theta.dim(1), theta.dim(2));
  const Tensor low = nn::sigmoid(g.psi(nn::relu(nn::add(theta, phi))));
  const Tensor alpha = nn::resize(low, x.dim(1), x.dim(2));
  return GateOutput{nn::mul_map(x, alpha), alpha};
}

EncoderFeatures WalNet::encoder_forward(const Tensor& input) const {
  const auto& m = *impl_;
  EncoderFeatures f;
  Tensor h = nn::relu(m.stem2(nn::relu(m.stem1(input))));
  for (int stage = 0; stage < 4; ++stage) {
    for (const auto& block : m.stages[stage]) h = block(h);
    f.raw[stage] = h;
  }
  for (int level = 0; level < 3; ++level) {
    if (config_.use_attention) {
      auto gate = attention_gate(level, f.raw[level], f.raw[3]);
      f.attended[level] = gate.attended;
      f.alpha[level] = gate.alpha;
    } else {
      f.attended[level] = f.raw[level];
    }
  }
  return f;
}

Tensor WalNet::decoder_forward(const EncoderFeatures& features, int rows, int cols) const {
  if (!config_.use_segmentation) throw InternalError("decoder_forward with segmentation disabled");
  const auto& m = *impl_;
  const Tensor& deep = features.raw[3];
  const Tensor& shallow = features.raw[0];
  std::vector<Tensor> branches;
  for (const auto& b : m.aspp_branches) branches.push_back(nn::relu(b(deep)));
  const Tensor pooled = nn::reshape(nn::global_avg_pool(deep), {deep.dim(0), 1, 1});
  branches.push_back(nn::resize(nn::relu(m.aspp_pool(pooled)), deep.dim(1), deep.dim(2)));
  const Tensor aspp = nn::relu(m.aspp_project(nn::concat_channels(branches)));
  const Tensor up = nn::resize(aspp, shallow.dim(1), shallow.dim(2));
  const Tensor low = nn::relu(m.low_level(shallow));
  Tensor h = nn::relu(m.dec1(nn::concat_channels({up, low})));
  h = nn::relu(m.dec2(h));
  return nn::sigmoid(nn::resize(m.seg_head(h), rows, cols));
}

Tensor WalNet::classification_head(const std::vector<Tensor>& roi_features) const {
  if (roi_features.empty()) throw InternalError("classification_head: no features");
  if (roi_features.size() > impl_->heads.size()) {
    throw InternalError("classification_head: more depths than heads");
  }
  std::vector<Tensor> logits;
  for (std::size_t d = 0; d < roi_features.size(); ++d) {
    logits.push_back(impl_->heads[d](nn::global_avg_pool(roi_features[d])));
  }
  return nn::mean_of(logits);
}

ModelOutput WalNet::forward(const imaging::RasterImage& img, const ForwardOptions& options) const {
  const Tensor input = input_tensor(img);
  ModelOutput out;
  out.input_rows = img.rows();
  out.input_cols = img.cols();
  out.features = encoder_forward(input);
  const auto& f = out.features;

  std::vector<rcm::DepthFeature> depths;
  for (int level = 0; level < 3; ++level) depths.push_back({f.attended[level], kStageStrides[level]});
  depths.push_back({f.raw[3], kStageStrides[3]});

  std::vector<Tensor> cls_features;
  if (config_.use_segmentation) {
    out.seg_prob = decoder_forward(f, img.rows(), img.cols());
    // The RCM reads the prediction by value: no gradient flows through the box or masks.
    auto roi = rcm::apply_roi_strategy(depths, nn::to_map(out.seg_prob), config_.roi, options.forced_box);
    out.roi_box = roi.box;
    out.roi_fallback = roi.fallback;
    cls_features = std::move(roi.features);
  } else {
    for (const auto& d : depths) cls_features.push_back(d.tensor);
  }
  out.class_logits = classification_head(cls_features);
  return out;
}

pgm::AttentionSet ModelOutput::attention_set() const {
  pgm::AttentionSet set;
  if (!features.alpha[0].defined()) throw InternalError("attention_set: attention disabled");
  set.a1 = nn::to_map(features.alpha[0]);
  set.a2 = nn::to_map(features.alpha[1]);
  set.a3 = nn::to_map(features.alpha[2]);
  set.source_rows = input_rows;
  set.source_cols = input_cols;
  return set;
}

imaging::ScalarMap ModelOutput::seg_map() const { return nn::to_map(seg_prob); }

std::vector<double> ModelOutput::logits() const {
  return {class_logits.values().begin(), class_logits.values().end()};
}

}  // namespace walnet::model
