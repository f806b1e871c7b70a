#include "walnet/train.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "walnet/errors.hpp"
#include "walnet/io.hpp"
#include "walnet/losses.hpp"
#include "walnet/ops.hpp"
#include "walnet/pgm.hpp"
#include "walnet/plots.hpp"

namespace walnet::train {

namespace fs = std::filesystem;
using nlohmann::json;

Adam::Adam(nn::ParameterStore& store, double lr, double beta1, double beta2, double eps)
    : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : store_.params()) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step(double grad_scale) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto& params = store_.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& tensor = params[k].tensor;
    const auto grad = tensor.grad();
    if (grad.empty()) continue;
    auto value = tensor.mutable_values();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] * grad_scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

Seeds Seeds::for_run(std::uint64_t base, int k) {
  Seeds s;
  s.split = base + static_cast<std::uint64_t>(k);
  s.init = Rng::derive(s.split, 1);
  s.order = Rng::derive(s.split, 2);
  return s;
}

namespace {

std::vector<std::vector<double>> snapshot(const nn::ParameterStore& store) {
  std::vector<std::vector<double>> out;
  for (const auto& p : store.params()) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void restore(nn::ParameterStore& store, const std::vector<std::vector<double>>& values) {
  auto& params = store.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto dst = params[k].tensor.mutable_values();
    std::copy(values[k].begin(), values[k].end(), dst.begin());
  }
}

metrics::ProbRow softmax(const std::vector<double>& z) {
  metrics::ProbRow p{};
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0;
  for (int c = 0; c < kNumClasses; ++c) sum += (p[c] = std::exp(z[c] - mx));
  for (double& v : p) v /= sum;
  return p;
}

}  // namespace

TrainResult fit(model::WalNet& net, const config::ExperimentConfig& cfg, const data::Dataset& ds,
                const data::Split& split, std::uint64_t order_seed, const TrainOptions& options) {
  const auto& tc = cfg.train;
  const bool seg = net.config().use_segmentation;
  if (split.train.empty()) throw InputError("fit: empty training split");

  // Superpixels depend only on the image, so they are computed once.
  std::vector<imaging::SuperpixelMap> superpixels(ds.samples.size());
  if (seg) {
    for (std::size_t i : split.train) {
      superpixels[i] = imaging::felzenszwalb_segment(ds.samples[i].image, cfg.pgm.superpixel);
    }
  }

  Adam adam(net.parameters(), tc.learning_rate, tc.beta1, tc.beta2, tc.adam_eps);
  TrainResult result;
  std::vector<std::vector<double>> best = snapshot(net.parameters());
  std::vector<std::size_t> order = split.train;
  int since_best = 0;
  int step = 0;

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    Rng rng(Rng::derive(order_seed, static_cast<std::uint64_t>(epoch)));
    order = split.train;
    rng.shuffle(order.begin(), order.end());
    double sum_seg = 0, sum_cls = 0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      const double inv_b = 1.0 / static_cast<double>(end - start);
      net.parameters().zero_grad();
      double batch_seg = 0, batch_cls = 0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& sample = ds.samples[order[k]];
        const auto out = net.forward(sample.image);
        nn::Tensor loss = losses::classification_loss(out.class_logits, sample.label);
        batch_cls += loss.item();
        if (seg) {
          const auto target = pgm::generate_pseudo_mask(superpixels[order[k]], out.attention_set(), cfg.pgm);
          const nn::Tensor seg_loss = losses::segmentation_loss(out.seg_prob, target.mask);
          batch_seg += seg_loss.item();
          loss = nn::add(seg_loss, loss);
        }
        loss.backward();
      }
      ++step;
      StepRecord rec;
      rec.epoch = epoch;
      rec.step = step;
      rec.batch_id = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batches + 1);
      const auto bundle = losses::total_loss(batch_seg * inv_b, batch_cls * inv_b, rec.batch_id);
      rec.seg = bundle.seg;
      rec.cls = bundle.cls;
      rec.total = bundle.total;
      result.steps.push_back(rec);
      adam.step(inv_b);
      sum_seg += bundle.seg;
      sum_cls += bundle.cls;
      ++batches;
    }
    net.parameters().zero_grad();

    EpochRecord er;
    er.epoch = epoch;
    er.train_seg = sum_seg / batches;
    er.train_cls = sum_cls / batches;
    er.train_total = er.train_seg + er.train_cls;
    if (!split.val.empty()) {
      const auto val = evaluate(net, ds, split.val);
      er.val_accuracy = val.report.accuracy;
      er.val_dice = val.report.dice;
    }
    if (er.val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = er.val_accuracy;
      result.best_epoch = epoch;
      best = snapshot(net.parameters());
      er.best = true;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.epochs.push_back(er);
    if (options.on_epoch) options.on_epoch(er);
    if (tc.patience > 0 && since_best >= tc.patience) break;
  }
  restore(net.parameters(), best);
  return result;
}

Evaluation evaluate(const model::WalNet& net, const data::Dataset& ds,
                    std::span<const std::size_t> indices) {
  if (indices.empty()) throw InputError("evaluate: no samples");
  nn::NoGradGuard no_grad;
  Evaluation ev;
  std::vector<int> truth, predicted;
  std::vector<metrics::ProbRow> scores;
  double dice_sum = 0;
  int dice_count = 0;
  const double threshold = net.config().roi.threshold;
  for (std::size_t i : indices) {
    const auto& s = ds.samples.at(i);
    const auto out = net.forward(s.image);
    Prediction p;
    p.index = i;
    p.label = s.label;
    p.probs = softmax(out.logits());
    p.predicted = static_cast<int>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
    p.box = out.roi_box;
    p.fallback = out.roi_fallback;
    if (out.seg_prob.defined() && s.gt_mask) {
      p.dice = imaging::dice(imaging::binarize(out.seg_map(), threshold), *s.gt_mask);
      dice_sum += *p.dice;
      ++dice_count;
    }
    truth.push_back(p.label);
    predicted.push_back(p.predicted);
    scores.push_back(p.probs);
    ev.predictions.push_back(p);
  }
  ev.report = metrics::compute_metrics(metrics::ConfusionMatrix::from_predictions(truth, predicted),
                                       scores, truth);
  if (dice_count > 0) ev.report.dice = dice_sum / dice_count;
  return ev;
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_roc(const fs::path& dir, const std::string& name, std::span<const double> scores,
               std::span<const std::uint8_t> positive) {
  const auto curve = metrics::roc_curve(scores, positive);
  std::ostringstream csv;
  csv << "threshold,fpr,tpr\n";
  for (const auto& p : curve) {
    csv << (std::isinf(p.threshold) ? std::string("inf") : fmt_double(p.threshold)) << ','
        << fmt_double(p.fpr) << ',' << fmt_double(p.tpr) << '\n';
  }
  io::write_text(dir / ("roc_" + name + ".csv"), csv.str());
  plots::roc_png(dir / ("roc_" + name + ".png"), curve, "ROC " + name, metrics::auc(curve));
}

}  // namespace

void write_evaluation(const fs::path& dir, const Evaluation& ev, const data::Dataset& ds) {
  fs::create_directories(dir);
  io::write_text(dir / "metrics.json", ev.report.to_json().dump(2) + "\n");

  std::ostringstream cm;
  cm << "true\\predicted";
  for (const char* n : kClassNames) cm << ',' << n;
  cm << '\n';
  for (int i = 0; i < kNumClasses; ++i) {
    cm << kClassNames[i];
    for (int j = 0; j < kNumClasses; ++j) cm << ',' << ev.report.confusion.counts[i][j];
    cm << '\n';
  }
  io::write_text(dir / "confusion.csv", cm.str());
  plots::confusion_png(dir / "confusion.png", ev.report.confusion);

  std::vector<double> flat;
  std::vector<std::uint8_t> flat_pos;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> s;
    std::vector<std::uint8_t> pos;
    for (const auto& p : ev.predictions) {
      s.push_back(p.probs[c]);
      pos.push_back(p.label == c);
    }
    flat.insert(flat.end(), s.begin(), s.end());
    flat_pos.insert(flat_pos.end(), pos.begin(), pos.end());
    write_roc(dir, kClassNames[c], s, pos);
  }
  write_roc(dir, "micro", flat, flat_pos);

  std::ostringstream boxes;
  boxes << "id,label,predicted,row0,col0,row1,col1,fallback,dice\n";
  for (const auto& p : ev.predictions) {
    boxes << ds.samples[p.index].id << ',' << kClassNames[p.label] << ',' << kClassNames[p.predicted];
    if (p.box) {
      boxes << ',' << p.box->row0 << ',' << p.box->col0 << ',' << p.box->row1 << ',' << p.box->col1;
    } else {
      boxes << ",,,,";
    }
    boxes << ',' << (p.fallback ? 1 : 0) << ',' << (p.dice ? fmt_double(*p.dice) : "") << '\n';
  }
  io::write_text(dir / "boxes.csv", boxes.str());
}

namespace {

constexpr char kMagic[8] = {'W', 'A', 'L', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void put(std::string& buf, T v) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  buf.append(bytes, sizeof(T));
}

class Cursor {
 public:
  Cursor(const std::string& data, std::string source) : data_(data), source_(std::move(source)) {}

  template <class T>
  T take() {
    if (pos_ + sizeof(T) > data_.size()) throw InputError("checkpoint " + source_ + " is truncated");
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string take_bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw InputError("checkpoint " + source_ + " is truncated");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::string source_;
  std::size_t pos_ = 0;
};

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string save_checkpoint(const fs::path& path, const nn::ParameterStore& store) {
  std::string buf(kMagic, sizeof kMagic);
  put<std::uint32_t>(buf, kFormatVersion);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(store.params().size()));
  for (const auto& p : store.params()) {
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
    buf += p.name;
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.tensor.rank()));
    for (int d : p.tensor.dims()) put<std::int32_t>(buf, d);
    for (double v : p.tensor.values()) put<double>(buf, v);
  }
  io::write_text(path, buf);
  return hex64(nn::fnv1a(buf.data(), buf.size()));
}

void load_checkpoint(const fs::path& path, nn::ParameterStore& store) {
  const std::string data = io::read_text(path);
  Cursor in(data, path.string());
  if (in.take_bytes(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) {
    throw InputError("checkpoint " + path.string() + ": bad magic");
  }
  if (in.take<std::uint32_t>() != kFormatVersion) {
    throw InputError("checkpoint " + path.string() + ": unsupported format version");
  }
  const auto count = in.take<std::uint32_t>();
  auto& params = store.params();
  if (count != params.size()) {
    throw ConfigError("checkpoint has " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(params.size()));
  }
  for (auto& p : params) {
    const std::string name = in.take_bytes(in.take<std::uint32_t>());
    if (name != p.name) throw ConfigError("checkpoint tensor '" + name + "' where model expects '" + p.name + "'");
    const auto rank = in.take<std::uint32_t>();
    std::vector<int> dims(rank);
    for (auto& d : dims) d = in.take<std::int32_t>();
    if (dims != p.tensor.dims()) {
      throw ConfigError("checkpoint tensor '" + name + "' has shape " + nn::shape_string(dims) +
                        ", model expects " + nn::shape_string(p.tensor.dims()));
    }
    for (double& v : p.tensor.mutable_values()) v = in.take<double>();
  }
  if (!in.done()) throw InputError("checkpoint " + path.string() + ": trailing bytes");
}

std::string file_hash(const fs::path& path) {
  const std::string data = io::read_text(path);
  return hex64(nn::fnv1a(data.data(), data.size()));
}

json checkpoint_sidecar(const model::WalNet& net, std::uint64_t seed, const std::string& checkpoint_hash) {
  return {{"schema_version", config::kSchemaVersion},
          {"model", config::model_to_json(net.config())},
          {"init_seed", seed},
          {"architecture_hash", hex64(net.parameters().architecture_hash())},
          {"checkpoint_fnv1a", checkpoint_hash}};
}

model::WalNet load_model(const fs::path& checkpoint, const fs::path& sidecar) {
  json side;
  try {
    side = json::parse(io::read_text(sidecar));
  } catch (const json::parse_error& e) {
    throw ConfigError("sidecar " + sidecar.string() + ": " + e.what());
  }
  if (!side.contains("model")) throw ConfigError("sidecar " + sidecar.string() + " lacks 'model'");
  model::WalNet net(config::model_from_json(side["model"]), 0);
  if (side.contains("architecture_hash") &&
      side["architecture_hash"] != hex64(net.parameters().architecture_hash())) {
    throw ConfigError("sidecar architecture hash does not match its model config");
  }
  load_checkpoint(checkpoint, net.parameters());
  return net;
}

void write_history(const fs::path& path, const TrainResult& result) {
  std::ostringstream out;
  for (const auto& s : result.steps) {
    out << json{{"type", "step"}, {"epoch", s.epoch}, {"step", s.step}, {"batch", s.batch_id},
                {"seg_loss", s.seg}, {"cls_loss", s.cls}, {"total_loss", s.total}}
               .dump()
        << '\n';
  }
  for (const auto& e : result.epochs) {
    out << json{{"type", "epoch"},
                {"epoch", e.epoch},
                {"train_seg_loss", e.train_seg},
                {"train_cls_loss", e.train_cls},
                {"train_total_loss", e.train_total},
                {"val_accuracy", e.val_accuracy},
                {"val_dice", e.val_dice ? json(*e.val_dice) : json()},
                {"best", e.best}}
               .dump()
        << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace walnet::train
