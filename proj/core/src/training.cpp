#include "chisep/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "chisep/errors.hpp"
#include "chisep/random.hpp"

namespace chisep {

Precision parse_precision(const std::string& s) {
  if (s == "float") return Precision::kFloat;
  if (s == "double") return Precision::kDouble;
  throw InvalidArgument("precision must be 'float' or 'double', got '" + s + "'");
}

const char* to_string(Precision p) { return p == Precision::kFloat ? "float" : "double"; }

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1, got " + std::to_string(epochs));
  if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1, got " + std::to_string(batch_size));
  if (lr_values.empty()) throw InvalidArgument("lr_values must not be empty");
  for (double v : lr_values)
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("learning rates must be finite and > 0");
  if (!lr_breakpoints.empty()) {
    if (lr_breakpoints.size() + 1 != lr_values.size()) {
      throw InvalidArgument("lr_breakpoints needs exactly one entry fewer than lr_values");
    }
    int prev = 0;
    for (int b : lr_breakpoints) {
      if (b < prev || b > epochs) throw InvalidArgument("lr_breakpoints must be non-decreasing within [0, epochs]");
      prev = b;
    }
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw InvalidArgument("val_fraction must lie in (0, 1)");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0)) {
    throw InvalidArgument("Adam hyperparameters out of range");
  }
  loss.weights.validate();
}

std::vector<int> TrainConfig::breakpoints() const {
  if (!lr_breakpoints.empty()) return lr_breakpoints;
  std::vector<int> out;
  const std::size_t phases = lr_values.size();
  if (phases == 3) {
    // 30% / 30% / 40% of the run.
    out.push_back(std::max(1, static_cast<int>(std::lround(0.3 * epochs))));
    out.push_back(std::max(out.back(), static_cast<int>(std::lround(0.6 * epochs))));
  } else {
    for (std::size_t p = 1; p < phases; ++p) {
      out.push_back(static_cast<int>(std::lround(static_cast<double>(p) * epochs / static_cast<double>(phases))));
    }
  }
  return out;
}

LossWeights TrainConfig::effective_weights() const {
  LossWeights w = loss.weights;
  if (!contrastive_enabled) w.alpha = 0.0;
  return w;
}

double lr_schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw InvalidArgument("lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(cfg.epochs) + ")");
  }
  const auto bp = cfg.breakpoints();
  std::size_t phase = 0;
  while (phase < bp.size() && epoch >= bp[phase]) ++phase;
  return cfg.lr_values[phase];
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"lr_values", lr_values},
          {"lr_breakpoints", breakpoints()},
          {"batch_size", batch_size},
          {"seed", seed},
          {"weights", loss.weights.to_json()},
          {"model_norm", to_string(loss.model_norm)},
          {"gradient_norm", to_string(loss.gradient_norm)},
          {"loss_mask", loss.use_mask},
          {"contrastive_enabled", contrastive_enabled},
          {"precision", to_string(precision)},
          {"val_fraction", val_fraction},
          {"adam", {{"beta1", adam_beta1}, {"beta2", adam_beta2}, {"eps", adam_eps}}},
          {"keep_epoch_checkpoints", keep_epoch_checkpoints}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "epochs") c.epochs = value.get<int>();
    else if (key == "lr_values") c.lr_values = value.get<std::vector<double>>();
    else if (key == "lr_breakpoints") c.lr_breakpoints = value.get<std::vector<int>>();
    else if (key == "batch_size") c.batch_size = value.get<int>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "weights") c.loss.weights = LossWeights::from_json(value);
    else if (key == "model_norm") c.loss.model_norm = parse_norm(value.get<std::string>());
    else if (key == "gradient_norm") c.loss.gradient_norm = parse_norm(value.get<std::string>());
    else if (key == "loss_mask") c.loss.use_mask = value.get<bool>();
    else if (key == "contrastive_enabled") c.contrastive_enabled = value.get<bool>();
    else if (key == "precision") c.precision = parse_precision(value.get<std::string>());
    else if (key == "val_fraction") c.val_fraction = value.get<double>();
    else if (key == "keep_epoch_checkpoints") c.keep_epoch_checkpoints = value.get<bool>();
    else if (key == "adam") {
      for (const auto& [k, v] : value.items()) {
        if (k == "beta1") c.adam_beta1 = v.get<double>();
        else if (k == "beta2") c.adam_beta2 = v.get<double>();
        else if (k == "eps") c.adam_eps = v.get<double>();
        else throw InvalidArgument("unknown train.adam key '" + k + "'");
      }
    } else {
      throw InvalidArgument("unknown train key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

nlohmann::json TrainHistory::to_json() const {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& r : epochs) {
    e.push_back({{"epoch", r.epoch}, {"lr", r.lr}, {"train", r.train.to_json()}, {"val", r.val.to_json()}});
  }
  return {{"epochs", e}, {"train_indices", train_indices}, {"val_indices", val_indices}};
}

TrainHistory TrainHistory::from_json(const nlohmann::json& j) {
  TrainHistory h;
  for (const auto& r : j.at("epochs")) {
    h.epochs.push_back({r.at("epoch").get<int>(), r.at("lr").get<double>(), LossBreakdown::from_json(r.at("train")),
                        LossBreakdown::from_json(r.at("val"))});
  }
  h.train_indices = j.at("train_indices").get<std::vector<std::size_t>>();
  h.val_indices = j.at("val_indices").get<std::vector<std::size_t>>();
  return h;
}

void split_indices(std::size_t n, double val_fraction, std::uint64_t seed, std::vector<std::size_t>& train,
                   std::vector<std::size_t>& val) {
  if (n < 2) throw InvalidArgument("need at least 2 samples to hold one out for validation, got " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(mix_seed(seed, 0x5711));
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_val = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(val_fraction * n)), 1, n - 1);
  val.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
}

PhysicalTarget physical_target(const TrainingSample& s, const NormStats& norm) {
  return PhysicalTarget{s.label_pos, s.label_neg, sample_acquisition(s, norm)};
}

template <typename T>
Adam<T>::Adam(std::vector<Param<T>*> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), b1_(beta1), b2_(beta2), eps_(eps) {
  for (Param<T>* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

template <typename T>
void Adam<T>::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Param<T>& p = *params_[k];
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      m[i] = b1_ * m[i] + (1.0 - b1_) * g;
      v[i] = b2_ * v[i] + (1.0 - b2_) * g * g;
      p.value[i] = static_cast<T>(p.value[i] - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

namespace {

struct LoadedSample {
  std::array<Volume3D, 3> inputs;
  PhysicalTarget target;
};

template <typename T>
Tensor<T> batch_input(const std::vector<LoadedSample>& data, std::span<const std::size_t> idx) {
  const Dims d = data[idx[0]].inputs[0].dims();
  Tensor<T> x({static_cast<int>(idx.size()), d.nx, d.ny, d.nz, 3});
  const std::size_t vox = d.count();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    T* dst = x.sample(static_cast<int>(b));
    const auto& in = data[idx[b]].inputs;
    for (std::size_t v = 0; v < vox; ++v)
      for (int c = 0; c < 3; ++c) dst[3 * v + c] = static_cast<T>(in[c][v]);
  }
  return x;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot open for writing", tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed", tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
TrainResult train_impl(const DatasetManifest& manifest, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                       const std::filesystem::path& out_dir, const EpochCallback& on_epoch) {
  net_cfg.validate();
  cfg.validate();
  if (!out_dir.empty() && !std::filesystem::is_directory(out_dir)) {
    throw IoError("output directory does not exist", out_dir.string());
  }
  if (!(manifest.window == net_cfg.patch)) {
    throw InvalidArgument("dataset window " + to_string(manifest.window) + " differs from network patch " +
                          to_string(net_cfg.patch));
  }

  TrainResult result;
  TrainHistory& hist = result.history;
  split_indices(manifest.samples.size(), cfg.val_fraction, cfg.seed, hist.train_indices, hist.val_indices);

  std::vector<LoadedSample> data;
  data.reserve(manifest.samples.size());
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    TrainingSample s = load_sample(manifest, i);
    PhysicalTarget t = physical_target(s, manifest.norm);
    data.push_back({std::move(s.inputs), std::move(t)});
  }

  DualBranchNet<T> net(net_cfg);
  net.init(mix_seed(cfg.seed, 0x1417));
  Adam<T> adam(net.params(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
  const DipoleKernel kernel = dipole_kernel(net_cfg.patch, manifest.config.voxel);
  LossOptions opts = cfg.loss;
  opts.weights = cfg.effective_weights();

  nlohmann::json meta = {{"train", cfg.to_json()}, {"dataset_seed", manifest.seed}};
  auto save = [&](int epoch) {
    meta["epoch"] = epoch;
    result.checkpoint = make_checkpoint(net, manifest.norm, meta);
    if (out_dir.empty()) return;
    write_checkpoint(result.checkpoint, out_dir / "checkpoint.ckpt");
    if (cfg.keep_epoch_checkpoints) {
      char name[32];
      std::snprintf(name, sizeof(name), "checkpoint_epoch%03d.ckpt", epoch);
      write_checkpoint(result.checkpoint, out_dir / name);
    }
    write_json(out_dir / "history.json", hist.to_json());
  };

  auto run_batches = [&](std::span<const std::size_t> order, bool training, int epoch) {
    LossBreakdown sum;
    std::size_t seen = 0;
    const PassMode mode{training, true, training};
    for (std::size_t start = 0, step = 0; start < order.size(); start += cfg.batch_size, ++step) {
      const std::size_t len = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      const auto idx = order.subspan(start, len);
      const Tensor<T> x = batch_input<T>(data, idx);
      std::vector<const PhysicalTarget*> targets;
      for (std::size_t k : idx) targets.push_back(&data[k].target);
      const ForwardArtifacts<T> art = net.forward(x, mode);
      ArtifactGrads<T> grads;
      LossBreakdown lb = composite_loss<T>(art, targets, kernel, opts, training ? &grads : nullptr);
      if (!lb.all_finite()) {
        throw NumericError(std::string("non-finite ") + (training ? "training" : "validation") + " loss at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(step));
      }
      if (training) {
        net.zero_grad();
        net.backward(grads);
        adam.step(lr_schedule(epoch, cfg));
      }
      lb.contrast *= static_cast<double>(len);
      lb.l2 *= static_cast<double>(len);
      lb.model *= static_cast<double>(len);
      lb.gradient *= static_cast<double>(len);
      lb.total *= static_cast<double>(len);
      sum += lb;
      seen += len;
    }
    sum /= static_cast<double>(seen);
    return sum;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = hist.train_indices;
    Rng rng(mix_seed(cfg.seed, 0x10000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr_schedule(epoch, cfg);
    rec.train = run_batches(order, true, epoch);
    rec.val = run_batches(hist.val_indices, false, epoch);
    hist.epochs.push_back(rec);
    save(epoch);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

}  // namespace

TrainResult train(const DatasetManifest& manifest, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const std::filesystem::path& out_dir, const EpochCallback& on_epoch) {
  if (cfg.precision == Precision::kDouble) return train_impl<double>(manifest, net_cfg, cfg, out_dir, on_epoch);
  return train_impl<float>(manifest, net_cfg, cfg, out_dir, on_epoch);
}

}  // namespace chisep
