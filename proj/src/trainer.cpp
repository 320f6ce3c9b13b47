#include "patcnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "patcnn/config.hpp"
#include "patcnn/seed.hpp"

namespace patcnn {
namespace {

std::size_t mirror(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long r = i % period;
  if (r < 0) r += period;
  return static_cast<std::size_t>(r < static_cast<long>(n) ? r : period - r);
}

struct PreparedCase {
  const TrainingCase* source;
  ImageVolume image;  // normalised
};

// Writes one padded sample into slot n of a (batch, 1, dims) tensor.
void place(nn::Tensor<float>& x, std::size_t n, const ImageVolume& padded) {
  const auto src = padded.data();
  std::copy(src.begin(), src.end(), x.sample(n));
}

class Adam {
 public:
  explicit Adam(ResUNet<float>& model, double lr) : lr_(lr) {
    model.visit_params([&](nn::Param<float>& p) {
      m_.emplace_back(p.value.size(), 0.0f);
      v_.emplace_back(p.value.size(), 0.0f);
    });
  }

  void step(ResUNet<float>& model) {
    ++t_;
    const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(t_));
    std::size_t k = 0;
    model.visit_params([&](nn::Param<float>& p) {
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        const double mi = kAdamBeta1 * m[i] + (1 - kAdamBeta1) * g;
        const double vi = kAdamBeta2 * v[i] + (1 - kAdamBeta2) * g * g;
        m[i] = static_cast<float>(mi);
        v[i] = static_cast<float>(vi);
        p.value[i] = static_cast<float>(p.value[i] - lr_ * (mi / c1) / (std::sqrt(vi / c2) + kAdamEps));
      }
      ++k;
    });
  }

 private:
  double lr_;
  std::size_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

// Evaluation-mode probabilities for a normalised volume, cropped back.
ImageVolume eval_probabilities(ResUNet<float>& model, const ImageVolume& normalized) {
  const PadPlan plan = plan_padding(normalized.dims(), ModelConfig::kInputMultiple);
  const ImageVolume padded = reflect_pad(normalized, plan);
  nn::Tensor<float> x(1, 1, plan.padded);
  place(x, 0, padded);
  const nn::Tensor<float> y = model.forward(x, false);
  ImageVolume prob(plan.padded, normalized.spacing(), std::vector<float>(y.values()));
  ImageVolume out = crop_padding(prob, normalized.dims(), plan);
  out.set_orientation(normalized.orientation());
  return out;
}

double case_loss(ResUNet<float>& model, const ImageVolume& normalized, const LabelMask& mask, const LossConfig& cfg) {
  const ImageVolume prob = eval_probabilities(model, normalized);
  return combined_loss<float, std::uint8_t>(prob.data(), mask.data(), cfg).total;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw DomainError("TrainConfig: batch_size must be >= 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate))
    throw DomainError("TrainConfig: learning_rate must be positive");
  if (epochs < 1) throw DomainError("TrainConfig: epochs must be >= 1");
  if (!(validation_fraction >= 0 && validation_fraction < 1))
    throw DomainError("TrainConfig: validation_fraction must lie in [0, 1)");
  if (!(test_fraction > 0 && test_fraction < 1)) throw DomainError("TrainConfig: test_fraction must lie in (0, 1)");
  if (!(output_prior >= 0 && output_prior < 1)) throw DomainError("TrainConfig: output_prior must lie in [0, 1)");
  if (!(loss.epsilon > 0)) throw DomainError("TrainConfig: loss epsilon must be positive");
  augment.validate();
  model.validate();
}

DatasetSplit split_dataset(const std::vector<std::string>& case_ids, double test_fraction, std::uint64_t seed) {
  if (case_ids.size() < 2) throw DomainError("split_dataset: need at least 2 cases");
  if (!(test_fraction > 0 && test_fraction < 1)) throw DomainError("split_dataset: test_fraction must lie in (0, 1)");
  if (std::set<std::string>(case_ids.begin(), case_ids.end()).size() != case_ids.size())
    throw DomainError("split_dataset: duplicate case ids");
  std::vector<std::string> ids = case_ids;
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto n = ids.size();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n))), 1, n - 1);
  DatasetSplit s;
  s.test.assign(ids.begin(), ids.begin() + static_cast<long>(k));
  s.train_val.assign(ids.begin() + static_cast<long>(k), ids.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train_val.begin(), s.train_val.end());
  return s;
}

ImageVolume normalize_minmax(const ImageVolume& v) {
  ImageVolume out = v;
  const auto d = v.data();
  const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
  const double a = *lo, range = static_cast<double>(*hi) - a;
  for (auto& x : out.data()) x = range > 0 ? static_cast<float>((x - a) / range) : 0.0f;
  return out;
}

PadPlan plan_padding(const Dims& d, std::size_t multiple) {
  auto up = [&](std::size_t n) { return (n + multiple - 1) / multiple * multiple; };
  PadPlan p;
  p.padded = {up(d.nx), up(d.ny), up(d.nz)};
  p.before = {(p.padded.nx - d.nx) / 2, (p.padded.ny - d.ny) / 2, (p.padded.nz - d.nz) / 2};
  return p;
}

template <typename T>
Grid3<T> reflect_pad(const Grid3<T>& g, const PadPlan& plan) {
  const Dims& d = g.dims();
  Grid3<T> out(plan.padded, g.spacing());
  out.set_orientation(g.orientation());
  for (std::size_t z = 0; z < plan.padded.nz; ++z) {
    const auto sz = mirror(static_cast<long>(z) - static_cast<long>(plan.before.z), d.nz);
    for (std::size_t y = 0; y < plan.padded.ny; ++y) {
      const auto sy = mirror(static_cast<long>(y) - static_cast<long>(plan.before.y), d.ny);
      for (std::size_t x = 0; x < plan.padded.nx; ++x)
        out(x, y, z) = g(mirror(static_cast<long>(x) - static_cast<long>(plan.before.x), d.nx), sy, sz);
    }
  }
  return out;
}

template <typename T>
Grid3<T> crop_padding(const Grid3<T>& g, const Dims& original, const PadPlan& plan) {
  Grid3<T> out(original, g.spacing());
  out.set_orientation(g.orientation());
  for (std::size_t z = 0; z < original.nz; ++z)
    for (std::size_t y = 0; y < original.ny; ++y)
      for (std::size_t x = 0; x < original.nx; ++x)
        out(x, y, z) = g(x + plan.before.x, y + plan.before.y, z + plan.before.z);
  return out;
}

template ImageVolume reflect_pad(const ImageVolume&, const PadPlan&);
template LabelMask reflect_pad(const LabelMask&, const PadPlan&);
template ImageVolume crop_padding(const ImageVolume&, const Dims&, const PadPlan&);
template LabelMask crop_padding(const LabelMask&, const Dims&, const PadPlan&);

double evaluate_loss(ResUNet<float>& model, const std::vector<TrainingCase>& cases, const LossConfig& loss) {
  if (cases.empty()) throw DomainError("evaluate_loss: no cases");
  double total = 0;
  for (const auto& c : cases) total += case_loss(model, normalize_minmax(c.image), c.mask, loss);
  return total / static_cast<double>(cases.size());
}

Checkpoint train(const std::vector<TrainingCase>& cases, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (cases.empty()) throw DomainError("train: no training cases");
  std::vector<PreparedCase> prepared;
  for (const auto& c : cases) {
    require_aligned(c.image, c.mask, "train");
    prepared.push_back({&c, normalize_minmax(c.image)});
  }

  // Hold out validation cases.
  const std::size_t n = cases.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  {
    std::mt19937_64 rng(derive_seed(cfg.seed, {1}));
    std::shuffle(order.begin(), order.end(), rng);
  }
  const std::size_t n_val = std::min<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n))), n - 1);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> tr(order.begin() + static_cast<long>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  const bool val_on_train = val.empty();
  if (val_on_train) val = tr;

  ResUNet<float> model(cfg.model, derive_seed(cfg.seed, {2}));
  if (cfg.output_prior > 0) model.set_output_prior(cfg.output_prior);
  Adam adam(model, cfg.learning_rate);

  Checkpoint ckpt;
  ckpt.model = cfg.model;
  auto& meta = ckpt.meta;
  meta.seed = cfg.seed;
  meta.validated_on_training = val_on_train;
  for (auto i : tr) meta.train_ids.push_back(cases[i].id);
  if (!val_on_train)
    for (auto i : val) meta.val_ids.push_back(cases[i].id);
  write_section(meta.train_config, cfg);

  double best = INFINITY;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> perm = tr;
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, {3, epoch}));
    std::shuffle(perm.begin(), perm.end(), shuffle_rng);

    double epoch_loss = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < perm.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t b = std::min(cfg.batch_size, perm.size() - start);
      std::vector<std::pair<ImageVolume, LabelMask>> samples;
      Dims common{0, 0, 0};
      for (std::size_t k = 0; k < b; ++k) {
        const std::size_t idx = perm[start + k];
        std::mt19937_64 aug_rng(derive_seed(cfg.seed, {4, cfg.augment.seed, epoch, idx}));
        samples.push_back(augment_pair(prepared[idx].image, prepared[idx].source->mask, cfg.augment, aug_rng));
        const Dims& d = samples.back().first.dims();
        common = {std::max(common.nx, d.nx), std::max(common.ny, d.ny), std::max(common.nz, d.nz)};
      }
      const Dims padded = plan_padding(common, ModelConfig::kInputMultiple).padded;

      nn::Tensor<float> x(b, 1, padded);
      std::vector<LabelMask> targets;
      for (std::size_t k = 0; k < b; ++k) {
        const Dims& d = samples[k].first.dims();
        const PadPlan plan{padded, {(padded.nx - d.nx) / 2, (padded.ny - d.ny) / 2, (padded.nz - d.nz) / 2}};
        place(x, k, reflect_pad(samples[k].first, plan));
        targets.push_back(reflect_pad(samples[k].second, plan));
      }

      const nn::Tensor<float> prob = model.forward(x, true);
      nn::Tensor<float> grad(b, 1, padded);
      const std::size_t s = padded.count();
      double batch_loss = 0;
      for (std::size_t k = 0; k < b; ++k) {
        const std::span<const float> p(prob.sample(k), s);
        const std::span<float> g(grad.sample(k), s);
        const double l = combined_loss<float, std::uint8_t>(p, targets[k].data(), cfg.loss, g).total;
        if (!std::isfinite(l))
          throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                      std::to_string(batch_index + 1) + " (case " + prepared[perm[start + k]].source->id + ")");
        batch_loss += l;
        for (auto& v : g) v /= static_cast<float>(b);
      }
      epoch_loss += batch_loss;
      model.zero_grad();
      model.backward(grad);
      adam.step(model);
    }
    epoch_loss /= static_cast<double>(perm.size());

    double val_loss = 0;
    for (auto i : val) val_loss += case_loss(model, prepared[i].image, prepared[i].source->mask, cfg.loss);
    val_loss /= static_cast<double>(val.size());
    if (!std::isfinite(val_loss))
      throw Error("train: non-finite validation loss at epoch " + std::to_string(epoch));

    meta.train_losses.push_back(epoch_loss);
    meta.val_losses.push_back(val_loss);
    meta.epochs_run = epoch;
    const bool improved = val_loss < best;
    if (improved) {
      best = val_loss;
      meta.best_epoch = epoch;
      meta.best_val_loss = val_loss;
      ckpt.weights = export_weights(model);
    }
    if (on_epoch) on_epoch({epoch, epoch_loss, val_loss, improved});
  }
  return ckpt;
}

Predictor::Predictor(const Checkpoint& ckpt) : model_(build_model(ckpt)) {}

ImageVolume Predictor::probabilities(const ImageVolume& volume) {
  ImageVolume p = eval_probabilities(model_, normalize_minmax(volume));
  p.set_orientation(volume.orientation());
  return p;
}

LabelMask Predictor::predict(const ImageVolume& volume) {
  const ImageVolume p = probabilities(volume);
  LabelMask out(volume.dims(), volume.spacing());
  out.set_orientation(volume.orientation());
  for (std::size_t i = 0; i < p.data().size(); ++i) out[i] = p[i] >= kForegroundThreshold ? 1 : 0;
  return out;
}

LabelMask predict(const Checkpoint& ckpt, const ImageVolume& volume) { return Predictor(ckpt).predict(volume); }

}  // namespace patcnn
