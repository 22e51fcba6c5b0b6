#include "sense/training.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "sense/error.hpp"
#include "sense/kernels.hpp"
#include "sense/rng.hpp"
#include "sense/textio.hpp"

namespace sense {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_encoder >= 0.0) || !(lr_pool >= 0.0)) throw ConfigError("learning rates must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
    throw ConfigError("beta1 and beta2 must lie in (0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

TrainConfig TrainConfig::from_kv(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  for (const auto& [k, v] : kv) {
    try {
      if (k == "epochs") c.epochs = static_cast<int>(parse_int(v, k));
      else if (k == "batch_size") c.batch_size = static_cast<int>(parse_int(v, k));
      else if (k == "lr_encoder") c.lr_encoder = parse_real(v, k);
      else if (k == "lr_pool") c.lr_pool = parse_real(v, k);
      else if (k == "beta1") c.beta1 = parse_real(v, k);
      else if (k == "beta2") c.beta2 = parse_real(v, k);
      else if (k == "eps") c.eps = parse_real(v, k);
      else if (k == "seed") c.seed = static_cast<std::uint64_t>(parse_int(v, k));
      else if (k == "checkpoint_every") c.checkpoint_every = static_cast<int>(parse_int(v, k));
      else throw ConfigError("unknown training key '" + k + "'");
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  }
  c.validate();
  return c;
}

std::map<std::string, std::string> TrainConfig::to_kv() const {
  auto real = [](double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return std::string(buf);
  };
  return {{"epochs", std::to_string(epochs)},     {"batch_size", std::to_string(batch_size)},
          {"lr_encoder", real(lr_encoder)},        {"lr_pool", real(lr_pool)},
          {"beta1", real(beta1)},                  {"beta2", real(beta2)},
          {"eps", real(eps)},                      {"seed", std::to_string(seed)},
          {"checkpoint_every", std::to_string(checkpoint_every)}};
}

std::string TrainReport::to_csv() const {
  std::string s = "epoch,mean_loss,heldout_mean_cosine\n";
  for (const auto& e : epochs)
    s += std::to_string(e.epoch) + ',' + format_real(e.mean_loss) + ',' +
         (std::isnan(e.heldout_mean_cosine) ? std::string("nan") : format_real(e.heldout_mean_cosine)) + '\n';
  return s;
}

std::vector<TrainExample> load_examples(const Manifest& manifest) {
  const TeacherSpace teacher(manifest.num_concepts, manifest.d_in, manifest.d_e, manifest.seed);
  std::vector<TrainExample> out(manifest.entries.size());
  const auto n = static_cast<long>(out.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    try {
      const auto& e = manifest.entries[static_cast<std::size_t>(i)];
      auto& ex = out[static_cast<std::size_t>(i)];
      ex.utt_id = e.utt_id;
      ex.frames = load_utterance(manifest, e).frames;
      ex.teacher = teacher.embed(e.concepts).values;
    } catch (...) {
#pragma omp critical(sense_load_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);
  return out;
}

double mean_cosine(const ModelParams& params, const std::vector<TrainExample>& data, bool parallel) {
  if (data.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<Tensor> frames;
  frames.reserve(data.size());
  for (const auto& d : data) frames.push_back(d.frames);
  const auto emb = parallel ? kernels::embed_parallel(params, frames) : kernels::embed_serial(params, frames);
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) sum += cosine_similarity(emb[i], data[i].teacher);
  return sum / static_cast<double>(data.size());
}

namespace {

class Adam {
 public:
  Adam(const ModelParams& like, const TrainConfig& c) : cfg_(c), m_(ModelParams::zeros(like.dims)), v_(m_) {}

  void step(ModelParams& params, const ParamGrads& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    std::vector<Tensor*> ms, vs;
    std::vector<const Tensor*> gs;
    m_.visit([&](const char*, ParamGroup, Tensor& t) { ms.push_back(&t); });
    v_.visit([&](const char*, ParamGroup, Tensor& t) { vs.push_back(&t); });
    grads.visit([&](const char*, ParamGroup, const Tensor& t) { gs.push_back(&t); });
    std::size_t k = 0;
    params.visit([&](const char*, ParamGroup group, Tensor& p) {
      const double lr = group == ParamGroup::kEncoder ? cfg_.lr_encoder : cfg_.lr_pool;
      auto& m = *ms[k];
      auto& v = *vs[k];
      const auto& g = *gs[k];
      ++k;
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    });
  }

 private:
  TrainConfig cfg_;
  ModelParams m_, v_;
  int t_ = 0;
};

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<TrainExample>& data, ModelParams params,
                  const TrainOptions& options) {
  config.validate();
  if (data.empty()) throw ConfigError("train: empty training set");
  for (const auto& d : data)
    if (d.teacher.size() != static_cast<std::size_t>(params.dims.d_e))
      throw ShapeError("train: teacher dimension does not match model d_e for " + d.utt_id);
  if (!options.checkpoint_dir.empty() && config.checkpoint_every > 0) ensure_directory(options.checkpoint_dir);

  std::vector<kernels::LossItem> items;
  items.reserve(data.size());
  for (const auto& d : data) items.push_back({&d.frames, &d.teacher});

  const auto bs = static_cast<std::size_t>(config.batch_size);
  const std::size_t n_batches = (items.size() + bs - 1) / bs;
  std::vector<std::size_t> order(n_batches);
  std::iota(order.begin(), order.end(), std::size_t{0});

  SplitMix64 shuffle(derive_seed(config.seed, "train/shuffle"));
  Adam adam(params, config);
  TrainResult result;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = n_batches; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    for (std::size_t b : order) {
      const std::size_t lo = b * bs;
      const std::size_t hi = std::min(items.size(), lo + bs);
      const std::span<const kernels::LossItem> batch(items.data() + lo, hi - lo);
      const auto g = options.parallel ? kernels::batch_gradient_parallel(params, batch)
                                      : kernels::batch_gradient_serial(params, batch);
      if (!std::isfinite(g.mean_loss))
        throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " + std::to_string(b) +
                           " (utterances " + data[lo].utt_id + " .. " + data[hi - 1].utt_id + ")");
      for (double l : g.losses) loss_sum += l;
      adam.step(params, g.grads);
    }
    if (!params.all_finite())
      throw NumericError("non-finite parameters after epoch " + std::to_string(epoch));

    EpochStats st;
    st.epoch = epoch;
    st.mean_loss = loss_sum / static_cast<double>(items.size());
    st.heldout_mean_cosine = options.heldout ? mean_cosine(params, *options.heldout, options.parallel)
                                             : std::numeric_limits<double>::quiet_NaN();
    result.report.epochs.push_back(st);

    if (!options.checkpoint_dir.empty() && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint-epoch%04d.model", epoch);
      save_model(params, options.checkpoint_dir / name);
    }
  }
  result.params = std::move(params);
  return result;
}

TrainResult train(const TrainConfig& config, const Manifest& manifest, ModelParams params,
                  const TrainOptions& options) {
  if (manifest.entries.empty()) throw ConfigError("train: empty manifest");
  return train(config, load_examples(manifest), std::move(params), options);
}

}  // namespace sense
