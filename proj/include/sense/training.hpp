#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sense/corpus.hpp"
#include "sense/loss.hpp"
#include "sense/model.hpp"

namespace sense {

struct TrainConfig {
  int epochs = 20;
  int batch_size = 2;
  double lr_encoder = 1e-3;  // W1, b1, W2, b2
  double lr_pool = 1e-2;     // Wa, ba, v, P, bp
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 1;
  int checkpoint_every = 0;  // 0 disables checkpoints

  void validate() const;

  /// key=value lines with exactly the field names above.
  static TrainConfig from_kv(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_kv() const;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double heldout_mean_cosine = 0.0;  // NaN when no held-out set was given

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::string final_params_path;

  std::string to_csv() const;
};

/// In-memory utterance with its frozen teacher target.
struct TrainExample {
  std::string utt_id;
  Tensor frames;
  Vector teacher;
};

/// Loads frames for every entry and computes its teacher embedding.
std::vector<TrainExample> load_examples(const Manifest& manifest);

struct TrainOptions {
  const std::vector<TrainExample>* heldout = nullptr;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoint files
  bool parallel = true;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

/// Adam on the mean cosine distance to the teacher, with the encoder and
/// pooling groups on separate learning rates. Batches are fixed slices of
/// the canonical order; their visiting order is reshuffled every epoch.
TrainResult train(const TrainConfig& config, const std::vector<TrainExample>& data, ModelParams params,
                  const TrainOptions& options = {});

TrainResult train(const TrainConfig& config, const Manifest& manifest, ModelParams params,
                  const TrainOptions& options = {});

/// Mean cosine(student, teacher) over a set.
double mean_cosine(const ModelParams& params, const std::vector<TrainExample>& data, bool parallel = true);

}  // namespace sense
