#pragma once

#include <span>
#include <string>
#include <vector>

#include "sense/corpus.hpp"
#include "sense/model.hpp"

namespace sense {

enum class AttentionSource { kLogits, kWeights };

AttentionSource parse_attention_source(const std::string& s);
std::string to_string(AttentionSource s);

/// i / (T - 1); 0 for the single-frame case.
double relpos(std::size_t i, std::size_t T);

/// Linear interpolation of (relpos(i), values[i]) onto G equispaced points of [0, 1].
Vector resample_profile(std::span<const double> values, std::size_t G);

struct PositionProfile {
  std::size_t grid_size = 0;
  Vector positions;
  Vector values;
  std::size_t n_utterances = 0;

  std::string to_csv() const;
  /// Self-contained line chart of the profile.
  std::string to_svg(const std::string& title) const;
};

PositionProfile average_profile(const std::vector<AttentionRecord>& records, AttentionSource source,
                                std::size_t G = 100);

struct FirstKMass {
  double mass_fraction = 0.0;
  double frame_fraction = 0.0;
};

/// Attention weight carried by the first min(k, T) frames, and their share of T.
FirstKMass first_k_mass(const AttentionRecord& record, std::size_t k);

/// Mean of each fraction over utterances.
FirstKMass mean_first_k_mass(const std::vector<AttentionRecord>& records, std::size_t k);

struct WordAttentionStat {
  std::string word;
  std::string utt_id;
  double logit_sum = 0.0;
  int span_len = 0;
};

/// Sum of pre-softmax logits inside each alignment span.
std::vector<WordAttentionStat> word_logit_sums(const AttentionRecord& record, const std::vector<AlignSpan>& spans);

struct WordScore {
  std::string word;
  double value = 0.0;
  std::size_t count = 0;
};

struct WordReports {
  std::vector<WordScore> top_single;     // max single-utterance sum, descending
  std::vector<WordScore> most_frequent;  // mean sum of the freq_n most frequent words
};

WordReports word_reports(const std::vector<WordAttentionStat>& stats, std::size_t top_n, std::size_t freq_n);

std::string word_stats_csv(const std::vector<WordAttentionStat>& stats);
std::string top_words_csv(const std::vector<WordScore>& rows);
std::string frequent_words_csv(const std::vector<WordScore>& rows);

}  // namespace sense
