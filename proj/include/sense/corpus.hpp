#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sense/tensor.hpp"

namespace sense {

struct CorpusSpec {
  int num_langs = 4;
  int num_concepts = 64;
  int sentences_per_lang = 400;
  int d_in = 16;
  int d_e = 32;
  std::uint64_t seed = 1;
  /// Extra meanings rendered in every language and written to a separate
  /// held-out manifest. They share the acoustic and teacher spaces.
  int heldout_sentences = 0;

  void validate() const;
};

struct Sentence {
  std::string utt_id;
  int lang = 0;
  std::vector<int> concepts;
  std::string surface_text;
};

/// Word span [start, end) in frame indices.
struct AlignSpan {
  int word_index = 0;
  int start = 0;
  int end = 0;
  std::string surface;

  int length() const noexcept { return end - start; }
  friend bool operator==(const AlignSpan&, const AlignSpan&) = default;
};

struct FrameSequence {
  std::string utt_id;
  Tensor frames;  // T x d_in
  std::vector<AlignSpan> alignment;

  std::size_t length() const noexcept { return frames.rows; }
};

struct TeacherEmbedding {
  Vector values;
};

struct ManifestEntry {
  std::string utt_id;
  int lang = 0;
  std::vector<int> concepts;
  std::string surface_text;
  std::string frames_file;  // relative to the manifest directory
  std::string align_file;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  int num_langs = 0;
  int num_concepts = 0;
  int d_in = 0;
  int d_e = 0;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;
  /// Directory that relative file references resolve against. Not serialized.
  std::filesystem::path base_dir;

  std::filesystem::path frames_path(const ManifestEntry& e) const { return base_dir / e.frames_file; }
  std::filesystem::path align_path(const ManifestEntry& e) const { return base_dir / e.align_file; }
};

/// Frames rendered per word: 3 + (concept mod 4).
inline int frames_per_word(int concept_id) noexcept { return 3 + concept_id % 4; }

inline constexpr int kLeadingSilence = 2;
inline constexpr int kTrailingSilence = 2;
inline constexpr int kInterWordSilence = 1;

std::string make_utt_id(int meaning, int lang);

/// Meaning index encoded in an utt_id ("m000042-l01" and its duplicates).
int meaning_of(const std::string& utt_id);

/// Deterministic 4-letter pseudo-word for (lang, concept).
std::string surface_word(int lang, int concept_id, std::uint64_t seed);

/// Frozen language-agnostic teacher. Per-concept base vectors g_k = B q_k
/// lift the shared acoustic vectors q_k through a seeded Gaussian matrix.
class TeacherSpace {
 public:
  TeacherSpace(int num_concepts, int d_in, int d_e, std::uint64_t seed);

  /// L2-normalized sum of (1 + 0.05 j) g_{c_j}.
  TeacherEmbedding embed(const std::vector<int>& concepts) const;

  int dim() const noexcept { return d_e_; }
  int num_concepts() const noexcept { return static_cast<int>(base_.size()); }

 private:
  int d_e_;
  std::vector<Vector> base_;
};

TeacherEmbedding teacher_embed(const std::vector<int>& concepts, int d_in, int d_e, std::uint64_t seed);

/// Speech surrogate: shared per-concept acoustic vectors q_k seen through a
/// per-language mixing matrix A_L = I + N_L / sqrt(d_in).
class FrameRenderer {
 public:
  FrameRenderer(int num_langs, int num_concepts, int d_in, std::uint64_t seed);

  /// p_{L,k} = A_L q_k.
  Vector prototype(int lang, int concept_id) const;

  FrameSequence render(const Sentence& sentence) const;

  int d_in() const noexcept { return d_in_; }

 private:
  int d_in_;
  std::uint64_t seed_;
  std::vector<Vector> acoustic_;   // q_k
  std::vector<Tensor> mixing_;     // A_L
  std::vector<std::vector<Vector>> prototypes_;
};

FrameSequence render_frames(const Sentence& sentence, int d_in, std::uint64_t seed);

/// Meaning k rendered as a sentence in `lang`.
Sentence make_sentence(int meaning, int lang, const std::vector<int>& concepts, std::uint64_t seed);

/// Concept sequences for meanings [0, count), drawn from the corpus seed.
std::vector<std::vector<int>> draw_meanings(int count, int num_concepts, std::uint64_t seed);

struct GeneratedCorpus {
  Manifest train;
  Manifest heldout;  // empty entries when spec.heldout_sentences == 0
};

/// Renders every meaning in every language and writes manifest.tsv,
/// heldout.tsv (if requested), frames/ and align/ under out_dir.
GeneratedCorpus gen_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

Manifest balance_languages(const Manifest& manifest, int target_per_lang);

std::string manifest_to_string(const Manifest& m);
Manifest parse_manifest(const std::vector<std::string>& lines, const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& m, const std::filesystem::path& path);

std::string frames_to_string(const Tensor& frames);
std::string alignment_to_string(const std::vector<AlignSpan>& spans);
Tensor load_frames_file(const std::filesystem::path& path);
std::vector<AlignSpan> load_alignment_file(const std::filesystem::path& path);

/// Reads the frames and alignment files of one entry. IoError names the utt_id.
FrameSequence load_utterance(const Manifest& m, const ManifestEntry& e);

}  // namespace sense
