#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sense/corpus.hpp"
#include "sense/model.hpp"
#include "sense/tensor.hpp"

namespace sense {

enum class Modality { kSpeech, kText };
enum class Centering { kPerDb, kJoint, kNone };

std::string to_string(Modality m);
std::string to_string(Centering c);
Modality parse_modality(const std::string& s);
Centering parse_centering(const std::string& s);

/// Ordered id -> vector collection used as a query or search database.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim = 0) : dim_(dim), center_(dim, 0.0) {}

  void add(std::string id, Vector v);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  bool centered() const noexcept { return centered_; }
  const Vector& center() const noexcept { return center_; }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const Vector& vector(std::size_t i) const { return vectors_[i]; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::vector<Vector>& vectors() const noexcept { return vectors_; }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  std::size_t index_of(const std::string& id) const;

  Vector mean() const;

  /// Subtracts `c` from every vector and records it. StateError if centered.
  EmbeddingStore centered_by(const Vector& c) const;

  friend bool operator==(const EmbeddingStore& a, const EmbeddingStore& b) {
    return a.dim_ == b.dim_ && a.ids_ == b.ids_ && a.vectors_ == b.vectors_ && a.centered_ == b.centered_ &&
           a.center_ == b.center_;
  }

 private:
  friend EmbeddingStore parse_store(const std::vector<std::string>& lines);

  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<Vector> vectors_;
  std::map<std::string, std::size_t> index_;
  bool centered_ = false;
  Vector center_;
};

/// query_id -> gold search_id, in insertion order.
using GoldMap = std::vector<std::pair<std::string, std::string>>;

struct Hit {
  std::string id;
  double score = 0.0;
};

/// speech: student embeddings of the frames; text: teacher embeddings.
EmbeddingStore embed_manifest(const ModelParams& params, const Manifest& manifest, Modality modality,
                              bool parallel = true);

/// Store minus its own mean. StateError if already centered or empty.
EmbeddingStore mean_center(const EmbeddingStore& store);

/// Exact cosine ranking: descending score, ties by ascending id.
std::vector<Hit> top_k(std::span<const double> query, const EmbeddingStore& store, std::size_t k,
                       bool parallel = true);

/// 100 * fraction of gold queries whose gold id is in the top k.
double recall_at_k(const EmbeddingStore& query, const EmbeddingStore& search, const GoldMap& gold, std::size_t k,
                   Centering centering = Centering::kPerDb);

/// Pairs every query entry with the search entry carrying the same meaning id.
GoldMap gold_by_meaning(const EmbeddingStore& query, const EmbeddingStore& search);

struct Scenario {
  const Manifest* query = nullptr;
  Modality query_modality = Modality::kSpeech;
  const Manifest* search = nullptr;
  Modality search_modality = Modality::kText;
  GoldMap gold;  // empty: derived by meaning id
};

struct RetrievalRow {
  std::string query_lang, query_mod, search_lang, search_mod;
  std::size_t n_query = 0, n_search = 0, k = 0;
  double recall = 0.0;
};

std::vector<RetrievalRow> retrieval_matrix(const std::vector<Scenario>& scenarios, const ModelParams& params,
                                           std::size_t k, Centering centering);

std::string retrieval_csv(const std::vector<RetrievalRow>& rows);

/// Subset of a manifest with a single language.
Manifest filter_language(const Manifest& m, int lang);

/// "0" or "0+1" style label from the languages present.
std::string language_label(const Manifest& m);
std::string language_label(const EmbeddingStore& s);

std::string store_to_string(const EmbeddingStore& s);
EmbeddingStore parse_store(const std::vector<std::string>& lines);
void save_store(const EmbeddingStore& s, const std::filesystem::path& path);
EmbeddingStore load_store(const std::filesystem::path& path);

std::string gold_to_string(const GoldMap& g);
GoldMap load_gold(const std::filesystem::path& path);

}  // namespace sense
