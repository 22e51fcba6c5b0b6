#include "sense/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sense/error.hpp"
#include "sense/kernels.hpp"
#include "sense/textio.hpp"

namespace sense {

std::string to_string(Modality m) { return m == Modality::kSpeech ? "speech" : "text"; }

std::string to_string(Centering c) {
  switch (c) {
    case Centering::kPerDb: return "per-db";
    case Centering::kJoint: return "joint";
    case Centering::kNone: return "none";
  }
  return "?";
}

Modality parse_modality(const std::string& s) {
  if (s == "speech") return Modality::kSpeech;
  if (s == "text") return Modality::kText;
  throw ConfigError("unknown modality '" + s + "' (expected speech|text)");
}

Centering parse_centering(const std::string& s) {
  if (s == "per-db") return Centering::kPerDb;
  if (s == "joint") return Centering::kJoint;
  if (s == "none") return Centering::kNone;
  throw ConfigError("unknown centering '" + s + "' (expected per-db|joint|none)");
}

void EmbeddingStore::add(std::string id, Vector v) {
  if (v.size() != dim_) throw ShapeError("store: vector for " + id + " has dimension " + std::to_string(v.size()));
  for (double x : v)
    if (!std::isfinite(x)) throw DomainError("store: non-finite value in " + id);
  if (!index_.emplace(id, ids_.size()).second) throw DomainError("store: duplicate id " + id);
  ids_.push_back(std::move(id));
  vectors_.push_back(std::move(v));
}

std::size_t EmbeddingStore::index_of(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw DomainError("id not found in store: " + id);
  return it->second;
}

Vector EmbeddingStore::mean() const {
  Vector m(dim_, 0.0);
  if (vectors_.empty()) return m;
  for (const auto& v : vectors_)
    for (std::size_t d = 0; d < dim_; ++d) m[d] += v[d];
  for (auto& x : m) x /= static_cast<double>(vectors_.size());
  return m;
}

EmbeddingStore EmbeddingStore::centered_by(const Vector& c) const {
  if (centered_) throw StateError("store is already mean-centered");
  if (c.size() != dim_) throw ShapeError("center vector has wrong dimension");
  EmbeddingStore out = *this;
  for (auto& v : out.vectors_)
    for (std::size_t d = 0; d < dim_; ++d) v[d] -= c[d];
  out.centered_ = true;
  out.center_ = c;
  return out;
}

EmbeddingStore embed_manifest(const ModelParams& params, const Manifest& manifest, Modality modality,
                              bool parallel) {
  std::vector<Vector> vecs;
  std::size_t dim = 0;
  if (modality == Modality::kText) {
    const TeacherSpace teacher(manifest.num_concepts, manifest.d_in, manifest.d_e, manifest.seed);
    for (const auto& e : manifest.entries) vecs.push_back(teacher.embed(e.concepts).values);
    dim = static_cast<std::size_t>(manifest.d_e);
  } else {
    std::vector<Tensor> frames(manifest.entries.size());
    const auto n = static_cast<long>(frames.size());
    std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 8) if (parallel)
    for (long i = 0; i < n; ++i) {
      try {
        const auto& e = manifest.entries[static_cast<std::size_t>(i)];
        frames[static_cast<std::size_t>(i)] = load_utterance(manifest, e).frames;
      } catch (...) {
#pragma omp critical(sense_embed_error)
        if (!err) err = std::current_exception();
      }
    }
    if (err) std::rethrow_exception(err);
    vecs = parallel ? kernels::embed_parallel(params, frames) : kernels::embed_serial(params, frames);
    dim = static_cast<std::size_t>(params.dims.d_e);
  }
  EmbeddingStore store(dim);
  for (std::size_t i = 0; i < vecs.size(); ++i) store.add(manifest.entries[i].utt_id, std::move(vecs[i]));
  return store;
}

EmbeddingStore mean_center(const EmbeddingStore& store) {
  if (store.empty()) throw DomainError("mean_center: empty store");
  return store.centered_by(store.mean());
}

namespace {

std::vector<Hit> rank(const std::vector<double>& scores, const EmbeddingStore& store, std::size_t k) {
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const std::size_t n = std::min(k, idx.size());
  auto before = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return store.id(a) < store.id(b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(), before);
  std::vector<Hit> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({store.id(idx[i]), scores[idx[i]]});
  return out;
}

}  // namespace

std::vector<Hit> top_k(std::span<const double> query, const EmbeddingStore& store, std::size_t k, bool parallel) {
  if (k < 1) throw DomainError("top_k: k must be >= 1");
  if (query.size() != store.dim())
    throw ShapeError("top_k: query dimension " + std::to_string(query.size()) + " != store dimension " +
                     std::to_string(store.dim()));
  if (!(dot(query, query) > 0.0)) throw DomainError("top_k: zero-norm query");
  const auto block = kernels::make_block(store.dim(), store.vectors());
  const auto scores =
      parallel ? kernels::cosine_scores_parallel(query, block) : kernels::cosine_scores_serial(query, block);
  return rank(scores, store, k);
}

double recall_at_k(const EmbeddingStore& query, const EmbeddingStore& search, const GoldMap& gold, std::size_t k,
                   Centering centering) {
  if (gold.empty()) throw DomainError("recall_at_k: empty gold map");
  if (k < 1) throw DomainError("recall_at_k: k must be >= 1");
  if (query.dim() != search.dim()) throw ShapeError("recall_at_k: query and search dimensions differ");
  for (const auto& [q, s] : gold) {
    if (!query.contains(q)) throw DomainError("gold query id missing from query store: " + q);
    if (!search.contains(s)) throw DomainError("gold search id missing from search store: " + s);
  }

  EmbeddingStore qs = query, ss = search;
  switch (centering) {
    case Centering::kNone: break;
    case Centering::kPerDb:
      qs = mean_center(query);
      ss = mean_center(search);
      break;
    case Centering::kJoint: {
      Vector pooled(query.dim(), 0.0);
      for (const auto* st : {&query, &search})
        for (const auto& v : st->vectors())
          for (std::size_t d = 0; d < pooled.size(); ++d) pooled[d] += v[d];
      for (auto& x : pooled) x /= static_cast<double>(query.size() + search.size());
      qs = query.centered_by(pooled);
      ss = search.centered_by(pooled);
      break;
    }
  }

  const auto block = kernels::make_block(ss.dim(), ss.vectors());
  std::size_t hits = 0;
  for (const auto& [q, s] : gold) {
    const auto& qv = qs.vector(qs.index_of(q));
    // A query that centering collapsed to the origin cannot be ranked.
    if (!(dot(qv, qv) > 0.0)) continue;
    const auto ranked = rank(kernels::cosine_scores_parallel(qv, block), ss, k);
    for (const auto& h : ranked)
      if (h.id == s) {
        ++hits;
        break;
      }
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(gold.size());
}

GoldMap gold_by_meaning(const EmbeddingStore& query, const EmbeddingStore& search) {
  std::map<int, std::string> by_meaning;
  for (const auto& id : search.ids()) by_meaning.emplace(meaning_of(id), id);
  GoldMap g;
  for (const auto& id : query.ids()) {
    const auto it = by_meaning.find(meaning_of(id));
    if (it != by_meaning.end()) g.emplace_back(id, it->second);
  }
  return g;
}

namespace {

int lang_of(const std::string& utt_id) {
  const auto pos = utt_id.find("-l");
  if (pos == std::string::npos) return -1;
  int v = 0;
  std::size_t i = pos + 2;
  if (i >= utt_id.size() || utt_id[i] < '0' || utt_id[i] > '9') return -1;
  while (i < utt_id.size() && utt_id[i] >= '0' && utt_id[i] <= '9') v = v * 10 + (utt_id[i++] - '0');
  return v;
}

std::string join_langs(const std::set<int>& langs) {
  std::string s;
  for (int l : langs) {
    if (!s.empty()) s += '+';
    s += l < 0 ? std::string("?") : std::to_string(l);
  }
  return s;
}

}  // namespace

Manifest filter_language(const Manifest& m, int lang) {
  Manifest out = m;
  out.entries.clear();
  for (const auto& e : m.entries)
    if (e.lang == lang) out.entries.push_back(e);
  return out;
}

std::string language_label(const Manifest& m) {
  std::set<int> langs;
  for (const auto& e : m.entries) langs.insert(e.lang);
  return join_langs(langs);
}

std::string language_label(const EmbeddingStore& s) {
  std::set<int> langs;
  for (const auto& id : s.ids()) langs.insert(lang_of(id));
  return join_langs(langs);
}

std::vector<RetrievalRow> retrieval_matrix(const std::vector<Scenario>& scenarios, const ModelParams& params,
                                           std::size_t k, Centering centering) {
  std::map<std::pair<const Manifest*, Modality>, EmbeddingStore> cache;
  auto store_for = [&](const Manifest* m, Modality mod) -> const EmbeddingStore& {
    auto key = std::make_pair(m, mod);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, embed_manifest(params, *m, mod)).first;
    return it->second;
  };

  std::vector<RetrievalRow> rows;
  for (const auto& sc : scenarios) {
    if (!sc.query || !sc.search) throw ConfigError("retrieval scenario without manifests");
    const auto& q = store_for(sc.query, sc.query_modality);
    const auto& s = store_for(sc.search, sc.search_modality);
    const GoldMap gold = sc.gold.empty() ? gold_by_meaning(q, s) : sc.gold;
    RetrievalRow r;
    r.query_lang = language_label(*sc.query);
    r.query_mod = to_string(sc.query_modality);
    r.search_lang = language_label(*sc.search);
    r.search_mod = to_string(sc.search_modality);
    r.n_query = q.size();
    r.n_search = s.size();
    r.k = k;
    r.recall = recall_at_k(q, s, gold, k, centering);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string retrieval_csv(const std::vector<RetrievalRow>& rows) {
  std::string s = "query_lang,query_mod,search_lang,search_mod,n_query,n_search,k,recall\n";
  for (const auto& r : rows) {
    char rec[32];
    std::snprintf(rec, sizeof rec, "%.2f", r.recall);
    s += r.query_lang + ',' + r.query_mod + ',' + r.search_lang + ',' + r.search_mod + ',' +
         std::to_string(r.n_query) + ',' + std::to_string(r.n_search) + ',' + std::to_string(r.k) + ',' + rec + '\n';
  }
  return s;
}

// ---------------------------------------------------------------------------

std::string store_to_string(const EmbeddingStore& st) {
  std::string s = "SENSE-EMB 1 " + std::to_string(st.dim()) + ' ' + std::to_string(st.size()) + ' ' +
                  (st.centered() ? "1" : "0") + '\n';
  for (std::size_t i = 0; i < st.size(); ++i) s += st.id(i) + '\t' + format_reals(st.vector(i)) + '\n';
  if (st.centered()) s += "#center\t" + format_reals(st.center()) + '\n';
  return s;
}

EmbeddingStore parse_store(const std::vector<std::string>& lines) {
  if (lines.empty()) throw IoError("empty store file");
  const auto h = split_ws(lines[0]);
  if (h.size() != 5 || h[0] != "SENSE-EMB" || h[1] != "1") throw IoError("bad store header: " + lines[0]);
  const auto dim = static_cast<std::size_t>(parse_int(h[2], "store header"));
  const auto count = static_cast<std::size_t>(parse_int(h[3], "store header"));
  const bool centered = h[4] == "1";
  if (!centered && h[4] != "0") throw IoError("bad centered flag in store header");

  EmbeddingStore st(dim);
  std::size_t ln = 1;
  auto read_vec = [&](const std::string& field, const std::string& ctx) {
    const auto vals = split_ws(field);
    if (vals.size() != dim) throw IoError("wrong vector width for " + ctx);
    Vector v(dim);
    for (std::size_t d = 0; d < dim; ++d) v[d] = parse_real(vals[d], ctx);
    return v;
  };
  for (std::size_t i = 0; i < count; ++i, ++ln) {
    if (ln >= lines.size()) throw IoError("store file truncated");
    const auto tab = lines[ln].find('\t');
    if (tab == std::string::npos) throw IoError("store line " + std::to_string(ln + 1) + " lacks a tab");
    const std::string id = lines[ln].substr(0, tab);
    try {
      st.add(id, read_vec(lines[ln].substr(tab + 1), id));
    } catch (const DomainError& e) {
      throw IoError(e.what());
    }
  }
  if (centered) {
    if (ln >= lines.size() || lines[ln].rfind("#center\t", 0) != 0) throw IoError("centered store lacks #center line");
    st.centered_ = true;
    st.center_ = read_vec(lines[ln].substr(8), "#center");
  }
  return st;
}

void save_store(const EmbeddingStore& s, const std::filesystem::path& path) {
  write_file_atomic(path, store_to_string(s));
}

EmbeddingStore load_store(const std::filesystem::path& path) { return parse_store(read_lines(path)); }

std::string gold_to_string(const GoldMap& g) {
  std::string s;
  for (const auto& [q, t] : g) s += q + '\t' + t + '\n';
  return s;
}

GoldMap load_gold(const std::filesystem::path& path) {
  GoldMap g;
  for (const auto& line : read_lines(path)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 2) throw IoError("bad gold line in " + path.string() + ": " + line);
    g.emplace_back(f[0], f[1]);
  }
  return g;
}

}  // namespace sense
