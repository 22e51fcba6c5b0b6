#include "sense/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>

#include "sense/error.hpp"
#include "sense/rng.hpp"
#include "sense/textio.hpp"

namespace sense {

namespace fs = std::filesystem;

void CorpusSpec::validate() const {
  if (num_langs < 2) throw ConfigError("num_langs must be >= 2 (got " + std::to_string(num_langs) + ")");
  if (num_concepts < 8) throw ConfigError("num_concepts must be >= 8 (got " + std::to_string(num_concepts) + ")");
  if (sentences_per_lang < 1) throw ConfigError("sentences_per_lang must be >= 1");
  if (d_in < 4) throw ConfigError("d_in must be >= 4 (got " + std::to_string(d_in) + ")");
  if (d_e < 8) throw ConfigError("d_e must be >= 8 (got " + std::to_string(d_e) + ")");
  if (heldout_sentences < 0) throw ConfigError("heldout_sentences must be >= 0");
}

std::string make_utt_id(int meaning, int lang) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "m%06d-l%02d", meaning, lang);
  return buf;
}

int meaning_of(const std::string& utt_id) {
  if (utt_id.size() < 2 || utt_id[0] != 'm') throw DomainError("utt_id without meaning id: " + utt_id);
  std::size_t i = 1;
  int v = 0;
  while (i < utt_id.size() && utt_id[i] >= '0' && utt_id[i] <= '9') v = v * 10 + (utt_id[i++] - '0');
  if (i == 1) throw DomainError("utt_id without meaning id: " + utt_id);
  return v;
}

std::string surface_word(int lang, int concept_id, std::uint64_t seed) {
  SplitMix64 g(derive_seed(seed, "surface/" + std::to_string(lang) + "/" + std::to_string(concept_id)));
  std::string w(4, 'a');
  for (auto& c : w) c = static_cast<char>('a' + g.below(26));
  return w;
}

// ---------------------------------------------------------------------------

namespace {

// Shared per-concept acoustic base vectors q_k, drawn in concept order.
std::vector<Vector> acoustic_bases(int num_concepts, int d_in, std::uint64_t seed) {
  SplitMix64 g(derive_seed(seed, "acoustic"));
  std::vector<Vector> q(static_cast<std::size_t>(num_concepts));
  for (auto& v : q) {
    v.resize(static_cast<std::size_t>(d_in));
    for (auto& x : v) x = g.normal();
  }
  return q;
}

}  // namespace

TeacherSpace::TeacherSpace(int num_concepts, int d_in, int d_e, std::uint64_t seed) : d_e_(d_e) {
  if (num_concepts < 1 || d_in < 1 || d_e < 1) throw ConfigError("teacher space needs positive sizes");
  // g_k = B q_k: the semantic vector of a concept is a fixed Gaussian lift of
  // its acoustic base vector, so speech carries the information the teacher
  // encodes. Entries of B ~ N(0, 1/d_in) keep g_k standard-normal per component.
  SplitMix64 gb(derive_seed(seed, "teacher"));
  const auto n = static_cast<std::size_t>(d_in);
  Tensor lift(static_cast<std::size_t>(d_e), n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (auto& x : lift.data) x = gb.normal() * scale;
  for (const auto& q : acoustic_bases(num_concepts, d_in, seed)) {
    Vector g(static_cast<std::size_t>(d_e));
    for (std::size_t r = 0; r < g.size(); ++r) g[r] = dot(lift.row(r), q);
    base_.push_back(std::move(g));
  }
}

TeacherEmbedding TeacherSpace::embed(const std::vector<int>& concepts) const {
  if (concepts.empty()) throw DomainError("teacher_embed: empty concept sequence");
  Vector t(static_cast<std::size_t>(d_e_), 0.0);
  for (std::size_t j = 0; j < concepts.size(); ++j) {
    const int c = concepts[j];
    if (c < 0 || c >= num_concepts())
      throw DomainError("teacher_embed: concept id " + std::to_string(c) + " out of range");
    const double w = 1.0 + 0.05 * static_cast<double>(j);
    const auto& g = base_[static_cast<std::size_t>(c)];
    for (std::size_t d = 0; d < t.size(); ++d) t[d] += w * g[d];
  }
  double n2 = 0.0;
  for (double x : t) n2 += x * x;
  const double n = std::sqrt(n2);
  if (!(n > 0.0)) throw DomainError("teacher_embed: degenerate zero vector");
  for (auto& x : t) x /= n;
  return {std::move(t)};
}

TeacherEmbedding teacher_embed(const std::vector<int>& concepts, int d_in, int d_e, std::uint64_t seed) {
  if (concepts.empty()) throw DomainError("teacher_embed: empty concept sequence");
  const int max_id = *std::max_element(concepts.begin(), concepts.end());
  if (*std::min_element(concepts.begin(), concepts.end()) < 0)
    throw DomainError("teacher_embed: negative concept id");
  // Base vectors are drawn in concept order, so a table sized to the largest
  // id yields the same g_k as the full vocabulary.
  return TeacherSpace(max_id + 1, d_in, d_e, seed).embed(concepts);
}

// ---------------------------------------------------------------------------

FrameRenderer::FrameRenderer(int num_langs, int num_concepts, int d_in, std::uint64_t seed)
    : d_in_(d_in), seed_(seed) {
  if (num_langs < 1 || num_concepts < 1 || d_in < 1) throw ConfigError("renderer needs positive sizes");
  const auto n = static_cast<std::size_t>(d_in);
  acoustic_ = acoustic_bases(num_concepts, d_in, seed);
  // A_L = I + N_L / sqrt(d_in): a shared acoustic core distorted per language.
  const double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (int l = 0; l < num_langs; ++l) {
    SplitMix64 gl(derive_seed(seed, "lang/" + std::to_string(l)));
    Tensor a(n, n);
    for (auto& x : a.data) x = gl.normal() * scale;
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
    mixing_.push_back(std::move(a));
  }
  prototypes_.resize(static_cast<std::size_t>(num_langs));
  for (int l = 0; l < num_langs; ++l) {
    const auto& a = mixing_[static_cast<std::size_t>(l)];
    for (const auto& q : acoustic_) {
      Vector p(n, 0.0);
      for (std::size_t r = 0; r < n; ++r) p[r] = dot(a.row(r), q);
      prototypes_[static_cast<std::size_t>(l)].push_back(std::move(p));
    }
  }
}

Vector FrameRenderer::prototype(int lang, int concept_id) const {
  return prototypes_.at(static_cast<std::size_t>(lang)).at(static_cast<std::size_t>(concept_id));
}

FrameSequence FrameRenderer::render(const Sentence& s) const {
  if (s.concepts.empty()) throw DomainError("render_frames: sentence without words");
  if (s.lang < 0 || s.lang >= static_cast<int>(prototypes_.size()))
    throw DomainError("render_frames: language out of range in " + s.utt_id);
  const auto words = split_ws(s.surface_text);
  if (words.size() != s.concepts.size())
    throw DomainError("render_frames: surface text does not match concepts in " + s.utt_id);

  int total = kLeadingSilence + kTrailingSilence;
  for (std::size_t w = 0; w < s.concepts.size(); ++w) {
    const int c = s.concepts[w];
    if (c < 0 || c >= static_cast<int>(acoustic_.size()))
      throw DomainError("render_frames: concept id out of range in " + s.utt_id);
    total += frames_per_word(c) + (w + 1 < s.concepts.size() ? kInterWordSilence : 0);
  }

  FrameSequence out;
  out.utt_id = s.utt_id;
  out.frames = Tensor(static_cast<std::size_t>(total), static_cast<std::size_t>(d_in_));
  SplitMix64 noise(derive_seed(seed_, "frames/" + s.utt_id));

  std::size_t t = 0;
  auto silence = [&](int count) {
    for (int i = 0; i < count; ++i, ++t)
      for (auto& x : out.frames.row(t)) x = 0.01 * noise.normal();
  };
  silence(kLeadingSilence);
  for (std::size_t w = 0; w < s.concepts.size(); ++w) {
    const auto& p = prototypes_[static_cast<std::size_t>(s.lang)][static_cast<std::size_t>(s.concepts[w])];
    const int start = static_cast<int>(t);
    for (int i = 0; i < frames_per_word(s.concepts[w]); ++i, ++t) {
      auto row = out.frames.row(t);
      for (std::size_t d = 0; d < row.size(); ++d) row[d] = p[d] + 0.05 * noise.normal();
    }
    out.alignment.push_back({static_cast<int>(w), start, static_cast<int>(t), words[w]});
    if (w + 1 < s.concepts.size()) silence(kInterWordSilence);
  }
  silence(kTrailingSilence);
  return out;
}

FrameSequence render_frames(const Sentence& sentence, int d_in, std::uint64_t seed) {
  if (sentence.concepts.empty()) throw DomainError("render_frames: sentence without words");
  const int max_id = *std::max_element(sentence.concepts.begin(), sentence.concepts.end());
  return FrameRenderer(sentence.lang + 1, max_id + 1, d_in, seed).render(sentence);
}

// ---------------------------------------------------------------------------

Sentence make_sentence(int meaning, int lang, const std::vector<int>& concepts, std::uint64_t seed) {
  Sentence s;
  s.utt_id = make_utt_id(meaning, lang);
  s.lang = lang;
  s.concepts = concepts;
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    if (i) s.surface_text += ' ';
    s.surface_text += surface_word(lang, concepts[i], seed);
  }
  return s;
}

std::vector<std::vector<int>> draw_meanings(int count, int num_concepts, std::uint64_t seed) {
  SplitMix64 g(derive_seed(seed, "meanings"));
  std::vector<std::vector<int>> out(static_cast<std::size_t>(count));
  for (auto& m : out) {
    m.resize(3 + g.below(6));
    for (auto& c : m) c = static_cast<int>(g.below(static_cast<std::uint64_t>(num_concepts)));
  }
  return out;
}

namespace {

Manifest empty_manifest(const CorpusSpec& spec, const fs::path& dir) {
  Manifest m;
  m.num_langs = spec.num_langs;
  m.num_concepts = spec.num_concepts;
  m.d_in = spec.d_in;
  m.d_e = spec.d_e;
  m.seed = spec.seed;
  m.base_dir = dir;
  return m;
}

}  // namespace

GeneratedCorpus gen_corpus(const CorpusSpec& spec, const fs::path& out_dir) {
  spec.validate();
  ensure_directory(out_dir / "frames");
  ensure_directory(out_dir / "align");

  const int total_meanings = spec.sentences_per_lang + spec.heldout_sentences;
  const auto meanings = draw_meanings(total_meanings, spec.num_concepts, spec.seed);
  const FrameRenderer renderer(spec.num_langs, spec.num_concepts, spec.d_in, spec.seed);

  const int n_utts = total_meanings * spec.num_langs;
  std::vector<ManifestEntry> entries(static_cast<std::size_t>(n_utts));
  // Per-utterance work is independent; the manifest is assembled afterwards
  // in canonical (meaning, lang) order.
  std::string first_error;
#pragma omp parallel for schedule(dynamic, 8)
  for (int u = 0; u < n_utts; ++u) {
    const int meaning = u / spec.num_langs;
    const int lang = u % spec.num_langs;
    try {
      const Sentence s = make_sentence(meaning, lang, meanings[static_cast<std::size_t>(meaning)], spec.seed);
      const FrameSequence fsq = renderer.render(s);
      ManifestEntry e{s.utt_id, lang, s.concepts, s.surface_text,
                      "frames/" + s.utt_id + ".frames", "align/" + s.utt_id + ".align"};
      write_file_atomic(out_dir / e.frames_file, frames_to_string(fsq.frames));
      write_file_atomic(out_dir / e.align_file, alignment_to_string(fsq.alignment));
      entries[static_cast<std::size_t>(u)] = std::move(e);
    } catch (const std::exception& ex) {
#pragma omp critical(sense_gen_corpus_error)
      if (first_error.empty()) first_error = ex.what();
    }
  }
  if (!first_error.empty()) throw IoError(first_error);

  GeneratedCorpus out{empty_manifest(spec, out_dir), empty_manifest(spec, out_dir)};
  const auto split = static_cast<std::size_t>(spec.sentences_per_lang * spec.num_langs);
  out.train.entries.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(split));
  out.heldout.entries.assign(entries.begin() + static_cast<std::ptrdiff_t>(split), entries.end());
  save_manifest(out.train, out_dir / "manifest.tsv");
  if (spec.heldout_sentences > 0) save_manifest(out.heldout, out_dir / "heldout.tsv");
  return out;
}

Manifest balance_languages(const Manifest& manifest, int target_per_lang) {
  if (target_per_lang < 1) throw ConfigError("target_per_lang must be >= 1");
  std::map<int, std::vector<const ManifestEntry*>> buckets;
  for (int l = 0; l < manifest.num_langs; ++l) buckets[l];
  for (const auto& e : manifest.entries) buckets[e.lang].push_back(&e);

  Manifest out = manifest;
  out.entries.clear();
  for (auto& [lang, bucket] : buckets) {
    if (bucket.empty()) throw ConfigError("balance_languages: language " + std::to_string(lang) + " has no entries");
    std::stable_sort(bucket.begin(), bucket.end(),
                     [](const ManifestEntry* a, const ManifestEntry* b) { return a->utt_id < b->utt_id; });
    const auto n = bucket.size();
    for (std::size_t p = 0; p < static_cast<std::size_t>(target_per_lang); ++p) {
      ManifestEntry e = *bucket[p % n];
      if (p >= n) e.utt_id += "-r" + std::to_string(p / n);
      out.entries.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string manifest_to_string(const Manifest& m) {
  std::string s = "SENSE-MANIFEST 1 " + std::to_string(m.num_langs) + ' ' + std::to_string(m.num_concepts) + ' ' +
                  std::to_string(m.d_in) + ' ' + std::to_string(m.d_e) + ' ' + std::to_string(m.seed) + '\n';
  for (const auto& e : m.entries) {
    s += e.utt_id;
    s += '\t';
    s += std::to_string(e.lang);
    s += '\t';
    for (std::size_t i = 0; i < e.concepts.size(); ++i) {
      if (i) s += ' ';
      s += std::to_string(e.concepts[i]);
    }
    s += '\t' + e.surface_text + '\t' + e.frames_file + '\t' + e.align_file + '\n';
  }
  return s;
}

Manifest parse_manifest(const std::vector<std::string>& lines, const fs::path& base_dir) {
  if (lines.empty()) throw IoError("empty manifest");
  const auto head = split_ws(lines[0]);
  if (head.size() != 7 || head[0] != "SENSE-MANIFEST" || head[1] != "1")
    throw IoError("bad manifest header: " + lines[0]);
  Manifest m;
  m.num_langs = static_cast<int>(parse_int(head[2], "manifest header"));
  m.num_concepts = static_cast<int>(parse_int(head[3], "manifest header"));
  m.d_in = static_cast<int>(parse_int(head[4], "manifest header"));
  m.d_e = static_cast<int>(parse_int(head[5], "manifest header"));
  {
    const std::string& s = head[6];
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw IoError("bad manifest seed: " + s);
    m.seed = v;
  }
  m.base_dir = base_dir;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = split(lines[i], '\t');
    const std::string ctx = "manifest line " + std::to_string(i + 1);
    if (f.size() != 6) throw IoError("expected 6 fields in " + ctx);
    ManifestEntry e;
    e.utt_id = f[0];
    e.lang = static_cast<int>(parse_int(f[1], ctx));
    for (const auto& c : split_ws(f[2])) e.concepts.push_back(static_cast<int>(parse_int(c, ctx)));
    e.surface_text = f[3];
    e.frames_file = f[4];
    e.align_file = f[5];
    m.entries.push_back(std::move(e));
  }
  return m;
}

Manifest load_manifest(const fs::path& path) {
  return parse_manifest(read_lines(path), path.parent_path());
}

void save_manifest(const Manifest& m, const fs::path& path) { write_file_atomic(path, manifest_to_string(m)); }

std::string frames_to_string(const Tensor& frames) {
  std::string s = std::to_string(frames.rows) + ' ' + std::to_string(frames.cols) + '\n';
  for (std::size_t t = 0; t < frames.rows; ++t) {
    s += format_reals(frames.row(t));
    s += '\n';
  }
  return s;
}

std::string alignment_to_string(const std::vector<AlignSpan>& spans) {
  std::string s;
  for (const auto& a : spans)
    s += std::to_string(a.word_index) + '\t' + std::to_string(a.start) + '\t' + std::to_string(a.end) + '\t' +
         a.surface + '\n';
  return s;
}

Tensor load_frames_file(const fs::path& path) {
  const auto lines = read_lines(path);
  const std::string ctx = path.string();
  if (lines.empty()) throw IoError("empty frames file " + ctx);
  const auto head = split_ws(lines[0]);
  if (head.size() != 2) throw IoError("bad frames header in " + ctx);
  const auto rows = parse_int(head[0], ctx);
  const auto cols = parse_int(head[1], ctx);
  if (rows < 1 || cols < 1 || static_cast<std::size_t>(rows) + 1 > lines.size())
    throw IoError("bad frames dimensions in " + ctx);
  Tensor t(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  for (std::size_t r = 0; r < t.rows; ++r) {
    const auto vals = split_ws(lines[r + 1]);
    if (vals.size() != t.cols) throw IoError("frame row " + std::to_string(r) + " has wrong width in " + ctx);
    for (std::size_t c = 0; c < t.cols; ++c) t(r, c) = parse_real(vals[c], ctx);
  }
  return t;
}

std::vector<AlignSpan> load_alignment_file(const fs::path& path) {
  std::vector<AlignSpan> out;
  const std::string ctx = path.string();
  for (const auto& line : read_lines(path)) {
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) throw IoError("bad alignment line in " + ctx);
    out.push_back({static_cast<int>(parse_int(f[0], ctx)), static_cast<int>(parse_int(f[1], ctx)),
                   static_cast<int>(parse_int(f[2], ctx)), f[3]});
  }
  return out;
}

FrameSequence load_utterance(const Manifest& m, const ManifestEntry& e) {
  FrameSequence fsq;
  fsq.utt_id = e.utt_id;
  try {
    fsq.frames = load_frames_file(m.frames_path(e));
    fsq.alignment = load_alignment_file(m.align_path(e));
  } catch (const IoError& ex) {
    throw IoError("utterance " + e.utt_id + ": " + ex.what());
  }
  return fsq;
}

}  // namespace sense
