// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include "oracles.hpp"
#include "sense/attention.hpp"
#include "sense/corpus.hpp"
#include "sense/loss.hpp"
#include "sense/metrics.hpp"
#include "sense/model.hpp"
#include "sense/retrieval.hpp"
#include "sense/rng.hpp"
#include "sense/textio.hpp"
#include "sense/training.hpp"
#include "test_util.hpp"

using namespace sense;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and thresholds.
constexpr double kFdEpsilon = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdTimeLimit = 10.0;        // seconds
constexpr double kHeldoutCosine = 0.9;
constexpr double kTrainTimeLimit = 600.0;    // seconds, single core
constexpr double kSpeechTextR1 = 90.0;
constexpr double kSpeechSpeechR1 = 80.0;
constexpr double kEndpointTol = 1e-12;
constexpr double kPartitionTol = 1e-9;
constexpr double kLossTol = 1e-9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SENSE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// ---------------------------------------------------------------- 1

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const ModelDims dims{3, 4, 3, 2};
  const std::size_t lengths[] = {1, 2, 5, 9};
  SplitMix64 g(1);
  std::size_t instances = 0, checked = 0, failures = 0;
  double worst = 0;
  for (int inst = 0; inst < 24; ++inst) {
    ModelParams p = init_params(dims, 1000 + inst);
    for (Tensor* b : {&p.b1, &p.b2, &p.ba, &p.bp})
      for (auto& x : b->data) x = 0.1 * g.normal();
    Tensor x(lengths[inst % 4], 3);
    for (auto& v : x.data) v = g.normal();
    const Vector t{g.normal(), g.normal()};
    const auto r = oracle::check_gradients(p, x, t, kFdEpsilon, kFdRelTol);
    ++instances;
    checked += r.checked;
    failures += r.failures;
    worst = std::max(worst, r.max_rel_error);
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && instances >= 20 && secs < kFdTimeLimit,
          std::to_string(instances) + " instances, " + std::to_string(checked) + " entries, max rel err " +
              fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s"};
}

// ---------------------------------------------------------------- 2, 3

struct EndToEnd {
  testutil::TempDir dir{"acceptance-e2e"};
  GeneratedCorpus corpus;
  ModelParams model;
  double heldout_cosine = 0;
  double train_seconds = 0;
};

Outcome alignment_feasibility(EndToEnd& e2e) {
  CorpusSpec spec;
  spec.num_langs = 4;
  spec.num_concepts = 64;
  spec.sentences_per_lang = 400;
  spec.heldout_sentences = 256;
  spec.d_in = 16;
  spec.d_e = 32;
  spec.seed = 1;
  e2e.corpus = gen_corpus(spec, e2e.dir.path());

  const TrainConfig cfg;  // defaults: 20 epochs
  const auto train_set = load_examples(e2e.corpus.train);
  const auto heldout = load_examples(e2e.corpus.heldout);
  const ModelDims dims{16, 32, 32, 32};

  // Timed on one core with the serial kernels.
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  TrainOptions opts;
  opts.parallel = false;
  const auto t0 = Clock::now();
  auto result = train(cfg, train_set, init_params(dims, derive_seed(cfg.seed, "model")), opts);
  e2e.train_seconds = seconds_since(t0);
  omp_set_num_threads(threads);

  e2e.model = std::move(result.params);
  e2e.heldout_cosine = mean_cosine(e2e.model, heldout);
  return {e2e.heldout_cosine >= kHeldoutCosine && e2e.train_seconds < kTrainTimeLimit && cfg.epochs <= 20,
          "held-out mean cosine " + fmt("%.4f", e2e.heldout_cosine) + " over " +
              std::to_string(heldout.size()) + " utterances, " + std::to_string(cfg.epochs) + " epochs in " +
              fmt("%.1f", e2e.train_seconds) + " s (1 thread)"};
}

Outcome cross_lingual_retrieval(const EndToEnd& e2e) {
  const Manifest& held = e2e.corpus.heldout;
  std::vector<Manifest> langs;
  for (int l = 0; l < held.num_langs; ++l) langs.push_back(filter_language(held, l));
  std::vector<Scenario> sc;
  for (Modality sm : {Modality::kText, Modality::kSpeech})
    for (int a = 0; a < held.num_langs; ++a)
      for (int b = 0; b < held.num_langs; ++b)
        if (a != b) sc.push_back({&langs[a], Modality::kSpeech, &langs[b], sm, {}});
  const auto rows = retrieval_matrix(sc, e2e.model, 1, Centering::kPerDb);

  double min_st = 100, min_ss = 100;
  bool sizes_ok = true;
  for (const auto& r : rows) {
    sizes_ok = sizes_ok && r.n_query == 256 && r.n_search == 256;
    (r.search_mod == "text" ? min_st : min_ss) = std::min(r.search_mod == "text" ? min_st : min_ss, r.recall);
  }
  return {sizes_ok && rows.size() == 24 && min_st >= kSpeechTextR1 && min_ss >= kSpeechSpeechR1,
          std::to_string(rows.size()) + " language-pair scenarios x 256 meanings; min R@1 speech->text " +
              fmt("%.2f", min_st) + "%, speech->speech " + fmt("%.2f", min_ss) + "% (chance " +
              fmt("%.2f", 100.0 / 256) + "%)"};
}

// ---------------------------------------------------------------- 4

Outcome retrieval_oracle() {
  SplitMix64 g(4);
  std::size_t mismatches = 0, monotone_violations = 0;
  for (int n = 0; n < 50; ++n) {
    const std::size_t size = 1 + g.below(1000), dim = 1 + g.below(16);
    EmbeddingStore st(dim);
    for (std::size_t i = 0; i < size; ++i) {
      Vector v(dim);
      // Coarse values make exact score ties common.
      for (auto& x : v) x = n % 2 ? g.normal() : static_cast<double>(static_cast<int>(g.below(5)) - 2);
      st.add("id" + std::to_string(g.next() % 100000) + "-" + std::to_string(i), std::move(v));
    }
    Vector qv(dim);
    do
      for (auto& x : qv) x = n % 2 ? g.normal() : static_cast<double>(static_cast<int>(g.below(5)) - 2);
    while (dot(qv, qv) == 0.0);
    const auto want = oracle::brute_force_rank(qv, st);
    const std::size_t k = 1 + g.below(size);
    const auto got = top_k(qv, st, k);
    if (got.size() != k) ++mismatches;
    for (std::size_t i = 0; i < std::min(k, got.size()); ++i)
      if (got[i].id != want[i].id || std::fabs(got[i].score - want[i].score) > 1e-12) ++mismatches;

    // Recall@k monotone in k against a random gold map.
    EmbeddingStore qs(dim);
    GoldMap gold;
    for (int i = 0; i < 20; ++i) {
      Vector v(dim);
      for (auto& x : v) x = g.normal();
      qs.add("q" + std::to_string(i), std::move(v));
      gold.emplace_back("q" + std::to_string(i), st.id(g.below(size)));
    }
    double prev = -1;
    for (std::size_t kk = 1; kk <= std::min<std::size_t>(size, 64); ++kk) {
      const double r = recall_at_k(qs, st, gold, kk, Centering::kNone);
      if (r < prev) ++monotone_violations;
      prev = r;
    }
  }
  return {mismatches == 0 && monotone_violations == 0,
          "50 stores: " + std::to_string(mismatches) + " ranking mismatches, " +
              std::to_string(monotone_violations) + " R@k monotonicity violations"};
}

// ---------------------------------------------------------------- 5

Outcome metrics_oracle() {
  SplitMix64 g(5);
  const auto tags = oracle::slu_tags();
  std::size_t corpora = 0, mismatches = 0, dominance_violations = 0;
  while (corpora < 100) {
    const int alphabet = 1 + static_cast<int>(g.below(10));
    const std::size_t lines = 1 + g.below(10);
    std::vector<std::string> rt, ht;
    oracle::Counts coer, cver;
    for (std::size_t i = 0; i < lines; ++i) {
      const auto r = oracle::random_slu_line(g, alphabet);
      const auto h = oracle::random_slu_line(g, alphabet);
      rt.push_back(r.text);
      ht.push_back(h.text);
      const auto a = oracle::edit_counts(oracle::labels_of(r.slots), oracle::labels_of(h.slots));
      const auto b = oracle::edit_counts(r.slots, h.slots);
      coer.s += a.s, coer.i += a.i, coer.d += a.d, coer.n += a.n;
      cver.s += b.s, cver.i += b.i, cver.d += b.d, cver.n += b.n;
    }
    if (coer.n == 0) continue;  // rate undefined without reference labels
    ++corpora;
    const auto slot = score_transcripts(rt, ht, tags, SluTask::kSlotFilling);
    const auto ner = score_transcripts(rt, ht, tags, SluTask::kNer);
    auto same = [](const ErrorBreakdown& e, const oracle::Counts& c) {
      const double rate = 100.0 * static_cast<double>(c.s + c.i + c.d) / static_cast<double>(c.n);
      return e.substitutions == c.s && e.insertions == c.i && e.deletions == c.d && e.ref_count == c.n &&
             e.rate() == rate;
    };
    if (!same(slot.rows[0].second, coer) || !same(slot.rows[1].second, cver) || !same(ner.rows[0].second, coer))
      ++mismatches;
    if (slot.rows[1].second.rate() < slot.rows[0].second.rate()) ++dominance_violations;
  }
  return {mismatches == 0 && dominance_violations == 0,
          std::to_string(corpora) + " corpora (NEER, COER, CVER): " + std::to_string(mismatches) +
              " oracle mismatches, " + std::to_string(dominance_violations) + " CVER < COER"};
}

// ---------------------------------------------------------------- 6

Outcome attention_exactness() {
  SplitMix64 g(6);
  std::size_t failures = 0;
  std::string notes;

  // Endpoints and constants.
  double worst_endpoint = 0;
  for (int n = 0; n < 200; ++n) {
    Vector v(1 + g.below(80));
    for (auto& x : v) x = 10 * g.normal();
    const std::size_t G = 2 + g.below(200);
    const auto r = resample_profile(v, G);
    worst_endpoint = std::max({worst_endpoint, std::fabs(r.front() - v.front()), std::fabs(r.back() - v.back())});
    const double c = g.normal();
    for (double x : resample_profile(Vector(v.size(), c), G))
      if (x != c) ++failures;
  }
  if (worst_endpoint > kEndpointTol) ++failures;

  // Uniform weights: the mass equals k/T. The weights are fl(1/T), so for T
  // not a power of two the compensated sum is held to within one ulp of
  // fl(k/T); for powers of two, and for the T=100, k=5 case, it must be equal.
  std::size_t not_exact = 0;
  for (std::size_t T = 1; T <= 512; ++T)
    for (std::size_t k = 1; k <= T + 2; ++k) {
      AttentionRecord r;
      r.weights.assign(T, 1.0 / static_cast<double>(T));
      const auto m = first_k_mass(r, k);
      const double want = static_cast<double>(std::min(k, T)) / static_cast<double>(T);
      if (m.frame_fraction != want) ++failures;
      if (m.mass_fraction != want) {
        ++not_exact;
        const bool pow2 = (T & (T - 1)) == 0;
        if (pow2 || std::fabs(m.mass_fraction - want) > std::nextafter(want, 2.0) - want) ++failures;
      }
    }
  {
    AttentionRecord r;
    r.weights.assign(100, 1.0 / 100.0);
    if (first_k_mass(r, 5).mass_fraction != 0.05) ++failures;
  }

  // Partition identity on rendered utterances through a model.
  const auto params = init_params(ModelDims{8, 16, 16, 8}, 6);
  const FrameRenderer renderer(3, 40, 8, 6);
  const auto meanings = draw_meanings(100, 40, 6);
  double worst_partition = 0;
  for (int u = 0; u < 100; ++u) {
    const auto s = make_sentence(u, u % 3, meanings[u], 6);
    const auto fsq = renderer.render(s);
    const auto rec = forward(params, fsq).attention;
    std::vector<bool> in_word(fsq.length(), false);
    for (const auto& sp : fsq.alignment)
      for (int t = sp.start; t < sp.end; ++t) in_word[t] = true;
    double words = 0, silence = 0, total = 0;
    for (const auto& st : word_logit_sums(rec, fsq.alignment)) words += st.logit_sum;
    for (std::size_t t = 0; t < fsq.length(); ++t) {
      total += rec.logits[t];
      if (!in_word[t]) silence += rec.logits[t];
    }
    worst_partition = std::max(worst_partition, std::fabs(words + silence - total));
  }
  if (worst_partition > kPartitionTol) ++failures;

  // First-k report columns, through the command-line tool.
  testutil::TempDir d("acceptance-attn");
  bool report_ok =
      run_cli("gen-corpus --languages 2 --concepts 8 --sentences 5 --dim-in 4 --dim-embed 8 --out " +
              q(d / "c")) == 0 &&
      run_cli("train --manifest " + q(d / "c" / "manifest.tsv") + " --epochs 1 --out " + q(d / "m")) == 0 &&
      run_cli("attn --model " + q(d / "m" / "model.txt") + " --manifest " + q(d / "c" / "manifest.tsv") +
              " --first-k 5 --out " + q(d / "a")) == 0;
  if (report_ok) {
    const auto head = split(read_lines(d / "a" / "first_k.csv").at(0), ',');
    report_ok = std::find(head.begin(), head.end(), "mass_fraction") != head.end() &&
                std::find(head.begin(), head.end(), "frame_fraction") != head.end();
  }
  if (!report_ok) ++failures;

  return {failures == 0, "endpoint err " + fmt("%.1e", worst_endpoint) + ", partition err " +
                             fmt("%.1e", worst_partition) + ", uniform k/T off by 1 ulp in " +
                             std::to_string(not_exact) + " non-power-of-two cases, first-k columns " +
                             (report_ok ? "present" : "MISSING")};
}

// ---------------------------------------------------------------- 7

Outcome loss_contract() {
  SplitMix64 g(7);
  std::size_t violations = 0;
  double worst_scale = 0, worst_orth = 0;
  for (int n = 0; n < 1000; ++n) {
    const std::size_t d = 2 + g.below(63);
    Vector s(d), t(d);
    for (auto& x : s) x = g.normal() * (n % 3 == 0 ? 100.0 : 1.0);
    for (auto& x : t) x = g.normal();
    const double l = cosine_loss(s, t);
    if (!(l >= 0.0 && l <= 2.0)) ++violations;
    for (double c : {0.5, 2.0, 10.0}) {
      Vector ct = t;
      for (auto& x : ct) x *= c;
      worst_scale = std::max(worst_scale, std::fabs(cosine_loss(s, ct) - l));
    }
    worst_orth = std::max(worst_orth, std::fabs(dot(loss_grad(s, t), s)));
  }
  return {violations == 0 && worst_scale < kLossTol && worst_orth < kLossTol,
          "1000 pairs: " + std::to_string(violations) + " out of [0,2], max scale drift " + fmt("%.1e", worst_scale) +
              ", max |grad.s| " + fmt("%.1e", worst_orth)};
}

// ---------------------------------------------------------------- 8

Outcome determinism() {
  testutil::TempDir d("acceptance-det");
  auto pipeline = [&](const std::string& tag) {
    const auto root = d / tag;
    return run_cli("gen-corpus --languages 3 --concepts 16 --sentences 30 --dim-in 8 --dim-embed 8 --seed 11 "
                   "--out " + q(root / "corpus")) == 0 &&
           run_cli("train --manifest " + q(root / "corpus" / "manifest.tsv") +
                   " --dim-hidden 12 --epochs 3 --seed 11 --out " + q(root / "model")) == 0 &&
           run_cli("embed --model " + q(root / "model" / "model.txt") + " --manifest " +
                   q(root / "corpus" / "manifest.tsv") + " --out " + q(root / "emb")) == 0;
  };
  if (!pipeline("a") || !pipeline("b")) return {false, "pipeline command failed"};
  auto a = testutil::tree(d / "a" / "corpus"), b = testutil::tree(d / "b" / "corpus");
  a.erase("run.meta");  // records the output directory
  b.erase("run.meta");
  const bool corpus_same = a == b;
  const bool model_same =
      testutil::slurp(d / "a" / "model" / "model.txt") == testutil::slurp(d / "b" / "model" / "model.txt");
  const bool store_same = testutil::slurp(d / "a" / "emb" / "embeddings.emb") ==
                          testutil::slurp(d / "b" / "emb" / "embeddings.emb");
  return {corpus_same && model_same && store_same,
          std::string("manifest+frames ") + (corpus_same ? "identical" : "DIFFER") + " (" + std::to_string(a.size()) +
              " files), model " + (model_same ? "identical" : "DIFFERS") + ", store " +
              (store_same ? "identical" : "DIFFERS")};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  };

  EndToEnd e2e;
  bool trained = false;
  report(1, "gradient correctness", gradient_check);
  report(2, "alignment feasibility", [&] {
    auto o = alignment_feasibility(e2e);
    trained = true;
    return o;
  });
  report(3, "cross-lingual retrieval", [&]() -> Outcome {
    if (!trained) return {false, "no model from criterion 2"};
    return cross_lingual_retrieval(e2e);
  });
  report(4, "retrieval oracle", retrieval_oracle);
  report(5, "metrics oracle", metrics_oracle);
  report(6, "attention exactness", attention_exactness);
  report(7, "loss contract", loss_contract);
  report(8, "determinism", determinism);
  std::printf("%d of 8 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
