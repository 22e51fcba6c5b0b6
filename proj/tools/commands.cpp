#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

#include "sense/attention.hpp"
#include "sense/corpus.hpp"
#include "sense/error.hpp"
#include "sense/metrics.hpp"
#include "sense/model.hpp"
#include "sense/retrieval.hpp"
#include "sense/rng.hpp"
#include "sense/textio.hpp"
#include "sense/training.hpp"

namespace sense::cli {

namespace fs = std::filesystem;

namespace {

struct OptionSpec {
  std::string key;  // settings key; the flag is --key with '_' -> '-'
  std::string default_value;
  std::string help;
  bool is_flag = false;
};

struct CommandSpec {
  std::string name;
  std::string help;
  std::vector<OptionSpec> options;
  std::function<int(const Settings&)> handler;
};

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

std::string normalize_key(std::string k) {
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

std::vector<CommandSpec> command_table() {
  return {
      {"gen-corpus",
       "Synthesize a multilingual paired corpus",
       {{"languages", "4", "number of languages (>= 2)"},
        {"concepts", "64", "concept vocabulary size (>= 8)"},
        {"sentences", "400", "meanings per language"},
        {"heldout", "0", "extra held-out meanings written to heldout.tsv"},
        {"dim_in", "16", "frame feature dimension"},
        {"dim_embed", "32", "teacher embedding dimension"},
        {"seed", "1", "random seed"},
        {"out", "", "output directory"}},
       cmd_gen_corpus},
      {"train",
       "Align the student encoder to the frozen teacher",
       {{"manifest", "", "training manifest"},
        {"heldout", "", "optional held-out manifest"},
        {"out", "", "output directory"},
        {"dim_hidden", "32", "frame encoder width d_h"},
        {"dim_attn", "0", "attention inner width d_a (0: same as d_h)"},
        {"epochs", "20", ""},
        {"batch_size", "2", ""},
        {"lr_encoder", "1e-3", "learning rate of W1, b1, W2, b2"},
        {"lr_pool", "1e-2", "learning rate of Wa, ba, v, P, bp"},
        {"beta1", "0.9", ""},
        {"beta2", "0.999", ""},
        {"eps", "1e-8", ""},
        {"seed", "1", "random seed"},
        {"checkpoint_every", "0", "write a checkpoint every N epochs (0: never)"}},
       cmd_train},
      {"embed",
       "Embed a manifest into a store file",
       {{"model", "", "model file (speech modality)"},
        {"manifest", "", "manifest to embed"},
        {"modality", "speech", "speech|text"},
        {"lang", "-1", "restrict to one language (-1: all)"},
        {"out", "", "output directory"}},
       cmd_embed},
      {"retrieve",
       "Score Recall@k between a query and a search store",
       {{"query", "", "query store file"},
        {"search", "", "search store file"},
        {"gold", "", "gold map file (default: match meaning ids)"},
        {"query_mod", "speech", "label for the query modality"},
        {"search_mod", "text", "label for the search modality"},
        {"k", "1", ""},
        {"center", "per-db", "per-db|joint|none"},
        {"out", "", "output directory"}},
       cmd_retrieve},
      {"retrieve-matrix",
       "Recall@k over every ordered language pair",
       {{"model", "", "model file"},
        {"manifest", "", "evaluation manifest"},
        {"modalities", "speech:speech,speech:text", "comma-separated query:search modality pairs"},
        {"k", "1", ""},
        {"center", "per-db", "per-db|joint|none"},
        {"out", "", "output directory"}},
       cmd_retrieve_matrix},
      {"attn",
       "Frame-level attention analysis",
       {{"model", "", "model file"},
        {"manifest", "", "manifest to analyze"},
        {"source", "logits", "logits|weights"},
        {"grid", "100", "profile grid size"},
        {"first_k", "5", "leading frames for the attention-mass statistic"},
        {"top_n", "10", "rows of the top single-utterance table"},
        {"freq_n", "10", "rows of the most-frequent-words table"},
        {"svg", "false", "also write profile.svg", true},
        {"out", "", "output directory"}},
       cmd_attn},
      {"slu-score",
       "NEER / COER / CVER of tagged transcripts",
       {{"ref", "", "reference transcripts, one per line"},
        {"hyp", "", "hypothesis transcripts, line-aligned with --ref"},
        {"tags", "", "tag table: opener<TAB>closer<TAB>label"},
        {"task", "slot", "slot|ner"},
        {"out", "", "output directory"}},
       cmd_slu_score},
  };
}

std::map<std::string, std::string> read_kv_file(const fs::path& path) {
  std::map<std::string, std::string> kv;
  std::vector<std::string> lines;
  try {
    lines = read_lines(path);
  } catch (const IoError& e) {
    throw IoError(std::string("config: ") + e.what());
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(path.string() + ":" + std::to_string(i + 1) + ": expected key=value");
    kv[normalize_key(std::string(trim(line.substr(0, eq))))] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

const std::string& require(const Settings& s, const std::string& key) {
  const auto it = s.find(key);
  if (it == s.end() || it->second.empty()) throw ConfigError("missing required setting " + flag_name(key));
  return it->second;
}

long long get_int(const Settings& s, const std::string& key) {
  try {
    return parse_int(require(s, key), key);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

double get_real(const Settings& s, const std::string& key) {
  try {
    return parse_real(require(s, key), key);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
}

std::uint64_t get_seed(const Settings& s) {
  const auto v = get_int(s, "seed");
  if (v < 0) throw ConfigError("--seed must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::string meta_string(const std::string& command, const Settings& s) {
  std::string m = "command=" + command + "\nversion=" + kVersion + '\n';
  for (const auto& [k, v] : s) m += k + '=' + v + '\n';
  return m;
}

fs::path prepare_out(const Settings& s, const std::string& command) {
  const fs::path out = require(s, "out");
  ensure_directory(out);
  write_file_atomic(out / "run.meta", meta_string(command, s));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_gen_corpus(const Settings& s) {
  CorpusSpec spec;
  spec.num_langs = static_cast<int>(get_int(s, "languages"));
  spec.num_concepts = static_cast<int>(get_int(s, "concepts"));
  spec.sentences_per_lang = static_cast<int>(get_int(s, "sentences"));
  spec.heldout_sentences = static_cast<int>(get_int(s, "heldout"));
  spec.d_in = static_cast<int>(get_int(s, "dim_in"));
  spec.d_e = static_cast<int>(get_int(s, "dim_embed"));
  spec.seed = get_seed(s);
  spec.validate();
  const auto out = prepare_out(s, "gen-corpus");
  const auto c = gen_corpus(spec, out);
  std::cerr << "wrote " << c.train.entries.size() << " training and " << c.heldout.entries.size()
            << " held-out utterances to " << out.string() << '\n';
  return kOk;
}

int cmd_train(const Settings& s) {
  TrainConfig cfg;
  cfg.epochs = static_cast<int>(get_int(s, "epochs"));
  cfg.batch_size = static_cast<int>(get_int(s, "batch_size"));
  cfg.lr_encoder = get_real(s, "lr_encoder");
  cfg.lr_pool = get_real(s, "lr_pool");
  cfg.beta1 = get_real(s, "beta1");
  cfg.beta2 = get_real(s, "beta2");
  cfg.eps = get_real(s, "eps");
  cfg.seed = get_seed(s);
  cfg.checkpoint_every = static_cast<int>(get_int(s, "checkpoint_every"));
  cfg.validate();

  const Manifest manifest = load_manifest(require(s, "manifest"));
  if (manifest.entries.empty()) throw ConfigError("training manifest is empty");
  ModelDims dims;
  dims.d_in = manifest.d_in;
  dims.d_e = manifest.d_e;
  dims.d_h = static_cast<int>(get_int(s, "dim_hidden"));
  const auto d_a = get_int(s, "dim_attn");
  dims.d_a = d_a == 0 ? dims.d_h : static_cast<int>(d_a);
  dims.validate();

  const auto out = prepare_out(s, "train");
  std::vector<TrainExample> heldout;
  TrainOptions opts;
  if (const auto it = s.find("heldout"); it != s.end() && !it->second.empty()) {
    heldout = load_examples(load_manifest(it->second));
    opts.heldout = &heldout;
  }
  opts.checkpoint_dir = out / "checkpoints";

  const auto params = init_params(dims, derive_seed(cfg.seed, "model"));
  auto result = train(cfg, manifest, params, opts);
  save_model(result.params, out / "model.txt");
  result.report.final_params_path = (out / "model.txt").string();
  write_file_atomic(out / "train_report.csv", result.report.to_csv());
  const auto& last = result.report.epochs.back();
  std::fprintf(stderr, "epoch %d: mean loss %.6f, held-out mean cosine %.6f\n", last.epoch, last.mean_loss,
               last.heldout_mean_cosine);
  return kOk;
}

int cmd_embed(const Settings& s) {
  const Modality mod = parse_modality(require(s, "modality"));
  Manifest manifest = load_manifest(require(s, "manifest"));
  const auto lang = get_int(s, "lang");
  if (lang >= 0) manifest = filter_language(manifest, static_cast<int>(lang));
  ModelParams params;
  if (mod == Modality::kSpeech) {
    params = load_model(require(s, "model"));
    if (params.dims.d_in != manifest.d_in)
      throw ConfigError("model d_in " + std::to_string(params.dims.d_in) + " does not match manifest d_in " +
                        std::to_string(manifest.d_in));
  }
  const auto out = prepare_out(s, "embed");
  save_store(embed_manifest(params, manifest, mod), out / "embeddings.emb");
  return kOk;
}

int cmd_retrieve(const Settings& s) {
  const auto k = get_int(s, "k");
  if (k < 1) throw ConfigError("--k must be >= 1");
  const Centering centering = parse_centering(require(s, "center"));
  const auto query = load_store(require(s, "query"));
  const auto search = load_store(require(s, "search"));
  GoldMap gold;
  if (const auto it = s.find("gold"); it != s.end() && !it->second.empty())
    gold = load_gold(it->second);
  else
    gold = gold_by_meaning(query, search);
  if (gold.empty()) throw ConfigError("no gold pairs between the query and search stores");

  RetrievalRow row;
  row.query_lang = language_label(query);
  row.query_mod = require(s, "query_mod");
  row.search_lang = language_label(search);
  row.search_mod = require(s, "search_mod");
  row.n_query = query.size();
  row.n_search = search.size();
  row.k = static_cast<std::size_t>(k);
  row.recall = recall_at_k(query, search, gold, row.k, centering);

  const auto out = prepare_out(s, "retrieve");
  write_file_atomic(out / "retrieval.csv", retrieval_csv({row}));
  std::fprintf(stderr, "R@%lld = %.2f\n", k, row.recall);
  return kOk;
}

int cmd_retrieve_matrix(const Settings& s) {
  const auto k = get_int(s, "k");
  if (k < 1) throw ConfigError("--k must be >= 1");
  const Centering centering = parse_centering(require(s, "center"));
  std::vector<std::pair<Modality, Modality>> pairs;
  for (const auto& p : split(require(s, "modalities"), ',')) {
    const auto qs = split(p, ':');
    if (qs.size() != 2) throw ConfigError("bad modality pair '" + p + "'");
    pairs.emplace_back(parse_modality(qs[0]), parse_modality(qs[1]));
  }
  const auto params = load_model(require(s, "model"));
  const Manifest manifest = load_manifest(require(s, "manifest"));

  std::vector<Manifest> by_lang;
  for (int l = 0; l < manifest.num_langs; ++l) by_lang.push_back(filter_language(manifest, l));
  std::vector<Scenario> scenarios;
  for (const auto& [qm, sm] : pairs)
    for (int ql = 0; ql < manifest.num_langs; ++ql)
      for (int sl = 0; sl < manifest.num_langs; ++sl) {
        if (ql == sl || by_lang[ql].entries.empty() || by_lang[sl].entries.empty()) continue;
        scenarios.push_back({&by_lang[static_cast<std::size_t>(ql)], qm, &by_lang[static_cast<std::size_t>(sl)], sm, {}});
      }
  const auto rows = retrieval_matrix(scenarios, params, static_cast<std::size_t>(k), centering);
  const auto out = prepare_out(s, "retrieve-matrix");
  write_file_atomic(out / "retrieval_matrix.csv", retrieval_csv(rows));
  return kOk;
}

int cmd_attn(const Settings& s) {
  const AttentionSource source = parse_attention_source(require(s, "source"));
  const auto grid = get_int(s, "grid");
  const auto first_k = get_int(s, "first_k");
  const auto top_n = get_int(s, "top_n");
  const auto freq_n = get_int(s, "freq_n");
  if (grid < 2) throw ConfigError("--grid must be >= 2");
  if (first_k < 1) throw ConfigError("--first-k must be >= 1");
  if (top_n < 1 || freq_n < 1) throw ConfigError("--top-n and --freq-n must be >= 1");
  const bool svg = require(s, "svg") == "true";

  const auto params = load_model(require(s, "model"));
  const Manifest manifest = load_manifest(require(s, "manifest"));
  if (manifest.entries.empty()) throw ConfigError("manifest has no entries");

  std::vector<AttentionRecord> records(manifest.entries.size());
  std::vector<std::vector<WordAttentionStat>> per_utt(manifest.entries.size());
  const auto n = static_cast<long>(records.size());
  std::exception_ptr err;
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    try {
      const auto idx = static_cast<std::size_t>(i);
      const auto fsq = load_utterance(manifest, manifest.entries[idx]);
      records[idx] = forward(params, fsq).attention;
      per_utt[idx] = word_logit_sums(records[idx], fsq.alignment);
    } catch (...) {
#pragma omp critical(sense_attn_error)
      if (!err) err = std::current_exception();
    }
  }
  if (err) std::rethrow_exception(err);

  std::vector<WordAttentionStat> stats;
  for (auto& v : per_utt) stats.insert(stats.end(), v.begin(), v.end());

  const auto profile = average_profile(records, source, static_cast<std::size_t>(grid));
  const auto reports = word_reports(stats, static_cast<std::size_t>(top_n), static_cast<std::size_t>(freq_n));

  std::string fk = "utt_id,k,T,mass_fraction,frame_fraction\n";
  for (const auto& r : records) {
    const auto m = first_k_mass(r, static_cast<std::size_t>(first_k));
    fk += r.utt_id + ',' + std::to_string(first_k) + ',' + std::to_string(r.weights.size()) + ',' +
          format_real(m.mass_fraction) + ',' + format_real(m.frame_fraction) + '\n';
  }
  const auto mean = mean_first_k_mass(records, static_cast<std::size_t>(first_k));
  fk += "__mean__," + std::to_string(first_k) + ",," + format_real(mean.mass_fraction) + ',' +
        format_real(mean.frame_fraction) + '\n';

  const auto out = prepare_out(s, "attn");
  write_file_atomic(out / "profile.csv", profile.to_csv());
  if (svg)
    write_file_atomic(out / "profile.svg", profile.to_svg("Average attention " + to_string(source) +
                                                          " (normalized position)"));
  write_file_atomic(out / "word_stats.csv", word_stats_csv(stats));
  write_file_atomic(out / "top_words.csv", top_words_csv(reports.top_single));
  write_file_atomic(out / "frequent_words.csv", frequent_words_csv(reports.most_frequent));
  write_file_atomic(out / "first_k.csv", fk);
  std::fprintf(stderr, "first %lld frames: %.2f%% of attention mass, %.2f%% of frames\n", first_k,
               100.0 * mean.mass_fraction, 100.0 * mean.frame_fraction);
  return kOk;
}

int cmd_slu_score(const Settings& s) {
  const std::string task = require(s, "task");
  if (task != "slot" && task != "ner") throw ConfigError("--task must be slot or ner");
  const auto tags = TagTable::load(require(s, "tags"));
  const auto refs = read_lines(require(s, "ref"));
  const auto hyps = read_lines(require(s, "hyp"));
  const auto scores = score_transcripts(refs, hyps, tags, task == "ner" ? SluTask::kNer : SluTask::kSlotFilling);
  const auto out = prepare_out(s, "slu-score");
  write_file_atomic(out / "slu_scores.csv", scores.to_csv());
  for (const auto& [name, b] : scores.rows) std::fprintf(stderr, "%s = %.2f\n", name.c_str(), b.rate());
  return kOk;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Teacher-student speech/text embedding alignment toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  const auto table = command_table();
  struct Bound {
    const CommandSpec* spec;
    CLI::App* sub;
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    std::map<std::string, CLI::Option*> opts;
    std::string config;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& cmd : table) {
    auto b = std::make_unique<Bound>();
    b->spec = &cmd;
    b->sub = app.add_subcommand(cmd.name, cmd.help);
    b->sub->add_option("--config", b->config, "key=value settings file (flags override it)");
    for (const auto& o : cmd.options) {
      const std::string desc = o.help + (o.default_value.empty() ? "" : " [" + o.default_value + "]");
      if (o.is_flag)
        b->opts[o.key] = b->sub->add_flag(flag_name(o.key), b->flags[o.key], desc);
      else
        b->opts[o.key] = b->sub->add_option(flag_name(o.key), b->values[o.key], desc);
    }
    bound.push_back(std::move(b));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  for (const auto& b : bound) {
    if (!b->sub->parsed()) continue;
    try {
      Settings s;
      for (const auto& o : b->spec->options) s[o.key] = o.default_value;
      if (!b->config.empty()) {
        for (const auto& [k, v] : read_kv_file(b->config)) {
          if (k == "version" || k == "config") continue;
          if (k == "command") {
            if (v != b->spec->name) throw ConfigError("config file is for command '" + v + "'");
            continue;
          }
          if (!s.count(k)) throw ConfigError("unknown setting '" + k + "' for " + b->spec->name);
          s[k] = v;
        }
      }
      for (const auto& o : b->spec->options) {
        if (b->opts[o.key]->count() == 0) continue;
        s[o.key] = o.is_flag ? (b->flags[o.key] ? "true" : "false") : b->values[o.key];
      }
      return b->spec->handler(s);
    } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kConfigError;
    } catch (const IoError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kIoError;
    } catch (const NumericError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kNumericError;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kConfigError;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kFailure;
    }
  }
  return kFailure;
}

}  // namespace sense::cli
