#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>

#include "sense/textio.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using testutil::TempDir;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SENSE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small corpus + 2-epoch model shared by the tests below.
struct Fixture {
  TempDir dir{"cli"};
  fs::path corpus = dir / "corpus";
  fs::path model_dir = dir / "model";

  Fixture() {
    REQUIRE(run_cli("gen-corpus --languages 2 --concepts 12 --sentences 20 --heldout 8 --dim-in 6 --dim-embed 8 "
                  "--seed 5 --out " + q(corpus)) == 0);
    REQUIRE(run_cli("train --manifest " + q(corpus / "manifest.tsv") + " --heldout " + q(corpus / "heldout.tsv") +
                  " --dim-hidden 10 --epochs 2 --out " + q(model_dir)) == 0);
  }
};

}  // namespace

TEST_CASE("exit codes") {
  TempDir d("cli-codes");
  CHECK(run_cli("") == 2);
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("gen-corpus --languages 1 --out " + q(d / "c")) == 2);
  CHECK(run_cli("gen-corpus --languages two --out " + q(d / "c")) == 2);
  CHECK(run_cli("gen-corpus") == 2);
  CHECK(run_cli("train --manifest " + q(d / "missing.tsv") + " --out " + q(d / "m")) == 3);
  CHECK(run_cli("--version") == 0);

  // A corrupted frame value makes the loss non-finite.
  REQUIRE(run_cli("gen-corpus --languages 2 --concepts 8 --sentences 3 --dim-in 4 --dim-embed 8 --out " + q(d / "c")) ==
          0);
  const auto frames = d / "c" / "frames" / "m000001-l00.frames";
  auto lines = sense::read_lines(frames);
  lines[3] = "nan" + lines[3].substr(lines[3].find(' '));
  std::string body;
  for (const auto& l : lines) body += l + '\n';
  testutil::spit(frames, body);
  CHECK(run_cli("train --manifest " + q(d / "c" / "manifest.tsv") + " --epochs 1 --out " + q(d / "m")) == 4);
}

TEST_CASE("pipeline is deterministic and leaves its inputs untouched") {
  Fixture a, b;
  // run.meta records the output path, everything else must match.
  auto ta = testutil::tree(a.corpus), tb = testutil::tree(b.corpus);
  CHECK(ta.erase("run.meta") == 1);
  CHECK(tb.erase("run.meta") == 1);
  CHECK(ta == tb);
  CHECK(testutil::slurp(a.model_dir / "model.txt") == testutil::slurp(b.model_dir / "model.txt"));
  CHECK(testutil::slurp(a.model_dir / "train_report.csv") == testutil::slurp(b.model_dir / "train_report.csv"));

  const auto before = testutil::tree(a.corpus);
  const auto model_before = testutil::slurp(a.model_dir / "model.txt");
  for (Fixture* f : {&a, &b})
    REQUIRE(run_cli("embed --model " + q(f->model_dir / "model.txt") + " --manifest " +
                  q(f->corpus / "heldout.tsv") + " --out " + q(f->dir / "emb")) == 0);
  CHECK(testutil::slurp(a.dir / "emb" / "embeddings.emb") == testutil::slurp(b.dir / "emb" / "embeddings.emb"));
  REQUIRE(run_cli("attn --model " + q(a.model_dir / "model.txt") + " --manifest " + q(a.corpus / "manifest.tsv") +
                " --out " + q(a.dir / "attn")) == 0);
  CHECK(testutil::tree(a.corpus) == before);
  CHECK(testutil::slurp(a.model_dir / "model.txt") == model_before);
}

TEST_CASE("commands") {
  Fixture f;
  const auto model = f.model_dir / "model.txt";

  SUBCASE("train report") {
    const auto lines = sense::read_lines(f.model_dir / "train_report.csv");
    CHECK(lines[0] == "epoch,mean_loss,heldout_mean_cosine");
    CHECK(lines.size() == 3);
    CHECK(lines[2].find("nan") == std::string::npos);
  }
  SUBCASE("self retrieval gives 100") {
    REQUIRE(run_cli("embed --modality text --manifest " + q(f.corpus / "heldout.tsv") + " --out " + q(f.dir / "t")) ==
            0);
    const auto store = f.dir / "t" / "embeddings.emb";
    REQUIRE(run_cli("retrieve --query " + q(store) + " --search " + q(store) + " --out " + q(f.dir / "r")) == 0);
    const auto lines = sense::read_lines(f.dir / "r" / "retrieval.csv");
    CHECK(lines[0] == "query_lang,query_mod,search_lang,search_mod,n_query,n_search,k,recall");
    CHECK(lines[1] == "0+1,speech,0+1,text,16,16,1,100.00");
  }
  SUBCASE("retrieval matrix") {
    REQUIRE(run_cli("retrieve-matrix --model " + q(model) + " --manifest " + q(f.corpus / "heldout.tsv") +
                  " --out " + q(f.dir / "rm")) == 0);
    const auto lines = sense::read_lines(f.dir / "rm" / "retrieval_matrix.csv");
    CHECK(lines.size() == 5);  // header + 2 modality pairs x 2 ordered language pairs
    CHECK(run_cli("retrieve-matrix --model " + q(model) + " --manifest " + q(f.corpus / "heldout.tsv") +
                " --modalities speech:video --out " + q(f.dir / "rm2")) == 2);
  }
  SUBCASE("attention outputs") {
    REQUIRE(run_cli("attn --model " + q(model) + " --manifest " + q(f.corpus / "manifest.tsv") +
                  " --first-k 5 --svg --grid 20 --out " + q(f.dir / "a")) == 0);
    const auto fk = sense::read_lines(f.dir / "a" / "first_k.csv");
    CHECK(fk[0] == "utt_id,k,T,mass_fraction,frame_fraction");
    CHECK(fk.back().rfind("__mean__,5,,", 0) == 0);
    CHECK(fk.size() == 42);
    CHECK(sense::read_lines(f.dir / "a" / "profile.csv").size() == 21);
    CHECK(fs::exists(f.dir / "a" / "profile.svg"));
    CHECK(sense::read_lines(f.dir / "a" / "top_words.csv").size() == 11);
    CHECK(sense::read_lines(f.dir / "a" / "word_stats.csv")[0] == "word,utt_id,logit_sum,span_len");
  }
  SUBCASE("slu-score identity") {
    testutil::spit(f.dir / "tags.tsv", "<\t>\tcity\n[\t]\tdate\n");
    testutil::spit(f.dir / "ref.txt", "va à <Paris> [lundi]\n<Lyon> demain\n");
    REQUIRE(run_cli("slu-score --ref " + q(f.dir / "ref.txt") + " --hyp " + q(f.dir / "ref.txt") + " --tags " +
                  q(f.dir / "tags.tsv") + " --out " + q(f.dir / "s")) == 0);
    const auto lines = sense::read_lines(f.dir / "s" / "slu_scores.csv");
    CHECK(lines[1] == "COER,0,0,0,3,0.00");
    CHECK(lines[2] == "CVER,0,0,0,3,0.00");
    testutil::spit(f.dir / "bad.txt", "va à <Paris\n<Lyon> demain\n");
    CHECK(run_cli("slu-score --ref " + q(f.dir / "ref.txt") + " --hyp " + q(f.dir / "bad.txt") + " --tags " +
                q(f.dir / "tags.tsv") + " --out " + q(f.dir / "s2")) == 2);
  }
  SUBCASE("run.meta reproduces a run") {
    const auto meta = sense::read_lines(f.model_dir / "run.meta");
    CHECK(meta[0] == "command=train");
    CHECK(meta[1] == "version=1.0.0");
    REQUIRE(run_cli("train --config " + q(f.model_dir / "run.meta") + " --out " + q(f.dir / "again")) == 0);
    CHECK(testutil::slurp(f.dir / "again" / "model.txt") == testutil::slurp(model));
    // Flags override the config file.
    REQUIRE(run_cli("train --config " + q(f.model_dir / "run.meta") + " --epochs 1 --out " + q(f.dir / "one")) == 0);
    CHECK(sense::read_lines(f.dir / "one" / "train_report.csv").size() == 2);
    CHECK(run_cli("embed --config " + q(f.model_dir / "run.meta") + " --out " + q(f.dir / "x")) == 2);
  }
}
