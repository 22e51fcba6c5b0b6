#pragma once

#include <map>
#include <string>
#include <vector>

namespace sense::cli {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kIoError = 3,
  kNumericError = 4,
};

/// Resolved key=value settings for one subcommand.
using Settings = std::map<std::string, std::string>;

int run(int argc, char** argv);

int cmd_gen_corpus(const Settings& s);
int cmd_train(const Settings& s);
int cmd_embed(const Settings& s);
int cmd_retrieve(const Settings& s);
int cmd_retrieve_matrix(const Settings& s);
int cmd_attn(const Settings& s);
int cmd_slu_score(const Settings& s);

}  // namespace sense::cli
