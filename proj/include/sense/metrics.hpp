#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sense {

struct TagSpec {
  char32_t closer = 0;
  std::string label;
};

/// opener code point -> (closer, label).
class TagTable {
 public:
  void add(char32_t opener, char32_t closer, std::string label);

  bool empty() const noexcept { return openers_.empty(); }
  const TagSpec* opener(char32_t c) const;
  bool is_closer(char32_t c) const { return closers_.count(c) != 0; }

  /// Lines `opener<TAB>closer<TAB>label`, each delimiter a single character.
  static TagTable parse(const std::vector<std::string>& lines);
  static TagTable load(const std::filesystem::path& path);

 private:
  std::map<char32_t, TagSpec> openers_;
  std::map<char32_t, std::string> closers_;
};

struct Slot {
  std::string label;
  std::string value;
  friend bool operator==(const Slot&, const Slot&) = default;
  friend auto operator<=>(const Slot&, const Slot&) = default;
};

struct TaggedTranscript {
  std::string raw;
  std::vector<Slot> slots;  // surface order
  std::string untagged;     // text outside every tag

  std::vector<std::string> labels() const;
};

/// Decodes UTF-8; IoError on malformed input.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);

/// Slot values are the enclosed text with surrounding whitespace trimmed.
/// ParseError carries the code-point offset of the offending character.
TaggedTranscript parse_tagged(const std::string& text, const TagTable& tags);

struct ErrorBreakdown {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t ref_count = 0;

  std::size_t errors() const noexcept { return substitutions + insertions + deletions; }
  /// 100 (S+I+D) / N. DomainError when N = 0.
  double rate() const;

  ErrorBreakdown& operator+=(const ErrorBreakdown& o) noexcept {
    substitutions += o.substitutions;
    insertions += o.insertions;
    deletions += o.deletions;
    ref_count += o.ref_count;
    return *this;
  }
  friend bool operator==(const ErrorBreakdown&, const ErrorBreakdown&) = default;
};

/// Unit-cost Levenshtein alignment. Among optimal paths the backtrace
/// prefers deletion, then insertion, then the diagonal move.
template <typename Symbol>
ErrorBreakdown align_counts(std::span<const Symbol> ref, std::span<const Symbol> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> dist((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dist[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({at(i - 1, j) + 1, at(i, j - 1) + 1, diag});
    }

  ErrorBreakdown b;
  b.ref_count = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++b.deletions;
      --i;
    } else if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++b.insertions;
      --j;
    } else {
      if (!(ref[i - 1] == hyp[j - 1])) ++b.substitutions;
      --i;
      --j;
    }
  }
  return b;
}

/// Corpus-level label error rate (NEER over entity labels, COER over concept labels).
ErrorBreakdown label_error_rate(const std::vector<std::vector<std::string>>& refs,
                                const std::vector<std::vector<std::string>>& hyps);

/// CVER: the symbol is the exact (label, value) pair.
ErrorBreakdown concept_value_error_rate(const std::vector<std::vector<Slot>>& refs,
                                        const std::vector<std::vector<Slot>>& hyps);

enum class SluTask { kSlotFilling, kNer };

struct SluScores {
  std::vector<std::pair<std::string, ErrorBreakdown>> rows;  // metric name, breakdown
  std::string to_csv() const;
};

/// Parses line-aligned reference and hypothesis transcripts and scores them:
/// NER -> NEER; slot filling -> COER and CVER.
SluScores score_transcripts(const std::vector<std::string>& ref_lines, const std::vector<std::string>& hyp_lines,
                            const TagTable& tags, SluTask task);

}  // namespace sense
