#include "sense/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "sense/error.hpp"
#include "sense/textio.hpp"

namespace sense {

void TagTable::add(char32_t opener, char32_t closer, std::string label) {
  if (label.empty()) throw ConfigError("tag table: empty label");
  if (openers_.count(opener) || closers_.count(opener))
    throw ConfigError("tag table: opener reused for label " + label);
  if (closers_.count(closer) || openers_.count(closer))
    throw ConfigError("tag table: closer reused for label " + label);
  openers_.emplace(opener, TagSpec{closer, label});
  closers_.emplace(closer, std::move(label));
}

const TagSpec* TagTable::opener(char32_t c) const {
  const auto it = openers_.find(c);
  return it == openers_.end() ? nullptr : &it->second;
}

TagTable TagTable::parse(const std::vector<std::string>& lines) {
  TagTable t;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], '\t');
    const std::string ctx = "tag table line " + std::to_string(i + 1);
    if (f.size() != 3) throw ConfigError("expected opener<TAB>closer<TAB>label in " + ctx);
    const auto open = decode_utf8(f[0]);
    const auto close = decode_utf8(f[1]);
    if (open.size() != 1 || close.size() != 1) throw ConfigError("delimiters must be single characters in " + ctx);
    t.add(open[0], close[0], std::string(trim(f[2])));
  }
  if (t.empty()) throw ConfigError("tag table is empty");
  return t;
}

TagTable TagTable::load(const std::filesystem::path& path) { return parse(read_lines(path)); }

std::vector<std::string> TaggedTranscript::labels() const {
  std::vector<std::string> out;
  out.reserve(slots.size());
  for (const auto& s : slots) out.push_back(s.label);
  return out;
}

std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (c < 0x80) cp = c;
    else if ((c & 0xE0) == 0xC0) extra = 1, cp = c & 0x1F;
    else if ((c & 0xF0) == 0xE0) extra = 2, cp = c & 0x0F;
    else if ((c & 0xF8) == 0xF0) extra = 3, cp = c & 0x07;
    else throw IoError("invalid UTF-8 lead byte at byte " + std::to_string(i));
    if (i + static_cast<std::size_t>(extra) >= s.size() && extra > 0)
      throw IoError("truncated UTF-8 sequence at byte " + std::to_string(i));
    for (int k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
      if ((cc & 0xC0) != 0x80) throw IoError("invalid UTF-8 continuation at byte " + std::to_string(i + k));
      cp = (cp << 6) | (cc & 0x3F);
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

std::string encode_utf8(std::u32string_view s) {
  std::string out;
  for (char32_t cp : s) {
    if (cp < 0x80) {
      out += static_cast<char>(cp);
    } else if (cp < 0x800) {
      out += static_cast<char>(0xC0 | (cp >> 6));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
      out += static_cast<char>(0xE0 | (cp >> 12));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
      out += static_cast<char>(0xF0 | (cp >> 18));
      out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
      out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
      out += static_cast<char>(0x80 | (cp & 0x3F));
    }
  }
  return out;
}

TaggedTranscript parse_tagged(const std::string& text, const TagTable& tags) {
  if (tags.empty()) throw ConfigError("parse_tagged: empty tag table");
  const std::u32string cps = decode_utf8(text);
  TaggedTranscript out;
  out.raw = text;
  std::u32string outside, inside;
  const TagSpec* open = nullptr;
  std::size_t open_at = 0;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (open && c == open->closer) {
      out.slots.push_back({open->label, std::string(trim(encode_utf8(inside)))});
      inside.clear();
      open = nullptr;
    } else if (const TagSpec* t = tags.opener(c)) {
      if (open) throw ParseError("nested tag opener", i);
      open = t;
      open_at = i;
    } else if (tags.is_closer(c)) {
      throw ParseError(open ? "mismatched tag closer" : "unbalanced tag closer", i);
    } else if (open) {
      inside.push_back(c);
    } else {
      outside.push_back(c);
    }
  }
  if (open) throw ParseError("unclosed tag opener", open_at);
  out.untagged = encode_utf8(outside);
  return out;
}

double ErrorBreakdown::rate() const {
  if (ref_count == 0) throw DomainError("error rate undefined for an empty reference");
  return 100.0 * static_cast<double>(errors()) / static_cast<double>(ref_count);
}

namespace {

template <typename Symbol>
ErrorBreakdown corpus_counts(const std::vector<std::vector<Symbol>>& refs,
                             const std::vector<std::vector<Symbol>>& hyps) {
  if (refs.size() != hyps.size())
    throw DomainError("reference and hypothesis corpora differ in length (" + std::to_string(refs.size()) +
                      " vs " + std::to_string(hyps.size()) + ")");
  std::vector<ErrorBreakdown> per_pair(refs.size());
  const auto n = static_cast<long>(refs.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    per_pair[k] = align_counts<Symbol>(std::span<const Symbol>(refs[k]), std::span<const Symbol>(hyps[k]));
  }
  ErrorBreakdown total;
  for (const auto& b : per_pair) total += b;
  if (total.ref_count == 0) throw DomainError("reference corpus contains no labels");
  return total;
}

}  // namespace

ErrorBreakdown label_error_rate(const std::vector<std::vector<std::string>>& refs,
                                const std::vector<std::vector<std::string>>& hyps) {
  return corpus_counts(refs, hyps);
}

ErrorBreakdown concept_value_error_rate(const std::vector<std::vector<Slot>>& refs,
                                        const std::vector<std::vector<Slot>>& hyps) {
  return corpus_counts(refs, hyps);
}

std::string SluScores::to_csv() const {
  std::string s = "metric,S,I,D,N,rate\n";
  for (const auto& [name, b] : rows) {
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.2f", b.rate());
    s += name + ',' + std::to_string(b.substitutions) + ',' + std::to_string(b.insertions) + ',' +
         std::to_string(b.deletions) + ',' + std::to_string(b.ref_count) + ',' + rate + '\n';
  }
  return s;
}

SluScores score_transcripts(const std::vector<std::string>& ref_lines, const std::vector<std::string>& hyp_lines,
                            const TagTable& tags, SluTask task) {
  if (ref_lines.size() != hyp_lines.size())
    throw DomainError("reference has " + std::to_string(ref_lines.size()) + " lines, hypothesis has " +
                      std::to_string(hyp_lines.size()));
  std::vector<std::vector<std::string>> ref_labels, hyp_labels;
  std::vector<std::vector<Slot>> ref_slots, hyp_slots;
  auto parse_line = [&](const std::string& line, const char* side, std::size_t i) {
    try {
      return parse_tagged(line, tags);
    } catch (const ParseError& e) {
      throw ParseError(std::string(side) + " line " + std::to_string(i + 1) + ": malformed tags", e.offset());
    }
  };
  for (std::size_t i = 0; i < ref_lines.size(); ++i) {
    auto r = parse_line(ref_lines[i], "reference", i);
    auto h = parse_line(hyp_lines[i], "hypothesis", i);
    ref_labels.push_back(r.labels());
    hyp_labels.push_back(h.labels());
    ref_slots.push_back(std::move(r.slots));
    hyp_slots.push_back(std::move(h.slots));
  }
  SluScores out;
  if (task == SluTask::kNer) {
    out.rows.emplace_back("NEER", label_error_rate(ref_labels, hyp_labels));
  } else {
    out.rows.emplace_back("COER", label_error_rate(ref_labels, hyp_labels));
    out.rows.emplace_back("CVER", concept_value_error_rate(ref_slots, hyp_slots));
  }
  return out;
}

}  // namespace sense
