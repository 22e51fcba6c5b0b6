#include "sense/attention.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "sense/error.hpp"
#include "sense/textio.hpp"

namespace sense {

AttentionSource parse_attention_source(const std::string& s) {
  if (s == "logits") return AttentionSource::kLogits;
  if (s == "weights") return AttentionSource::kWeights;
  throw ConfigError("unknown attention source '" + s + "' (expected logits|weights)");
}

std::string to_string(AttentionSource s) { return s == AttentionSource::kLogits ? "logits" : "weights"; }

double relpos(std::size_t i, std::size_t T) {
  if (i >= T) throw DomainError("relpos: frame " + std::to_string(i) + " outside sequence of " + std::to_string(T));
  if (T == 1) return 0.0;
  return static_cast<double>(i) / static_cast<double>(T - 1);
}

Vector resample_profile(std::span<const double> values, std::size_t G) {
  if (values.empty()) throw DomainError("resample_profile: empty input");
  if (G < 2) throw DomainError("resample_profile: grid needs at least 2 points");
  const std::size_t T = values.size();
  Vector out(G);
  if (T == 1) {
    std::fill(out.begin(), out.end(), values[0]);
    return out;
  }
  for (std::size_t g = 0; g < G; ++g) {
    const double x = static_cast<double>(g) / static_cast<double>(G - 1);
    const double pos = x * static_cast<double>(T - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i >= T - 1) {
      out[g] = values[T - 1];
      continue;
    }
    const double f = pos - static_cast<double>(i);
    out[g] = values[i] + f * (values[i + 1] - values[i]);
  }
  return out;
}

PositionProfile average_profile(const std::vector<AttentionRecord>& records, AttentionSource source, std::size_t G) {
  if (records.empty()) throw DomainError("average_profile: no records");
  PositionProfile p;
  p.grid_size = G;
  p.values.assign(G, 0.0);
  for (const auto& r : records) {
    const auto& seq = source == AttentionSource::kLogits ? r.logits : r.weights;
    const auto rs = resample_profile(seq, G);
    for (std::size_t g = 0; g < G; ++g) p.values[g] += rs[g];
  }
  for (auto& v : p.values) v /= static_cast<double>(records.size());
  p.positions.resize(G);
  for (std::size_t g = 0; g < G; ++g) p.positions[g] = static_cast<double>(g) / static_cast<double>(G - 1);
  p.n_utterances = records.size();
  return p;
}

std::string PositionProfile::to_csv() const {
  std::string s = "position,value,n_utterances\n";
  for (std::size_t g = 0; g < values.size(); ++g)
    s += format_real(positions[g]) + ',' + format_real(values[g]) + ',' + std::to_string(n_utterances) + '\n';
  return s;
}

std::string PositionProfile::to_svg(const std::string& title) const {
  constexpr double kW = 640, kH = 360, kMargin = 48;
  double lo = values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
  double hi = values.empty() ? 1.0 : *std::max_element(values.begin(), values.end());
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto px = [&](double x) { return kMargin + x * (kW - 2 * kMargin); };
  auto py = [&](double y) { return kH - kMargin - (y - lo) / (hi - lo) * (kH - 2 * kMargin); };
  char buf[128];
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" viewBox=\"0 0 640 360\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + title +
       "</text>\n";
  std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", kMargin,
                kH - kMargin, kW - kMargin, kH - kMargin);
  s += buf;
  std::snprintf(buf, sizeof buf, "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", kMargin,
                kMargin, kMargin, kH - kMargin);
  s += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">%.3g</text>\n",
                kMargin - 4, py(hi) + 4, hi);
  s += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">%.3g</text>\n",
                kMargin - 4, py(lo) + 4, lo);
  s += buf;
  s += "<text x=\"320\" y=\"350\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       "normalized position</text>\n";
  s += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t g = 0; g < values.size(); ++g) {
    std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", g ? " " : "", px(positions[g]), py(values[g]));
    s += buf;
  }
  s += "\"/>\n</svg>\n";
  return s;
}

FirstKMass first_k_mass(const AttentionRecord& record, std::size_t k) {
  if (k < 1) throw DomainError("first_k_mass: k must be >= 1");
  const std::size_t T = record.weights.size();
  if (T == 0) throw DomainError("first_k_mass: empty record " + record.utt_id);
  const std::size_t n = std::min(k, T);
  // Neumaier-compensated: keeps uniform-weight sums within one ulp of k/T.
  double mass = 0.0, comp = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double w = record.weights[t];
    const double next = mass + w;
    comp += std::fabs(mass) >= std::fabs(w) ? (mass - next) + w : (w - next) + mass;
    mass = next;
  }
  mass += comp;
  return {std::clamp(mass, 0.0, 1.0), static_cast<double>(n) / static_cast<double>(T)};
}

FirstKMass mean_first_k_mass(const std::vector<AttentionRecord>& records, std::size_t k) {
  if (records.empty()) throw DomainError("first_k_mass: no records");
  FirstKMass m;
  for (const auto& r : records) {
    const auto f = first_k_mass(r, k);
    m.mass_fraction += f.mass_fraction;
    m.frame_fraction += f.frame_fraction;
  }
  m.mass_fraction /= static_cast<double>(records.size());
  m.frame_fraction /= static_cast<double>(records.size());
  return m;
}

std::vector<WordAttentionStat> word_logit_sums(const AttentionRecord& record, const std::vector<AlignSpan>& spans) {
  const auto T = static_cast<int>(record.logits.size());
  std::vector<WordAttentionStat> out;
  out.reserve(spans.size());
  for (const auto& sp : spans) {
    if (sp.start < 0 || sp.end > T || sp.start >= sp.end)
      throw DomainError("word span [" + std::to_string(sp.start) + ", " + std::to_string(sp.end) +
                        ") invalid for " + std::to_string(T) + " frames in " + record.utt_id);
    double sum = 0.0;
    for (int t = sp.start; t < sp.end; ++t) sum += record.logits[static_cast<std::size_t>(t)];
    out.push_back({sp.surface, record.utt_id, sum, sp.length()});
  }
  return out;
}

WordReports word_reports(const std::vector<WordAttentionStat>& stats, std::size_t top_n, std::size_t freq_n) {
  if (stats.empty()) throw DomainError("word_reports: no statistics");
  struct Acc {
    double max = -INFINITY;
    double sum = 0.0;
    std::size_t count = 0;
  };
  std::map<std::string, Acc> acc;
  for (const auto& s : stats) {
    auto& a = acc[s.word];
    a.max = std::max(a.max, s.logit_sum);
    a.sum += s.logit_sum;
    ++a.count;
  }

  WordReports r;
  for (const auto& [w, a] : acc) r.top_single.push_back({w, a.max, a.count});
  std::stable_sort(r.top_single.begin(), r.top_single.end(), [](const WordScore& x, const WordScore& y) {
    if (x.value != y.value) return x.value > y.value;
    return x.word < y.word;
  });
  if (r.top_single.size() > top_n) r.top_single.resize(top_n);

  for (const auto& [w, a] : acc) r.most_frequent.push_back({w, a.sum / static_cast<double>(a.count), a.count});
  std::stable_sort(r.most_frequent.begin(), r.most_frequent.end(), [](const WordScore& x, const WordScore& y) {
    if (x.count != y.count) return x.count > y.count;
    return x.word < y.word;
  });
  if (r.most_frequent.size() > freq_n) r.most_frequent.resize(freq_n);
  return r;
}

std::string word_stats_csv(const std::vector<WordAttentionStat>& stats) {
  std::string s = "word,utt_id,logit_sum,span_len\n";
  for (const auto& w : stats)
    s += w.word + ',' + w.utt_id + ',' + format_real(w.logit_sum) + ',' + std::to_string(w.span_len) + '\n';
  return s;
}

std::string top_words_csv(const std::vector<WordScore>& rows) {
  std::string s = "rank,word,max_logit_sum\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    s += std::to_string(i + 1) + ',' + rows[i].word + ',' + format_real(rows[i].value) + '\n';
  return s;
}

std::string frequent_words_csv(const std::vector<WordScore>& rows) {
  std::string s = "rank,word,occurrences,mean_logit_sum\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    s += std::to_string(i + 1) + ',' + rows[i].word + ',' + std::to_string(rows[i].count) + ',' +
         format_real(rows[i].value) + '\n';
  return s;
}

}  // namespace sense
