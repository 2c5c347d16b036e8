#include "cct/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "cct/errors.hpp"

namespace cct {

namespace {

constexpr int kMaxOrder = 4;

TokenSeq lowercased(const TokenSeq& tokens) {
  TokenSeq out = tokens;
  for (std::string& t : out) {
    for (char& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

using NgramCounts = std::unordered_map<std::string, std::int64_t>;

NgramCounts ngram_counts(const TokenSeq& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string key;
    for (int k = 0; k < n; ++k) {
      if (k > 0) key.push_back('\x1f');
      key += tokens[i + static_cast<std::size_t>(k)];
    }
    ++counts[key];
  }
  return counts;
}

double brevity_penalty(std::size_t hyp_len, std::size_t ref_len) {
  if (hyp_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
}

// Shared BLEU/GLEU combination: per-order numerator/denominator pairs,
// +1/+1 smoothing for orders >= 2, geometric mean, brevity penalty.
double combine_precisions(const std::array<std::int64_t, kMaxOrder>& numer,
                          const std::array<std::int64_t, kMaxOrder>& denom, std::size_t hyp_len,
                          std::size_t ref_len) {
  double log_sum = 0.0;
  for (int n = 1; n <= kMaxOrder; ++n) {
    double num = static_cast<double>(numer[static_cast<std::size_t>(n - 1)]);
    double den = static_cast<double>(denom[static_cast<std::size_t>(n - 1)]);
    if (n >= 2) {
      num += 1.0;
      den += 1.0;
    }
    if (num <= 0.0 || den <= 0.0) return 0.0;
    log_sum += std::log(num / den);
  }
  return 100.0 * brevity_penalty(hyp_len, ref_len) * std::exp(log_sum / kMaxOrder);
}

double bleu_core(const TokenSeq& hyp, const TokenSeq& ref) {
  if (ref.empty()) throw DataError("bleu: reference must be non-empty");
  if (hyp.empty()) return 0.0;
  std::array<std::int64_t, kMaxOrder> numer{};
  std::array<std::int64_t, kMaxOrder> denom{};
  for (int n = 1; n <= kMaxOrder; ++n) {
    const NgramCounts h = ngram_counts(hyp, n);
    const NgramCounts r = ngram_counts(ref, n);
    std::int64_t matched = 0;
    std::int64_t total = 0;
    for (const auto& [g, c] : h) {
      total += c;
      auto it = r.find(g);
      if (it != r.end()) matched += std::min(c, it->second);
    }
    numer[static_cast<std::size_t>(n - 1)] = matched;
    denom[static_cast<std::size_t>(n - 1)] = total;
  }
  return combine_precisions(numer, denom, hyp.size(), ref.size());
}

}  // namespace

double bleu_smoothed(const TokenSeq& hypothesis, const TokenSeq& reference) { return bleu_core(hypothesis, reference); }

double bleu_bnorm(const TokenSeq& hypothesis, const TokenSeq& reference) {
  return bleu_core(lowercased(hypothesis), lowercased(reference));
}

double gleu(const TokenSeq& source, const TokenSeq& hypothesis, const TokenSeq& reference) {
  if (reference.empty()) throw DataError("gleu: reference must be non-empty");
  if (hypothesis.empty()) return 0.0;
  std::array<std::int64_t, kMaxOrder> numer{};
  std::array<std::int64_t, kMaxOrder> denom{};
  for (int n = 1; n <= kMaxOrder; ++n) {
    const NgramCounts h = ngram_counts(hypothesis, n);
    const NgramCounts r = ngram_counts(reference, n);
    const NgramCounts s = ngram_counts(source, n);
    std::int64_t matched = 0;
    std::int64_t total = 0;
    std::int64_t copied_penalty = 0;
    for (const auto& [g, c] : h) {
      total += c;
      auto rit = r.find(g);
      if (rit != r.end()) matched += std::min(c, rit->second);
      auto sit = s.find(g);
      if (sit != s.end() && rit == r.end()) copied_penalty += std::min(c, sit->second);
    }
    numer[static_cast<std::size_t>(n - 1)] = std::max<std::int64_t>(0, matched - copied_penalty);
    denom[static_cast<std::size_t>(n - 1)] = total;
  }
  return combine_precisions(numer, denom, hypothesis.size(), reference.size());
}

double exact_match_accuracy(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references) {
  if (hypotheses.size() != references.size()) throw DataError("accuracy: list lengths differ");
  if (hypotheses.empty()) throw DataError("accuracy: empty input");
  std::size_t equal = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    if (hypotheses[i] == references[i]) ++equal;
  }
  return static_cast<double>(equal) / static_cast<double>(hypotheses.size());
}

double f1_binary(const std::vector<bool>& predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size()) throw DataError("f1: list lengths differ");
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] && labels[i]) ++tp;
    if (predictions[i] && !labels[i]) ++fp;
    if (!predictions[i] && labels[i]) ++fn;
  }
  const double precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

// Average ranks (1-based) with ties sharing the mean rank of their block.
std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

double auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) throw DataError("auc: list lengths differ");
  std::size_t positives = 0;
  for (bool l : labels) positives += l ? 1 : 0;
  const std::size_t negatives = labels.size() - positives;
  if (positives == 0 || negatives == 0) throw DataError("auc: needs at least one positive and one negative label");

  const std::vector<double> ranks = average_ranks(scores);
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) rank_sum_pos += ranks[i];
  }
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("wilcoxon: list lengths differ");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw DataError("wilcoxon: all differences are zero");
  const std::size_t n = diffs.size();
  if (n < 6) throw DataError("wilcoxon: needs at least 6 non-zero differences");

  std::vector<double> abs_diffs(n);
  for (std::size_t i = 0; i < n; ++i) abs_diffs[i] = std::abs(diffs[i]);
  const std::vector<double> ranks = average_ranks(abs_diffs);

  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) w_plus += ranks[i];
  }

  WilcoxonResult result;
  result.statistic = w_plus;
  result.n = n;

  if (n <= 25) {
    // Exact null distribution via subset-sum counting over doubled ranks
    // (doubling makes half-integer tie ranks integral).
    std::vector<std::int64_t> doubled(n);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = static_cast<std::int64_t>(std::llround(2.0 * ranks[i]));
      total += doubled[i];
    }
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::int64_t s = total; s >= doubled[i]; --s) {
        ways[static_cast<std::size_t>(s)] += ways[static_cast<std::size_t>(s - doubled[i])];
      }
    }
    const double mu2 = static_cast<double>(total) / 2.0;
    const double dev_obs = std::abs(2.0 * w_plus - mu2);
    double count = 0.0;
    for (std::int64_t s = 0; s <= total; ++s) {
      if (std::abs(static_cast<double>(s) - mu2) >= dev_obs - 1e-9) count += ways[static_cast<std::size_t>(s)];
    }
    result.p_value = count / std::pow(2.0, static_cast<double>(n));
  } else {
    const double dn = static_cast<double>(n);
    const double mu = dn * (dn + 1.0) / 4.0;
    double tie_term = 0.0;
    std::vector<double> sorted_abs = abs_diffs;
    std::sort(sorted_abs.begin(), sorted_abs.end());
    std::size_t i = 0;
    while (i < sorted_abs.size()) {
      std::size_t j = i;
      while (j + 1 < sorted_abs.size() && sorted_abs[j + 1] == sorted_abs[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += (t * t * t - t);
      i = j + 1;
    }
    const double sigma2 = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie_term / 48.0;
    const double sigma = std::sqrt(sigma2);
    double z = 0.0;
    if (w_plus > mu) {
      z = (w_plus - mu - 0.5) / sigma;
    } else if (w_plus < mu) {
      z = (w_plus - mu + 0.5) / sigma;
    }
    result.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(std::abs(z))));
  }
  return result;
}

MetricReport MetricReport::sentence_level(std::string name, std::vector<double> scores) {
  MetricReport r;
  r.metric = std::move(name);
  r.example_count = scores.size();
  r.aggregate = scores.empty() ? 0.0 : std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  r.per_example = std::move(scores);
  return r;
}

MetricReport MetricReport::corpus_level(std::string name, double value, std::size_t count) {
  MetricReport r;
  r.metric = std::move(name);
  r.aggregate = value;
  r.example_count = count;
  return r;
}

void write_reports_csv(const std::string& path, const std::vector<std::string>& example_ids,
                       const std::vector<MetricReport>& reports) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report CSV: " + path);
  out << "example_id,metric,score\n";
  for (const MetricReport& r : reports) {
    for (std::size_t i = 0; i < r.per_example.size(); ++i) {
      const std::string& id = i < example_ids.size() ? example_ids[i] : std::to_string(i);
      out << id << ',' << r.metric << ',' << r.per_example[i] << '\n';
    }
  }
}

void write_reports_json(const std::string& path, const std::vector<MetricReport>& reports) {
  nlohmann::ordered_json j;
  for (const MetricReport& r : reports) {
    j[r.metric] = {{"aggregate", r.aggregate}, {"example_count", r.example_count}};
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report JSON: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace cct
