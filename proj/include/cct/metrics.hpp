#ifndef CCT_METRICS_HPP
#define CCT_METRICS_HPP

#include <string>
#include <vector>

namespace cct {

using TokenSeq = std::vector<std::string>;

// Case-insensitive smoothed sentence-level BLEU-4 in [0,100]: both sides are
// lowercased, clipped n-gram matches get +1/+1 smoothing for n >= 2, and the
// usual brevity penalty applies. Empty hypothesis scores 0.
double bleu_bnorm(const TokenSeq& hypothesis, const TokenSeq& reference);

// Case-sensitive variant of the same smoothed BLEU-4 (no source penalty);
// gleu() with source == reference reduces to exactly this.
double bleu_smoothed(const TokenSeq& hypothesis, const TokenSeq& reference);

// GLEU in [0,100] for edit tasks: n-gram precision is debited by n-grams the
// hypothesis copied from the source that the reference dropped, floored at
// zero, then smoothed and combined like BLEU. Case-sensitive.
double gleu(const TokenSeq& source, const TokenSeq& hypothesis, const TokenSeq& reference);

// Fraction of positions where hypothesis and reference token sequences are
// exactly equal (case-sensitive).
double exact_match_accuracy(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references);

// F1 with `true` as the positive class; 0 when precision+recall is 0.
double f1_binary(const std::vector<bool>& predictions, const std::vector<bool>& labels);

// Rank-based (Mann-Whitney) AUC; ties count one half. Throws DataError
// unless both classes are present.
double auc(const std::vector<double>& scores, const std::vector<bool>& labels);

// Two-sided Wilcoxon signed-rank test. Zero differences are dropped; ties in
// |difference| get average ranks. Exact null enumeration for n <= 25, normal
// approximation with continuity correction above. statistic = sum of the
// ranks of positive differences.
struct WilcoxonResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;  // pairs remaining after dropping zero differences
};
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

// Per-metric evaluation summary. Sentence-level metrics aggregate as the
// arithmetic mean of per-example scores; corpus-level ones (F1, AUC) carry
// the corpus value with per_example left empty.
struct MetricReport {
  std::string metric;
  std::vector<double> per_example;
  double aggregate = 0.0;
  std::size_t example_count = 0;

  static MetricReport sentence_level(std::string name, std::vector<double> scores);
  static MetricReport corpus_level(std::string name, double value, std::size_t count);
};

// CSV rows `example_id,metric,score` for every per-example score.
void write_reports_csv(const std::string& path, const std::vector<std::string>& example_ids,
                       const std::vector<MetricReport>& reports);
// JSON object {metric: {aggregate, example_count}, ...}.
void write_reports_json(const std::string& path, const std::vector<MetricReport>& reports);

}  // namespace cct

#endif  // CCT_METRICS_HPP
