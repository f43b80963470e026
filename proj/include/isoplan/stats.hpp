#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "isoplan/analogy.hpp"
#include "isoplan/grade.hpp"

namespace isoplan::stats {

struct OutcomeVector {
  std::vector<std::string> ids;       // unique
  std::vector<bool> correct;          // parallel to ids
  std::string setting_label;
};

/// Builds an OutcomeVector from grade records, optionally restricted to one
/// representation. Throws MismatchedIds on duplicate (id) entries.
OutcomeVector outcomes_from_grades(const std::vector<grade::GradeRecord>& grades,
                                   const std::string& setting_label,
                                   std::optional<render::Representation> representation = {});

struct PearsonResult {
  double rho = 0.0;
  double p_value = 1.0;
};

/// Sample Pearson correlation with a two-sided p-value from the t
/// distribution with n-2 degrees of freedom. Throws DegenerateInput when
/// n < 3 or either side has zero variance.
PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y);

enum class KthShortfall { ZeroFill, Drop };

struct SupportOptions {
  KthShortfall shortfall = KthShortfall::ZeroFill;
};

/// Correlation between test correctness and the similarity of each test
/// item's k-th most similar correctly-learned train item (descending order,
/// ties broken by train id). Items with fewer than k learned analogs score 0
/// (ZeroFill) or are dropped (Drop).
PearsonResult analogy_support(const OutcomeVector& test,
                              const std::set<std::string>& train_correct_ids,
                              const analogy::SimilarityMatrix& sim, int k,
                              const SupportOptions& options = {});

/// Correlation between test correctness and the count of correctly-learned
/// train items with similarity >= p.
PearsonResult frequency_support(const OutcomeVector& test,
                                const std::set<std::string>& train_correct_ids,
                                const analogy::SimilarityMatrix& sim, double p);

struct SweepCell {
  double param = 0.0;                    // k (as a double) or p
  std::optional<PearsonResult> result;   // absent when the cell degenerated
};

struct BestSupport {
  double param = 0.0;
  double rho = 0.0;
  double p_value = 1.0;
};

struct HypothesisReport {
  std::vector<SweepCell> k_grid;  // k = 1..10
  std::vector<SweepCell> p_grid;  // p = 0.1..0.9
  std::optional<BestSupport> best_k;
  std::optional<BestSupport> best_p;
  double significance_level = 0.05;
};

HypothesisReport hypothesis_sweep(const OutcomeVector& test,
                                  const std::set<std::string>& train_correct_ids,
                                  const analogy::SimilarityMatrix& sim,
                                  double significance_level = 0.05,
                                  const SupportOptions& options = {});

enum class Direction { ABetter, BBetter, NoDiff };

std::string to_string(Direction direction);

struct McNemarResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Direction direction = Direction::NoDiff;
  long long b10 = 0;  // a correct, b wrong
  long long b01 = 0;  // a wrong, b correct
  bool exact = true;
};

struct McNemarOptions {
  bool force_exact = false;
  long long exact_threshold = 25;  // exact binomial when b10+b01 <= threshold
};

/// Paired McNemar test from two outcome vectors over the same ids.
McNemarResult mcnemar(const OutcomeVector& a, const OutcomeVector& b,
                      const McNemarOptions& options = {});

/// Same test from pre-tallied discordant counts.
McNemarResult mcnemar_counts(long long b10, long long b01, const McNemarOptions& options = {});

/// Pearson over two 0/1 outcome vectors aligned by id (phi coefficient).
PearsonResult outcome_correlation(const OutcomeVector& a, const OutcomeVector& b);

struct BinAccuracy {
  int lo = 0;
  int hi = 0;
  bool closed_hi = false;  // true on the last bin
  long long count = 0;
  long long correct = 0;
  std::optional<double> accuracy;  // absent when count == 0
};

/// Per-complexity-bin accuracy; bins are [lo, hi) except the last, which is
/// [lo, hi]. Throws UnknownInstance when a grade references a missing
/// instance.
std::vector<BinAccuracy> accuracy_by_complexity(
    const std::vector<grade::GradeRecord>& grades,
    const std::vector<taskgraph::PlanInstance>& instances,
    const std::vector<std::pair<int, int>>& bins);

/// Side-by-side sweep table: columns K, rho_k, p-value_k, P, rho_p,
/// p-value_p; n/a marks degenerate cells.
std::string hypothesis_report_csv(const HypothesisReport& report);
std::string hypothesis_report_text(const HypothesisReport& report);

std::string complexity_table_csv(const std::vector<BinAccuracy>& rows);
std::string complexity_table_text(const std::vector<BinAccuracy>& rows);

}  // namespace isoplan::stats
