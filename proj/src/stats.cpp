#include "isoplan/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "isoplan/errors.hpp"

namespace isoplan::stats {

namespace {

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Continued fraction for the incomplete beta function, modified Lentz.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

/// Regularized incomplete beta I_x(a, b).
double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = a * std::log(x) + b * std::log(1.0 - x) - log_beta(a, b);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of a t statistic with nu degrees of freedom.
double t_two_sided_p(double t, double nu) {
  const double x = nu / (nu + t * t);
  double p = reg_inc_beta(nu / 2.0, 0.5, x);
  if (p < 0.0) p = 0.0;
  if (p > 1.0) p = 1.0;
  return p;
}

std::vector<double> as_doubles(const std::vector<bool>& bits) {
  std::vector<double> out;
  out.reserve(bits.size());
  for (bool b : bits) out.push_back(b ? 1.0 : 0.0);
  return out;
}

}  // namespace

OutcomeVector outcomes_from_grades(const std::vector<grade::GradeRecord>& grades,
                                   const std::string& setting_label,
                                   std::optional<render::Representation> representation) {
  OutcomeVector out;
  out.setting_label = setting_label;
  std::set<std::string> seen;
  for (const auto& g : grades) {
    if (representation && g.representation != *representation) continue;
    if (!seen.insert(g.instance_id).second) {
      throw MismatchedIds("duplicate outcome for instance " + g.instance_id + " in '" +
                          setting_label + "'");
    }
    out.ids.push_back(g.instance_id);
    out.correct.push_back(g.correct);
  }
  return out;
}

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw DegenerateInput("pearson: length mismatch");
  const size_t n = x.size();
  if (n < 3) throw DegenerateInput("pearson: need at least 3 points");

  double mx = 0.0;
  double my = 0.0;
  for (size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DegenerateInput("pearson: zero variance");

  double rho = sxy / std::sqrt(sxx * syy);
  if (rho > 1.0) rho = 1.0;
  if (rho < -1.0) rho = -1.0;

  PearsonResult result;
  result.rho = rho;
  const double one_minus = 1.0 - rho * rho;
  if (one_minus <= 0.0) {
    result.p_value = 0.0;
  } else {
    const double nu = static_cast<double>(n - 2);
    const double t = rho * std::sqrt(nu / one_minus);
    result.p_value = t_two_sided_p(t, nu);
  }
  return result;
}

namespace {

struct SimLookup {
  const analogy::SimilarityMatrix& sim;
  std::unordered_map<std::string, size_t> row_of;
  std::vector<size_t> correct_cols;  // ascending col id

  SimLookup(const analogy::SimilarityMatrix& matrix, const std::set<std::string>& train_correct_ids)
      : sim(matrix) {
    for (size_t i = 0; i < sim.row_ids.size(); ++i) row_of[sim.row_ids[i]] = i;
    std::unordered_map<std::string, size_t> col_of;
    for (size_t j = 0; j < sim.col_ids.size(); ++j) col_of[sim.col_ids[j]] = j;
    for (const std::string& id : train_correct_ids) {  // std::set iterates ascending
      auto it = col_of.find(id);
      if (it == col_of.end()) {
        throw MismatchedIds("correct train id '" + id + "' is not a similarity column");
      }
      correct_cols.push_back(it->second);
    }
  }

  size_t row(const std::string& id) const {
    auto it = row_of.find(id);
    if (it == row_of.end()) throw MismatchedIds("test id '" + id + "' is not a similarity row");
    return it->second;
  }
};

}  // namespace

PearsonResult analogy_support(const OutcomeVector& test,
                              const std::set<std::string>& train_correct_ids,
                              const analogy::SimilarityMatrix& sim, int k,
                              const SupportOptions& options) {
  if (k < 1 || k > 10) throw Error("analogy_support: k must be in 1..10");
  SimLookup lookup(sim, train_correct_ids);

  std::vector<double> feature;
  std::vector<double> outcome;
  for (size_t i = 0; i < test.ids.size(); ++i) {
    const size_t row = lookup.row(test.ids[i]);
    // (score, col id) sorted descending by score, ascending id on ties.
    std::vector<std::pair<double, const std::string*>> scored;
    scored.reserve(lookup.correct_cols.size());
    for (size_t col : lookup.correct_cols) {
      scored.push_back({sim.at(row, col), &sim.col_ids[col]});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return *a.second < *b.second;
    });
    if (static_cast<size_t>(k) <= scored.size()) {
      feature.push_back(scored[k - 1].first);
    } else if (options.shortfall == KthShortfall::ZeroFill) {
      feature.push_back(0.0);
    } else {
      continue;  // Drop
    }
    outcome.push_back(test.correct[i] ? 1.0 : 0.0);
  }
  return pearson(feature, outcome);
}

PearsonResult frequency_support(const OutcomeVector& test,
                                const std::set<std::string>& train_correct_ids,
                                const analogy::SimilarityMatrix& sim, double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error("frequency_support: p must be in (0, 1)");
  SimLookup lookup(sim, train_correct_ids);

  std::vector<double> feature;
  std::vector<double> outcome;
  for (size_t i = 0; i < test.ids.size(); ++i) {
    const size_t row = lookup.row(test.ids[i]);
    long long count = 0;
    for (size_t col : lookup.correct_cols) {
      if (sim.at(row, col) >= p) ++count;
    }
    feature.push_back(static_cast<double>(count));
    outcome.push_back(test.correct[i] ? 1.0 : 0.0);
  }
  return pearson(feature, outcome);
}

HypothesisReport hypothesis_sweep(const OutcomeVector& test,
                                  const std::set<std::string>& train_correct_ids,
                                  const analogy::SimilarityMatrix& sim, double significance_level,
                                  const SupportOptions& options) {
  HypothesisReport report;
  report.significance_level = significance_level;

  auto consider = [&](std::optional<BestSupport>& best, double param, const PearsonResult& r) {
    if (r.p_value >= significance_level) return;
    if (!best || r.rho > best->rho) best = BestSupport{param, r.rho, r.p_value};
  };

  for (int k = 1; k <= 10; ++k) {
    SweepCell cell;
    cell.param = static_cast<double>(k);
    try {
      cell.result = analogy_support(test, train_correct_ids, sim, k, options);
      consider(report.best_k, cell.param, *cell.result);
    } catch (const DegenerateInput&) {
      cell.result = std::nullopt;
    }
    report.k_grid.push_back(cell);
  }
  for (int i = 1; i <= 9; ++i) {
    SweepCell cell;
    cell.param = static_cast<double>(i) / 10.0;
    try {
      cell.result = frequency_support(test, train_correct_ids, sim, cell.param);
      consider(report.best_p, cell.param, *cell.result);
    } catch (const DegenerateInput&) {
      cell.result = std::nullopt;
    }
    report.p_grid.push_back(cell);
  }
  return report;
}

std::string to_string(Direction direction) {
  switch (direction) {
    case Direction::ABetter: return "a_better";
    case Direction::BBetter: return "b_better";
    case Direction::NoDiff: return "no_diff";
  }
  return "no_diff";
}

McNemarResult mcnemar_counts(long long b10, long long b01, const McNemarOptions& options) {
  if (b10 < 0 || b01 < 0) throw Error("mcnemar: negative discordant count");
  McNemarResult result;
  result.b10 = b10;
  result.b01 = b01;
  result.direction = b10 > b01   ? Direction::ABetter
                     : b10 < b01 ? Direction::BBetter
                                 : Direction::NoDiff;
  const long long n = b10 + b01;
  if (n == 0) {
    result.statistic = 0.0;
    result.p_value = 1.0;
    result.exact = true;
    return result;
  }

  result.exact = options.force_exact || n <= options.exact_threshold;
  if (result.exact) {
    const long long k = std::min(b10, b01);
    double tail;
    if (n <= 62) {
      // Exact integer tail: sum_{i<=k} C(n, i), then one dyadic division.
      unsigned __int128 sum = 0;
      unsigned __int128 coeff = 1;
      for (long long i = 0; i <= k; ++i) {
        if (i > 0) {
          coeff = coeff * static_cast<unsigned __int128>(n - i + 1);
          coeff /= static_cast<unsigned __int128>(i);
        }
        sum += coeff;
      }
      tail = static_cast<double>(sum) / std::pow(2.0, static_cast<double>(n));
    } else {
      const double log2n = static_cast<double>(n) * std::log(2.0);
      tail = 0.0;
      for (long long i = 0; i <= k; ++i) {
        const double lp = std::lgamma(static_cast<double>(n + 1)) -
                          std::lgamma(static_cast<double>(i + 1)) -
                          std::lgamma(static_cast<double>(n - i + 1)) - log2n;
        tail += std::exp(lp);
      }
    }
    result.statistic = static_cast<double>(std::min(b10, b01));
    result.p_value = std::min(1.0, 2.0 * tail);
  } else {
    const double diff = std::fabs(static_cast<double>(b10 - b01));
    const double adjusted = std::max(diff - 1.0, 0.0);
    result.statistic = adjusted * adjusted / static_cast<double>(n);
    result.p_value = std::erfc(std::sqrt(result.statistic / 2.0));
  }
  return result;
}

namespace {

std::unordered_map<std::string, bool> outcome_index(const OutcomeVector& v) {
  std::unordered_map<std::string, bool> out;
  for (size_t i = 0; i < v.ids.size(); ++i) {
    if (!out.emplace(v.ids[i], v.correct[i]).second) {
      throw MismatchedIds("duplicate id '" + v.ids[i] + "' in outcome vector");
    }
  }
  return out;
}

}  // namespace

McNemarResult mcnemar(const OutcomeVector& a, const OutcomeVector& b,
                      const McNemarOptions& options) {
  if (a.ids.size() != b.ids.size()) {
    throw MismatchedIds("mcnemar: outcome vectors cover different ids");
  }
  auto b_index = outcome_index(b);
  outcome_index(a);  // duplicate check
  long long b10 = 0;
  long long b01 = 0;
  for (size_t i = 0; i < a.ids.size(); ++i) {
    auto it = b_index.find(a.ids[i]);
    if (it == b_index.end()) {
      throw MismatchedIds("mcnemar: id '" + a.ids[i] + "' missing from second vector");
    }
    const bool ca = a.correct[i];
    const bool cb = it->second;
    if (ca && !cb) ++b10;
    if (!ca && cb) ++b01;
  }
  return mcnemar_counts(b10, b01, options);
}

PearsonResult outcome_correlation(const OutcomeVector& a, const OutcomeVector& b) {
  if (a.ids.size() != b.ids.size()) {
    throw MismatchedIds("outcome_correlation: vectors cover different ids");
  }
  auto b_index = outcome_index(b);
  std::vector<double> x = as_doubles(a.correct);
  std::vector<double> y;
  y.reserve(a.ids.size());
  for (size_t i = 0; i < a.ids.size(); ++i) {
    auto it = b_index.find(a.ids[i]);
    if (it == b_index.end()) {
      throw MismatchedIds("outcome_correlation: id '" + a.ids[i] + "' missing from second vector");
    }
    y.push_back(it->second ? 1.0 : 0.0);
  }
  return pearson(x, y);
}

std::vector<BinAccuracy> accuracy_by_complexity(
    const std::vector<grade::GradeRecord>& grades,
    const std::vector<taskgraph::PlanInstance>& instances,
    const std::vector<std::pair<int, int>>& bins) {
  std::unordered_map<std::string, int> complexity_of;
  for (const auto& inst : instances) {
    complexity_of[inst.instance_id] = taskgraph::complexity(inst);
  }

  std::vector<BinAccuracy> rows;
  rows.reserve(bins.size());
  for (size_t i = 0; i < bins.size(); ++i) {
    BinAccuracy row;
    row.lo = bins[i].first;
    row.hi = bins[i].second;
    row.closed_hi = (i + 1 == bins.size());
    rows.push_back(row);
  }

  for (const auto& g : grades) {
    auto it = complexity_of.find(g.instance_id);
    if (it == complexity_of.end()) {
      throw UnknownInstance("grade references unknown instance " + g.instance_id);
    }
    const int c = it->second;
    for (auto& row : rows) {
      const bool in_bin = c >= row.lo && (row.closed_hi ? c <= row.hi : c < row.hi);
      if (in_bin) {
        ++row.count;
        if (g.correct) ++row.correct;
      }
    }
  }
  for (auto& row : rows) {
    if (row.count > 0) {
      row.accuracy = static_cast<double>(row.correct) / static_cast<double>(row.count);
    }
  }
  return rows;
}

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string p_display(double p) {
  if (p < 0.001) return "<0.001";
  return fmt("%.3f", p);
}

}  // namespace

std::string hypothesis_report_csv(const HypothesisReport& report) {
  std::string out = "K,rho_k,p_value_k,P,rho_p,p_value_p\n";
  const size_t rows = std::max(report.k_grid.size(), report.p_grid.size());
  for (size_t i = 0; i < rows; ++i) {
    if (i < report.k_grid.size()) {
      const auto& cell = report.k_grid[i];
      out += std::to_string(static_cast<int>(cell.param));
      if (cell.result) {
        out += "," + fmt("%.6f", cell.result->rho) + "," + fmt("%.6g", cell.result->p_value);
      } else {
        out += ",n/a,n/a";
      }
    } else {
      out += ",,";
    }
    if (i < report.p_grid.size()) {
      const auto& cell = report.p_grid[i];
      out += "," + fmt("%.1f", cell.param);
      if (cell.result) {
        out += "," + fmt("%.6f", cell.result->rho) + "," + fmt("%.6g", cell.result->p_value);
      } else {
        out += ",n/a,n/a";
      }
    } else {
      out += ",,,";
    }
    out += "\n";
  }
  return out;
}

std::string hypothesis_report_text(const HypothesisReport& report) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-4s %-8s %-10s %-4s %-8s %-10s\n", "K", "rho_k", "p_k", "P",
                "rho_p", "p_p");
  out += line;
  const size_t rows = std::max(report.k_grid.size(), report.p_grid.size());
  for (size_t i = 0; i < rows; ++i) {
    std::string k_param, k_rho = " ", k_p = " ";
    if (i < report.k_grid.size()) {
      const auto& cell = report.k_grid[i];
      k_param = std::to_string(static_cast<int>(cell.param));
      k_rho = cell.result ? fmt("%.3f", cell.result->rho) : "n/a";
      k_p = cell.result ? p_display(cell.result->p_value) : "n/a";
    }
    std::string p_param, p_rho = " ", p_p = " ";
    if (i < report.p_grid.size()) {
      const auto& cell = report.p_grid[i];
      p_param = fmt("%.1f", cell.param);
      p_rho = cell.result ? fmt("%.3f", cell.result->rho) : "n/a";
      p_p = cell.result ? p_display(cell.result->p_value) : "n/a";
    }
    std::snprintf(line, sizeof(line), "%-4s %-8s %-10s %-4s %-8s %-10s\n", k_param.c_str(),
                  k_rho.c_str(), k_p.c_str(), p_param.c_str(), p_rho.c_str(), p_p.c_str());
    out += line;
  }
  if (report.best_k) {
    out += "best_k: k=" + std::to_string(static_cast<int>(report.best_k->param)) +
           " rho=" + fmt("%.3f", report.best_k->rho) + " p=" + p_display(report.best_k->p_value) +
           "\n";
  } else {
    out += "best_k: none significant at " + fmt("%.2f", report.significance_level) + "\n";
  }
  if (report.best_p) {
    out += "best_p: p=" + fmt("%.1f", report.best_p->param) +
           " rho=" + fmt("%.3f", report.best_p->rho) + " p=" + p_display(report.best_p->p_value) +
           "\n";
  } else {
    out += "best_p: none significant at " + fmt("%.2f", report.significance_level) + "\n";
  }
  return out;
}

namespace {

std::string bin_label(const BinAccuracy& row) {
  return std::string("[") + std::to_string(row.lo) + "," + std::to_string(row.hi) +
         (row.closed_hi ? "]" : ")");
}

}  // namespace

std::string complexity_table_csv(const std::vector<BinAccuracy>& rows) {
  std::string out = "bin,count,correct,accuracy\n";
  for (const auto& row : rows) {
    out += "\"" + bin_label(row) + "\"," + std::to_string(row.count) + "," +
           std::to_string(row.correct) + ",";
    out += row.accuracy ? fmt("%.6f", *row.accuracy) : "n/a";
    out += "\n";
  }
  return out;
}

std::string complexity_table_text(const std::vector<BinAccuracy>& rows) {
  std::string out;
  char line[120];
  std::snprintf(line, sizeof(line), "%-12s %-8s %-8s %-8s\n", "bin", "count", "correct", "acc");
  out += line;
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%-12s %-8lld %-8lld %-8s\n", bin_label(row).c_str(),
                  row.count, row.correct,
                  row.accuracy ? fmt("%.3f", *row.accuracy).c_str() : "n/a");
    out += line;
  }
  return out;
}

}  // namespace isoplan::stats
