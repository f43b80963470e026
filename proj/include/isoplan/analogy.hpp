#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "isoplan/taskgraph.hpp"

namespace isoplan::analogy {

enum class Mode { Jaccard, WL };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& text);

struct AnalogyScore {
  std::string base_id;
  std::string target_id;
  double score = 0.0;
  Mode mode = Mode::Jaccard;
  double alpha = 0.4;
};

/// Multiset Jaccard over the step duration multisets (dummies excluded):
/// sum of per-value min counts / sum of per-value max counts.
double duration_jaccard(const taskgraph::PlanInstance& base, const taskgraph::PlanInstance& target);

/// Set Jaccard over ordered (u, v) step-id edge pairs, dummy edges excluded.
/// Two empty edge sets score 1 by convention.
double edge_jaccard(const taskgraph::PlanInstance& base, const taskgraph::PlanInstance& target);

struct WlOptions {
  int iterations = 3;
  bool include_dummies = false;   // refine over the augmented graph instead
  bool duration_labels = false;   // seed labels from durations, not uniform
};

/// Weisfeiler-Lehman subtree kernel on the directed step graphs, uniform
/// initial labels, in-/out-neighbor label lists hashed separately, label
/// counts accumulated over iterations 0..h, cosine-normalized.
double wl_kernel(const taskgraph::PlanInstance& base, const taskgraph::PlanInstance& target,
                 const WlOptions& options);
double wl_kernel(const taskgraph::PlanInstance& base, const taskgraph::PlanInstance& target,
                 int iterations = 3);

struct StrengthOptions {
  Mode mode = Mode::Jaccard;
  double alpha = 0.4;
  WlOptions wl;
};

/// alpha * duration_jaccard + (1 - alpha) * structural term, where the
/// structural term is edge_jaccard in Jaccard mode and wl_kernel in WL mode.
/// Throws InvalidAlpha unless 0 < alpha < 0.5.
AnalogyScore analogical_strength(const taskgraph::PlanInstance& base,
                                 const taskgraph::PlanInstance& target,
                                 const StrengthOptions& options = {});

struct SimilarityMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  std::vector<double> values;  // row-major, row_ids.size() * col_ids.size()
  Mode mode = Mode::Jaccard;
  double alpha = 0.4;

  double at(size_t row, size_t col) const { return values[row * col_ids.size() + col]; }
};

/// Dense pairwise analogical strength; deterministic regardless of the
/// number of worker threads.
SimilarityMatrix similarity_matrix(const std::vector<taskgraph::PlanInstance>& rows,
                                   const std::vector<taskgraph::PlanInstance>& cols,
                                   const StrengthOptions& options = {}, int threads = 0);

void save_matrix_csv(const std::filesystem::path& path, const SimilarityMatrix& matrix);
void save_matrix_cache(const std::filesystem::path& path, const SimilarityMatrix& matrix);
std::optional<SimilarityMatrix> load_matrix_cache(const std::filesystem::path& path);

/// File stem for a cached matrix: keyed by dataset hash, mode, alpha and
/// WL iteration count.
std::string cache_name(const std::string& dataset_hash, const StrengthOptions& options);

}  // namespace isoplan::analogy
