#include "isoplan/analogy.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <thread>
#include <unordered_map>

#include "isoplan/errors.hpp"

namespace isoplan::analogy {

std::string to_string(Mode mode) { return mode == Mode::Jaccard ? "JACCARD" : "WL"; }

Mode mode_from_string(const std::string& text) {
  std::string upper = text;
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "JACCARD") return Mode::Jaccard;
  if (upper == "WL") return Mode::WL;
  throw SchemaMismatch("unknown analogy mode: " + text);
}

double duration_jaccard(const taskgraph::PlanInstance& base,
                        const taskgraph::PlanInstance& target) {
  std::map<Rational, std::pair<long long, long long>> counts;
  for (const auto& s : base.steps) counts[s.duration_minutes].first++;
  for (const auto& s : target.steps) counts[s.duration_minutes].second++;
  long long min_sum = 0;
  long long max_sum = 0;
  for (const auto& [value, pair] : counts) {
    min_sum += std::min(pair.first, pair.second);
    max_sum += std::max(pair.first, pair.second);
  }
  if (max_sum == 0) return 1.0;
  return static_cast<double>(min_sum) / static_cast<double>(max_sum);
}

double edge_jaccard(const taskgraph::PlanInstance& base, const taskgraph::PlanInstance& target) {
  std::map<std::pair<int, int>, std::pair<bool, bool>> seen;
  for (const auto& e : base.edges) seen[e].first = true;
  for (const auto& e : target.edges) seen[e].second = true;
  long long intersection = 0;
  long long unions = 0;
  for (const auto& [edge, flags] : seen) {
    ++unions;
    if (flags.first && flags.second) ++intersection;
  }
  if (unions == 0) return 1.0;
  return static_cast<double>(intersection) / static_cast<double>(unions);
}

namespace {

struct WlGraph {
  int nodes = 0;
  std::vector<std::vector<int>> in_neighbors;
  std::vector<std::vector<int>> out_neighbors;
  std::vector<std::string> seed_labels;
};

WlGraph wl_graph(const taskgraph::PlanInstance& inst, const WlOptions& options) {
  WlGraph g;
  if (options.include_dummies) {
    taskgraph::AugmentedGraph aug = taskgraph::augment(inst);
    g.nodes = aug.node_count();
    g.in_neighbors.assign(g.nodes, {});
    g.out_neighbors.assign(g.nodes, {});
    for (int u = 0; u < g.nodes; ++u) {
      for (int v : aug.successors[u]) {
        g.out_neighbors[u].push_back(v);
        g.in_neighbors[v].push_back(u);
      }
    }
    g.seed_labels.assign(g.nodes, "n");
    if (options.duration_labels) {
      for (int v = 0; v < g.nodes; ++v) g.seed_labels[v] = aug.durations[v].to_decimal_string();
    }
  } else {
    int n = static_cast<int>(inst.steps.size());
    g.nodes = n;
    g.in_neighbors.assign(n, {});
    g.out_neighbors.assign(n, {});
    for (const auto& [u, v] : inst.edges) {
      g.out_neighbors[u - 1].push_back(v - 1);
      g.in_neighbors[v - 1].push_back(u - 1);
    }
    g.seed_labels.assign(n, "n");
    if (options.duration_labels) {
      for (const auto& s : inst.steps) {
        g.seed_labels[s.id - 1] = s.duration_minutes.to_decimal_string();
      }
    }
  }
  return g;
}

using LabelDict = std::unordered_map<std::string, int>;
using Features = std::map<int, long long>;

int intern(LabelDict& dict, const std::string& label) {
  auto [it, inserted] = dict.emplace(label, static_cast<int>(dict.size()));
  return it->second;
}

/// Label counts accumulated over WL iterations 0..h.
Features wl_features(const WlGraph& g, int iterations, LabelDict& dict) {
  Features features;
  std::vector<int> labels(g.nodes);
  for (int v = 0; v < g.nodes; ++v) {
    labels[v] = intern(dict, "seed:" + g.seed_labels[v]);
    features[labels[v]]++;
  }
  for (int round = 0; round < iterations; ++round) {
    std::vector<int> next(g.nodes);
    for (int v = 0; v < g.nodes; ++v) {
      std::vector<int> in_labels;
      std::vector<int> out_labels;
      in_labels.reserve(g.in_neighbors[v].size());
      out_labels.reserve(g.out_neighbors[v].size());
      for (int u : g.in_neighbors[v]) in_labels.push_back(labels[u]);
      for (int u : g.out_neighbors[v]) out_labels.push_back(labels[u]);
      std::sort(in_labels.begin(), in_labels.end());
      std::sort(out_labels.begin(), out_labels.end());
      std::string key = std::to_string(labels[v]);
      key += "|i:";
      for (int l : in_labels) {
        key += std::to_string(l);
        key += ',';
      }
      key += "|o:";
      for (int l : out_labels) {
        key += std::to_string(l);
        key += ',';
      }
      next[v] = intern(dict, key);
    }
    labels = std::move(next);
    for (int v = 0; v < g.nodes; ++v) features[labels[v]]++;
  }
  return features;
}

double dot(const Features& a, const Features& b) {
  double total = 0.0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->first < ib->first) {
      ++ia;
    } else if (ib->first < ia->first) {
      ++ib;
    } else {
      total += static_cast<double>(ia->second) * static_cast<double>(ib->second);
      ++ia;
      ++ib;
    }
  }
  return total;
}

double cosine_kernel(const Features& a, const Features& b) {
  double raw = dot(a, b);
  if (raw == 0.0) return 0.0;
  return raw / std::sqrt(dot(a, a) * dot(b, b));
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw InvalidAlpha("alpha must lie in (0, 0.5), got " + std::to_string(alpha));
  }
}

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

double wl_kernel(const taskgraph::PlanInstance& base, const taskgraph::PlanInstance& target,
                 const WlOptions& options) {
  LabelDict dict;
  Features fa = wl_features(wl_graph(base, options), options.iterations, dict);
  Features fb = wl_features(wl_graph(target, options), options.iterations, dict);
  return cosine_kernel(fa, fb);
}

double wl_kernel(const taskgraph::PlanInstance& base, const taskgraph::PlanInstance& target,
                 int iterations) {
  WlOptions options;
  options.iterations = iterations;
  return wl_kernel(base, target, options);
}

AnalogyScore analogical_strength(const taskgraph::PlanInstance& base,
                                 const taskgraph::PlanInstance& target,
                                 const StrengthOptions& options) {
  check_alpha(options.alpha);
  double unary = duration_jaccard(base, target);
  double structural = options.mode == Mode::Jaccard ? edge_jaccard(base, target)
                                                    : wl_kernel(base, target, options.wl);
  AnalogyScore score;
  score.base_id = base.instance_id;
  score.target_id = target.instance_id;
  score.mode = options.mode;
  score.alpha = options.alpha;
  score.score = clamp01(options.alpha * unary + (1.0 - options.alpha) * structural);
  return score;
}

SimilarityMatrix similarity_matrix(const std::vector<taskgraph::PlanInstance>& rows,
                                   const std::vector<taskgraph::PlanInstance>& cols,
                                   const StrengthOptions& options, int threads) {
  check_alpha(options.alpha);
  if (rows.empty() || cols.empty()) {
    throw DegenerateInput("similarity_matrix requires non-empty row and column sets");
  }

  SimilarityMatrix m;
  m.mode = options.mode;
  m.alpha = options.alpha;
  for (const auto& r : rows) m.row_ids.push_back(r.instance_id);
  for (const auto& c : cols) m.col_ids.push_back(c.instance_id);
  m.values.assign(rows.size() * cols.size(), 0.0);

  // WL features interned once against a shared dictionary; dot products do
  // not depend on the interning order, so pairwise calls agree exactly.
  std::vector<Features> row_features;
  std::vector<Features> col_features;
  if (options.mode == Mode::WL) {
    LabelDict dict;
    row_features.reserve(rows.size());
    for (const auto& r : rows) {
      row_features.push_back(wl_features(wl_graph(r, options.wl), options.wl.iterations, dict));
    }
    col_features.reserve(cols.size());
    for (const auto& c : cols) {
      col_features.push_back(wl_features(wl_graph(c, options.wl), options.wl.iterations, dict));
    }
  }

  auto fill_row = [&](size_t i) {
    for (size_t j = 0; j < cols.size(); ++j) {
      double unary = duration_jaccard(rows[i], cols[j]);
      double structural = options.mode == Mode::Jaccard
                              ? edge_jaccard(rows[i], cols[j])
                              : cosine_kernel(row_features[i], col_features[j]);
      m.values[i * cols.size() + j] =
          clamp01(options.alpha * unary + (1.0 - options.alpha) * structural);
    }
  };

  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (workers > 1 && rows.size() >= 8) {
    std::vector<std::thread> pool;
    std::atomic<size_t> cursor{0};
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          size_t i = cursor.fetch_add(1);
          if (i >= rows.size()) break;
          fill_row(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  } else {
    for (size_t i = 0; i < rows.size(); ++i) fill_row(i);
  }
  return m;
}

void save_matrix_csv(const std::filesystem::path& path, const SimilarityMatrix& matrix) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "row_id,col_id,score\n";
  char buf[64];
  for (size_t i = 0; i < matrix.row_ids.size(); ++i) {
    for (size_t j = 0; j < matrix.col_ids.size(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g", matrix.at(i, j));
      out << matrix.row_ids[i] << ',' << matrix.col_ids[j] << ',' << buf << '\n';
    }
  }
}

namespace {

constexpr char kCacheMagic[8] = {'I', 'S', 'O', 'S', 'I', 'M', '0', '1'};

void put_u64(std::ofstream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

bool get_u64(std::ifstream& in, std::uint64_t& v) {
  char bytes[8];
  if (!in.read(bytes, 8)) return false;
  v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  }
  return true;
}

void put_string(std::ofstream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

bool get_string(std::ifstream& in, std::string& s) {
  std::uint64_t len = 0;
  if (!get_u64(in, len)) return false;
  if (len > (1ULL << 20)) return false;
  s.resize(len);
  return static_cast<bool>(in.read(s.data(), static_cast<std::streamsize>(len)));
}

std::uint64_t double_bits(double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  return bits;
}

double bits_double(std::uint64_t bits) {
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void save_matrix_cache(const std::filesystem::path& path, const SimilarityMatrix& matrix) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kCacheMagic, sizeof(kCacheMagic));
  put_u64(out, matrix.mode == Mode::Jaccard ? 0 : 1);
  put_u64(out, double_bits(matrix.alpha));
  put_u64(out, matrix.row_ids.size());
  put_u64(out, matrix.col_ids.size());
  for (const auto& id : matrix.row_ids) put_string(out, id);
  for (const auto& id : matrix.col_ids) put_string(out, id);
  for (double v : matrix.values) put_u64(out, double_bits(v));
}

std::optional<SimilarityMatrix> load_matrix_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0) return std::nullopt;
  SimilarityMatrix m;
  std::uint64_t mode = 0;
  std::uint64_t alpha_bits = 0;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  if (!get_u64(in, mode) || !get_u64(in, alpha_bits) || !get_u64(in, rows) || !get_u64(in, cols)) {
    return std::nullopt;
  }
  if (rows == 0 || cols == 0 || rows * cols > (1ULL << 32)) return std::nullopt;
  m.mode = mode == 0 ? Mode::Jaccard : Mode::WL;
  m.alpha = bits_double(alpha_bits);
  m.row_ids.resize(rows);
  m.col_ids.resize(cols);
  for (auto& id : m.row_ids) {
    if (!get_string(in, id)) return std::nullopt;
  }
  for (auto& id : m.col_ids) {
    if (!get_string(in, id)) return std::nullopt;
  }
  m.values.resize(rows * cols);
  for (double& v : m.values) {
    std::uint64_t bits = 0;
    if (!get_u64(in, bits)) return std::nullopt;
    v = bits_double(bits);
  }
  return m;
}

std::string cache_name(const std::string& dataset_hash, const StrengthOptions& options) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "sim_%s_%s_a%.3f_i%d.bin", dataset_hash.c_str(),
                to_string(options.mode).c_str(), options.alpha,
                options.mode == Mode::WL ? options.wl.iterations : 0);
  return buf;
}

}  // namespace isoplan::analogy
