#include "granger/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "granger/csv.hpp"

namespace granger {

namespace {

using boost::multiprecision::cpp_int;
using boost::multiprecision::cpp_rational;

double rational_to_double(const cpp_rational& r) {
  long double num = numerator(r).convert_to<long double>();
  long double den = denominator(r).convert_to<long double>();
  return static_cast<double>(num / den);
}

void check_square(std::span<const double> scores, std::size_t n) {
  if (scores.size() != n * n)
    throw std::invalid_argument("score matrix has " +
                                std::to_string(scores.size()) +
                                " entries, expected " + std::to_string(n * n));
}

struct LabelCounts {
  std::size_t pos = 0, neg = 0;
};

LabelCounts count_labels(const std::vector<EdgeScore>& edges) {
  LabelCounts c;
  for (const auto& e : edges) (e.label ? c.pos : c.neg)++;
  return c;
}

void require_both_classes(const LabelCounts& c) {
  if (c.pos == 0 || c.neg == 0)
    throw std::invalid_argument(
        "degenerate labels: need at least one edge and one non-edge");
}

// Sorted descending, grouped by distinct score; calls
// block(tp_in_block, fp_in_block) per group.
template <typename Fn>
void scan_blocks(std::vector<EdgeScore> edges, Fn block) {
  std::stable_sort(edges.begin(), edges.end(),
                   [](const EdgeScore& a, const EdgeScore& b) {
                     return a.score > b.score;
                   });
  std::size_t i = 0;
  while (i < edges.size()) {
    std::size_t j = i, tp = 0, fp = 0;
    while (j < edges.size() && edges[j].score == edges[i].score) {
      (edges[j].label ? tp : fp)++;
      ++j;
    }
    block(tp, fp);
    i = j;
  }
}

}  // namespace

std::string diagonal_policy_name(DiagonalPolicy p) {
  return p == DiagonalPolicy::kInclude ? "include" : "exclude";
}

DiagonalPolicy diagonal_policy_from_name(const std::string& name) {
  if (name == "include") return DiagonalPolicy::kInclude;
  if (name == "exclude") return DiagonalPolicy::kExclude;
  throw std::invalid_argument("unknown diagonal policy '" + name +
                              "', expected include or exclude");
}

std::vector<EdgeScore> edge_scores(std::span<const double> scores,
                                   const GroundTruthGraph& truth,
                                   DiagonalPolicy policy) {
  std::size_t n = truth.n_vars;
  check_square(scores, n);
  std::vector<EdgeScore> out;
  out.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (policy == DiagonalPolicy::kExclude && i == j) continue;
      out.push_back({i, j, scores[i * n + j], truth.adj(i, j) ? 1 : 0});
    }
  return out;
}

double auroc(std::span<const double> scores, const GroundTruthGraph& truth,
             DiagonalPolicy policy) {
  auto edges = edge_scores(scores, truth, policy);
  auto counts = count_labels(edges);
  require_both_classes(counts);
  std::sort(edges.begin(), edges.end(),
            [](const EdgeScore& a, const EdgeScore& b) {
              return a.score < b.score;
            });
  // Average ranks over tie groups are half-integers, so the numerator
  // below is exact in doubles.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < edges.size()) {
    std::size_t j = i;
    while (j < edges.size() && edges[j].score == edges[i].score) ++j;
    double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (edges[k].label) rank_sum += avg_rank;
    i = j;
  }
  double p = static_cast<double>(counts.pos);
  double u = rank_sum - 0.5 * p * (p + 1.0);
  return u / (p * static_cast<double>(counts.neg));
}

double auprc(std::span<const double> scores, const GroundTruthGraph& truth,
             DiagonalPolicy policy) {
  auto edges = edge_scores(scores, truth, policy);
  auto counts = count_labels(edges);
  require_both_classes(counts);
  cpp_rational ap = 0;
  std::size_t tp = 0, seen = 0;
  scan_blocks(std::move(edges), [&](std::size_t btp, std::size_t bfp) {
    tp += btp;
    seen += btp + bfp;
    if (btp == 0) return;
    // Recall gained by this tie block times the precision at its cut.
    ap += cpp_rational(cpp_int(btp) * cpp_int(tp),
                       cpp_int(counts.pos) * cpp_int(seen));
  });
  return rational_to_double(ap);
}

std::vector<std::pair<double, double>> roc_points(
    std::span<const double> scores, const GroundTruthGraph& truth,
    DiagonalPolicy policy) {
  auto edges = edge_scores(scores, truth, policy);
  auto counts = count_labels(edges);
  require_both_classes(counts);
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0;
  scan_blocks(std::move(edges), [&](std::size_t btp, std::size_t bfp) {
    tp += btp;
    fp += bfp;
    pts.emplace_back(static_cast<double>(fp) / counts.neg,
                     static_cast<double>(tp) / counts.pos);
  });
  return pts;
}

std::vector<std::pair<double, double>> pr_points(
    std::span<const double> scores, const GroundTruthGraph& truth,
    DiagonalPolicy policy) {
  auto edges = edge_scores(scores, truth, policy);
  auto counts = count_labels(edges);
  require_both_classes(counts);
  std::vector<std::pair<double, double>> pts;
  std::size_t tp = 0, seen = 0;
  scan_blocks(std::move(edges), [&](std::size_t btp, std::size_t bfp) {
    tp += btp;
    seen += btp + bfp;
    pts.emplace_back(static_cast<double>(tp) / counts.pos,
                     static_cast<double>(tp) / seen);
  });
  return pts;
}

GroundTruthGraph threshold_top_k(std::span<const double> scores,
                                 std::size_t n, std::size_t k,
                                 DiagonalPolicy policy) {
  check_square(scores, n);
  struct Cand {
    std::size_t row, col;
    double score;
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (policy == DiagonalPolicy::kExclude && i == j) continue;
      cands.push_back({i, j, scores[i * n + j]});
    }
  if (k > cands.size())
    throw std::invalid_argument("asked for " + std::to_string(k) +
                                " edges but only " +
                                std::to_string(cands.size()) + " candidates");
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  GroundTruthGraph g;
  g.n_vars = n;
  g.adjacency.assign(n * n, 0);
  for (std::size_t e = 0; e < k; ++e)
    g.adjacency[cands[e].row * n + cands[e].col] = 1;
  return g;
}

GroundTruthGraph threshold_density(std::span<const double> scores,
                                   std::size_t n, double density,
                                   DiagonalPolicy policy) {
  if (!(density > 0.0 && density <= 1.0))
    throw std::invalid_argument("density must lie in (0, 1]");
  std::size_t cand =
      policy == DiagonalPolicy::kExclude ? n * (n - 1) : n * n;
  auto k = static_cast<std::size_t>(
      std::ceil(density * static_cast<double>(cand) - 1e-9));
  return threshold_top_k(scores, n, std::min(k, cand), policy);
}

std::pair<GroundTruthGraph, double> threshold_cluster(
    std::span<const double> scores, std::size_t n, DiagonalPolicy policy) {
  check_square(scores, n);
  std::vector<double> xs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) xs.push_back(scores[i * n + j]);
  auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
  if (xs.empty() || *mn == *mx)
    throw std::invalid_argument(
        "clustering needs at least two distinct off-diagonal scores");
  double c0 = *mn, c1 = *mx;
  for (int iter = 0; iter < 100; ++iter) {
    double s0 = 0.0, s1 = 0.0;
    std::size_t n0 = 0, n1 = 0;
    for (double x : xs) {
      if (std::abs(x - c0) <= std::abs(x - c1)) {
        s0 += x;
        ++n0;
      } else {
        s1 += x;
        ++n1;
      }
    }
    double nc0 = n0 ? s0 / n0 : c0;
    double nc1 = n1 ? s1 / n1 : c1;
    if (nc0 == c0 && nc1 == c1) break;
    c0 = nc0;
    c1 = nc1;
  }
  double cut = 0.5 * (c0 + c1);
  GroundTruthGraph g;
  g.n_vars = n;
  g.adjacency.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (policy == DiagonalPolicy::kExclude && i == j) continue;
      if (scores[i * n + j] > cut) g.adjacency[i * n + j] = 1;
    }
  return {std::move(g), cut};
}

EvalReport discrete_metrics(const GroundTruthGraph& pred,
                            const GroundTruthGraph& truth,
                            DiagonalPolicy policy) {
  if (pred.n_vars != truth.n_vars)
    throw std::invalid_argument("predicted graph is " +
                                std::to_string(pred.n_vars) + "x" +
                                std::to_string(pred.n_vars) + ", truth is " +
                                std::to_string(truth.n_vars) + "x" +
                                std::to_string(truth.n_vars));
  std::size_t n = truth.n_vars;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (policy == DiagonalPolicy::kExclude && i == j) continue;
      bool p = pred.adj(i, j), t = truth.adj(i, j);
      if (p && t) ++tp;
      if (p && !t) ++fp;
      if (!p && t) ++fn;
    }
  EvalReport r;
  r.diagonal_policy = policy;
  r.shd = fp + fn;
  r.precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
  r.recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

EvalReport evaluate(std::span<const double> scores,
                    const GroundTruthGraph& truth, DiagonalPolicy policy,
                    ThresholdSpec spec) {
  std::size_t n = truth.n_vars;
  auto edges = edge_scores(scores, truth, policy);
  EvalReport r;
  r.diagonal_policy = policy;
  r.auroc = auroc(scores, truth, policy);
  r.auprc = auprc(scores, truth, policy);
  GroundTruthGraph binary;
  if (spec.mode == ThresholdSpec::Mode::kCluster) {
    auto [g, cut] = threshold_cluster(scores, n, policy);
    binary = std::move(g);
    r.threshold = cut;
  } else {
    std::size_t k;
    if (spec.density == 0.0) {
      k = 0;
      for (const auto& e : edges) k += e.label;
    } else {
      std::size_t cand = edges.size();
      k = std::min(static_cast<std::size_t>(std::ceil(
                       spec.density * static_cast<double>(cand) - 1e-9)),
                   cand);
    }
    binary = threshold_top_k(scores, n, k, policy);
    double lowest_kept = std::numeric_limits<double>::infinity();
    for (const auto& e : edges)
      if (binary.adj(e.row, e.col))
        lowest_kept = std::min(lowest_kept, e.score);
    r.threshold = lowest_kept;
  }
  EvalReport d = discrete_metrics(binary, truth, policy);
  r.shd = d.shd;
  r.precision = d.precision;
  r.recall = d.recall;
  r.f1 = d.f1;
  r.edges = std::move(edges);
  return r;
}

void write_eval_report_json(const EvalReport& report,
                            const std::string& path) {
  nlohmann::json j;
  j["auroc"] = report.auroc;
  j["auprc"] = report.auprc;
  j["shd"] = report.shd;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f1"] = report.f1;
  j["threshold"] = report.threshold;
  j["diagonal_policy"] = diagonal_policy_name(report.diagonal_policy);
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : report.edges)
    edges.push_back({{"row", e.row},
                     {"col", e.col},
                     {"score", e.score},
                     {"label", e.label}});
  j["edges"] = std::move(edges);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << j.dump(2) << '\n';
}

void write_curve_csv(const std::vector<std::pair<double, double>>& points,
                     const std::string& x_name, const std::string& y_name,
                     const std::string& path) {
  std::vector<double> values;
  values.reserve(points.size() * 2);
  for (const auto& [x, y] : points) {
    values.push_back(x);
    values.push_back(y);
  }
  write_numeric_csv(path, {x_name, y_name}, values.data(), points.size(), 2);
}

void write_heatmap_svg(const GroundTruthGraph& truth,
                       std::span<const double> scores,
                       const std::string& path) {
  std::size_t n = truth.n_vars;
  check_square(scores, n);
  const int cell = 14, gap = 40, margin = 24, label_h = 20;
  int panel = static_cast<int>(n) * cell;
  int width = 2 * panel + gap + 2 * margin;
  int height = panel + 2 * margin + label_h;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write svg: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' '
      << height << "\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  auto draw_cell = [&](int x0, std::size_t i, std::size_t j, int shade) {
    out << "<rect x=\"" << x0 + static_cast<int>(j) * cell << "\" y=\""
        << margin + label_h + static_cast<int>(i) * cell << "\" width=\""
        << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << ','
        << shade << ',' << shade << ")\" stroke=\"#ccc\" stroke-width=\"0.5\"/>"
        << '\n';
  };
  auto draw_label = [&](int x0, const char* text) {
    out << "<text x=\"" << x0 + panel / 2 << "\" y=\"" << margin + 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"13\">"
        << text << "</text>\n";
  };
  int left = margin, right = margin + panel + gap;
  draw_label(left, "ground truth");
  draw_label(right, "learned scores");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      draw_cell(left, i, j, truth.adj(i, j) ? 0 : 255);
      double s = std::clamp(scores[i * n + j], 0.0, 1.0);
      draw_cell(right, i, j, static_cast<int>(std::lround(255.0 * (1.0 - s))));
    }
  out << "</svg>\n";
}

}  // namespace granger
