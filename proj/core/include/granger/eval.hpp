#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "granger/dataset.hpp"

namespace granger {

enum class DiagonalPolicy { kInclude, kExclude };

std::string diagonal_policy_name(DiagonalPolicy p);
DiagonalPolicy diagonal_policy_from_name(const std::string& name);

struct EdgeScore {
  std::size_t row = 0, col = 0;
  double score = 0.0;
  int label = 0;
};

struct EvalReport {
  double auroc = 0.0;
  double auprc = 0.0;
  std::size_t shd = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.0;
  DiagonalPolicy diagonal_policy = DiagonalPolicy::kInclude;
  std::vector<EdgeScore> edges;
};

struct ThresholdSpec {
  enum class Mode { kDensity, kCluster };
  Mode mode = Mode::kDensity;
  double density = 0.0;  // 0 means match the truth's own density
};

// Candidate (score, label) pairs in row-major order; the diagonal is
// dropped under the exclude policy.
std::vector<EdgeScore> edge_scores(std::span<const double> scores,
                                   const GroundTruthGraph& truth,
                                   DiagonalPolicy policy);

// Exact rank-based AUROC (Mann-Whitney), ties counted half.
double auroc(std::span<const double> scores, const GroundTruthGraph& truth,
             DiagonalPolicy policy);

// Average precision: step interpolation over the PR curve, evaluated in
// exact rational arithmetic and rounded once at the end.
double auprc(std::span<const double> scores, const GroundTruthGraph& truth,
             DiagonalPolicy policy);

// (fpr, tpr) per distinct threshold, descending, (0,0) prepended.
std::vector<std::pair<double, double>> roc_points(
    std::span<const double> scores, const GroundTruthGraph& truth,
    DiagonalPolicy policy);

// (recall, precision) per distinct threshold, descending.
std::vector<std::pair<double, double>> pr_points(
    std::span<const double> scores, const GroundTruthGraph& truth,
    DiagonalPolicy policy);

// Keeps the k best-scored candidate edges, ties broken by (row, col) order.
GroundTruthGraph threshold_top_k(std::span<const double> scores,
                                 std::size_t n, std::size_t k,
                                 DiagonalPolicy policy);

// Keeps the top ceil(density * candidates) edges.
GroundTruthGraph threshold_density(std::span<const double> scores,
                                   std::size_t n, double density,
                                   DiagonalPolicy policy);

// Two-means clustering of the off-diagonal scores; returns the binary
// graph of edges above the midpoint of the converged centroids, and that
// midpoint.
std::pair<GroundTruthGraph, double> threshold_cluster(
    std::span<const double> scores, std::size_t n, DiagonalPolicy policy);

// SHD, precision, recall, F1 of a binary graph against the truth.
EvalReport discrete_metrics(const GroundTruthGraph& pred,
                            const GroundTruthGraph& truth,
                            DiagonalPolicy policy);

// Full pipeline: ranking metrics, thresholding, discrete metrics.
EvalReport evaluate(std::span<const double> scores,
                    const GroundTruthGraph& truth, DiagonalPolicy policy,
                    ThresholdSpec spec = {});

void write_eval_report_json(const EvalReport& report, const std::string& path);
void write_curve_csv(const std::vector<std::pair<double, double>>& points,
                     const std::string& x_name, const std::string& y_name,
                     const std::string& path);
// Side-by-side truth and score heatmaps.
void write_heatmap_svg(const GroundTruthGraph& truth,
                       std::span<const double> scores,
                       const std::string& path);

}  // namespace granger
