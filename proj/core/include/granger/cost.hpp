#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "granger/model.hpp"

namespace granger {

struct CostItem {
  std::string module;  // embedding, mask, attention, ffn, heads
  std::size_t params = 0;
  std::size_t flops = 0;
};

// Analytic parameter and operation counts for one forward pass at batch
// size 1.  A multiply-accumulate is 2 FLOPs; transcendentals count 1.
struct CostReport {
  std::size_t param_count = 0;
  std::size_t flops = 0;
  std::vector<CostItem> breakdown;  // sums to the totals
  std::string flop_formula;
};

CostReport cost_report(const ModelConfig& cfg);
std::size_t count_params(const ModelConfig& cfg);
std::size_t count_flops(const ModelConfig& cfg);

std::string cost_report_json(const CostReport& report);

struct CostSweepRow {
  std::size_t value = 0;  // the axis setting
  std::size_t params = 0;
  std::size_t flops = 0;
};

// Recomputes the report along one axis ("n_vars" or "lag").
std::vector<CostSweepRow> cost_sweep(ModelConfig base, const std::string& axis,
                                     const std::vector<std::size_t>& values);

void write_cost_sweep_csv(const std::vector<CostSweepRow>& rows,
                          const std::string& axis, const std::string& path);

// Line chart of params and flops against the swept axis.
void write_scaling_svg(const std::vector<CostSweepRow>& rows,
                       const std::string& axis, const std::string& path);

// Least squares of y on the given powers of x (e.g. {1, 0} for a line,
// {2, 1} for quadratic through the origin).  Returns coefficients in the
// order of `powers` and the R^2 of the fit.
std::pair<std::vector<double>, double> powerfit(std::span<const double> x,
                                                std::span<const double> y,
                                                std::span<const double> powers);

}  // namespace granger
