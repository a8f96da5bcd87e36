#include "granger/cost.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "granger/csv.hpp"

namespace granger {

namespace {

CostItem embedding_cost(const ModelConfig& cfg) {
  std::size_t n = cfg.n_vars, l = cfg.lag, d = cfg.d_model;
  CostItem item{"embedding", 0, 0};
  item.params = d * l + d + n * d;      // w_emb, b_emb, e_id
  item.flops = 2 * n * d * l + 2 * n * d;  // projection, bias, id add
  return item;
}

CostItem mask_cost(const ModelConfig& cfg) {
  std::size_t n = cfg.n_vars, masks = cfg.mask_count();
  CostItem item{"mask", 0, 0};
  item.params = masks * n * n;              // theta
  item.flops = masks * (2 * n * n + n);     // sigmoid, log gate, diag shift
  return item;
}

CostItem attention_cost(const ModelConfig& cfg) {
  std::size_t n = cfg.n_vars, d = cfg.d_model, m = cfg.n_layers,
              h = cfg.n_heads;
  CostItem item{"attention", 0, 0};
  item.params = m * (4 * d * d + 4 * d + 2 * d);  // qkvo, biases, ln1
  // qkvo mats, scores and mix, scale/gate/softmax, biases, ln1, residual
  item.flops = m * (8 * n * d * d + 4 * n * n * d + 5 * h * n * n +
                    12 * n * d);
  return item;
}

CostItem ffn_cost(const ModelConfig& cfg) {
  std::size_t n = cfg.n_vars, d = cfg.d_model, m = cfg.n_layers,
              f = cfg.ffn();
  CostItem item{"ffn", 0, 0};
  item.params = m * (d * f + f + f * d + d + 2 * d);  // w1, b1, w2, b2, ln2
  // mats, bias and activation, bias, ln2, residual
  item.flops = m * (4 * n * d * f + 2 * n * f + 9 * n * d);
  return item;
}

CostItem heads_cost(const ModelConfig& cfg) {
  std::size_t n = cfg.n_vars, d = cfg.d_model;
  std::size_t copies = cfg.decoupled_heads ? n : 1;
  bool nll = cfg.objective == Objective::kNll;
  CostItem item{"heads", 0, 0};
  item.params = copies * (d + 1) * (nll ? 2 : 1);
  item.flops = 2 * n * d + n;                   // mean head
  if (nll) item.flops += 2 * n * d + 2 * n;     // variance head, softplus
  return item;
}

}  // namespace

CostReport cost_report(const ModelConfig& cfg) {
  cfg.validate();
  CostReport report;
  report.breakdown = {embedding_cost(cfg), mask_cost(cfg), attention_cost(cfg),
                      ffn_cost(cfg), heads_cost(cfg)};
  for (const CostItem& item : report.breakdown) {
    report.param_count += item.params;
    report.flops += item.flops;
  }
  report.flop_formula =
      "flops = 2NdL + 2Nd (embedding) + masks*(2N^2 + N) (mask) + "
      "M*(8Nd^2 + 4N^2d + 5HN^2 + 12Nd) (attention) + "
      "M*(4Ndf + 2Nf + 9Nd) (ffn) + 2Nd + N (mean head)" +
      std::string(cfg.objective == Objective::kNll
                      ? " + 2Nd + 2N (variance head)"
                      : "") +
      "; MAC = 2 flops, transcendentals 1; masks = M when layerwise else 1";
  return report;
}

std::size_t count_params(const ModelConfig& cfg) {
  return cost_report(cfg).param_count;
}

std::size_t count_flops(const ModelConfig& cfg) {
  return cost_report(cfg).flops;
}

std::string cost_report_json(const CostReport& report) {
  nlohmann::json j;
  j["param_count"] = report.param_count;
  j["flops"] = report.flops;
  j["flop_formula"] = report.flop_formula;
  j["breakdown"] = nlohmann::json::array();
  for (const CostItem& item : report.breakdown)
    j["breakdown"].push_back({{"module", item.module},
                              {"params", item.params},
                              {"flops", item.flops}});
  return j.dump(2);
}

std::vector<CostSweepRow> cost_sweep(ModelConfig base, const std::string& axis,
                                     const std::vector<std::size_t>& values) {
  if (axis != "n_vars" && axis != "lag")
    throw std::invalid_argument("cost_sweep: axis must be n_vars or lag");
  if (values.empty())
    throw std::invalid_argument("cost_sweep: no axis values given");
  std::vector<CostSweepRow> rows;
  for (std::size_t v : values) {
    if (axis == "n_vars")
      base.n_vars = v;
    else
      base.lag = v;
    CostReport r = cost_report(base);
    rows.push_back({v, r.param_count, r.flops});
  }
  return rows;
}

void write_cost_sweep_csv(const std::vector<CostSweepRow>& rows,
                          const std::string& axis, const std::string& path) {
  std::vector<double> values;
  for (const CostSweepRow& r : rows) {
    values.push_back(static_cast<double>(r.value));
    values.push_back(static_cast<double>(r.params));
    values.push_back(static_cast<double>(r.flops));
  }
  write_numeric_csv(path, {axis, "params", "flops"}, values.data(), rows.size(),
                    3);
}

void write_scaling_svg(const std::vector<CostSweepRow>& rows,
                       const std::string& axis, const std::string& path) {
  if (rows.empty())
    throw std::invalid_argument("write_scaling_svg: no rows to plot");
  const double width = 640, height = 400;
  const double left = 70, right = 600, top = 40, bottom = 360;

  double x_lo = static_cast<double>(rows.front().value), x_hi = x_lo;
  double y_lo = 1e300, y_hi = -1e300;
  for (const CostSweepRow& r : rows) {
    x_lo = std::min(x_lo, static_cast<double>(r.value));
    x_hi = std::max(x_hi, static_cast<double>(r.value));
    for (double v : {static_cast<double>(r.params),
                     static_cast<double>(r.flops)}) {
      double lg = std::log10(std::max(v, 1.0));
      y_lo = std::min(y_lo, lg);
      y_hi = std::max(y_hi, lg);
    }
  }
  y_lo = std::floor(y_lo);
  y_hi = std::ceil(y_hi);
  if (x_hi == x_lo) x_hi = x_lo + 1;
  if (y_hi == y_lo) y_hi = y_lo + 1;

  auto px = [&](double v) {
    return left + (right - left) * (v - x_lo) / (x_hi - x_lo);
  };
  auto py = [&](double v) {
    double lg = std::log10(std::max(v, 1.0));
    return bottom - (bottom - top) * (lg - y_lo) / (y_hi - y_lo);
  };
  auto polyline = [&](auto value_of) {
    std::ostringstream pts;
    for (const CostSweepRow& r : rows)
      pts << px(static_cast<double>(r.value)) << ','
          << py(static_cast<double>(value_of(r))) << ' ';
    return pts.str();
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width
      << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right
      << "\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
      << "\" y2=\"" << bottom << "\" stroke=\"black\"/>\n";
  for (double lg = y_lo; lg <= y_hi; lg += 1.0) {
    double y = bottom - (bottom - top) * (lg - y_lo) / (y_hi - y_lo);
    svg << "<line x1=\"" << left - 4 << "\" y1=\"" << y << "\" x2=\"" << left
        << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\">1e" << lg << "</text>\n";
  }
  for (const CostSweepRow& r : rows) {
    double x = px(static_cast<double>(r.value));
    svg << "<line x1=\"" << x << "\" y1=\"" << bottom << "\" x2=\"" << x
        << "\" y2=\"" << bottom + 4 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << x << "\" y=\"" << bottom + 18
        << "\" text-anchor=\"middle\">" << r.value << "</text>\n";
  }
  svg << "<text x=\"" << (left + right) / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\">" << axis << "</text>\n";
  svg << "<text x=\"16\" y=\"" << (top + bottom) / 2
      << "\" transform=\"rotate(-90 16 " << (top + bottom) / 2
      << ")\" text-anchor=\"middle\">count</text>\n";
  svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" "
         "points=\""
      << polyline([](const CostSweepRow& r) { return r.flops; }) << "\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"2\" "
         "points=\""
      << polyline([](const CostSweepRow& r) { return r.params; }) << "\"/>\n";
  svg << "<text x=\"" << right - 4 << "\" y=\"" << top + 4
      << "\" text-anchor=\"end\" fill=\"#1f77b4\">flops</text>\n";
  svg << "<text x=\"" << right - 4 << "\" y=\"" << top + 20
      << "\" text-anchor=\"end\" fill=\"#ff7f0e\">params</text>\n";
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_scaling_svg: cannot open " + path);
  out << svg.str();
}

std::pair<std::vector<double>, double> powerfit(std::span<const double> x,
                                                std::span<const double> y,
                                                std::span<const double> powers) {
  if (x.size() != y.size())
    throw std::invalid_argument("powerfit: x and y lengths differ");
  if (powers.empty() || x.size() < powers.size())
    throw std::invalid_argument("powerfit: need at least one point per term");
  Eigen::MatrixXd v(x.size(), powers.size());
  Eigen::VectorXd b(x.size());
  for (std::size_t r = 0; r < x.size(); ++r) {
    for (std::size_t c = 0; c < powers.size(); ++c)
      v(r, c) = std::pow(x[r], powers[c]);
    b(r) = y[r];
  }
  Eigen::VectorXd coef = v.colPivHouseholderQr().solve(b);
  Eigen::VectorXd resid = b - v * coef;
  double ss_res = resid.squaredNorm();
  double mean = b.mean();
  double ss_tot = (b.array() - mean).square().sum();
  double r2 = ss_tot == 0.0 ? (ss_res == 0.0 ? 1.0 : 0.0) : 1.0 - ss_res / ss_tot;
  std::vector<double> out(coef.data(), coef.data() + coef.size());
  return {out, r2};
}

}  // namespace granger
