#include "granger/dataset.hpp"

#include <stdexcept>

namespace granger {

const char* edge_kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::kNone: return "none";
    case EdgeKind::kMean: return "mean";
    case EdgeKind::kVariance: return "variance";
  }
  return "none";
}

EdgeKind edge_kind_from_name(const std::string& name) {
  if (name == "none") return EdgeKind::kNone;
  if (name == "mean") return EdgeKind::kMean;
  if (name == "variance") return EdgeKind::kVariance;
  throw std::invalid_argument("unknown edge kind '" + name + "'");
}

double DatasetMeta::param(const std::string& name) const {
  for (const auto& [k, v] : params)
    if (k == name) return v;
  throw std::invalid_argument("dataset meta has no parameter '" + name + "'");
}

bool DatasetMeta::has_param(const std::string& name) const {
  for (const auto& [k, v] : params)
    if (k == name) return true;
  return false;
}

}  // namespace granger
