#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace granger {

enum class EdgeKind : std::uint8_t { kNone = 0, kMean = 1, kVariance = 2 };

const char* edge_kind_name(EdgeKind k);
EdgeKind edge_kind_from_name(const std::string& name);

// Row i lists the causes of variable i: adjacency(i, j) == 1 means j -> i.
struct GroundTruthGraph {
  std::size_t n_vars = 0;
  std::vector<std::uint8_t> adjacency;   // N*N row-major, entries 0/1
  std::vector<EdgeKind> edge_kind;       // N*N when present, else empty

  std::uint8_t adj(std::size_t i, std::size_t j) const {
    return adjacency[i * n_vars + j];
  }
  EdgeKind kind(std::size_t i, std::size_t j) const {
    return edge_kind[i * n_vars + j];
  }
  bool has_edge_kinds() const { return !edge_kind.empty(); }
  std::size_t edge_count() const {
    std::size_t c = 0;
    for (auto v : adjacency) c += v;
    return c;
  }
};

// Enough to regenerate a synthetic dataset bit-identically.
struct DatasetMeta {
  std::string generator;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> params;

  double param(const std::string& name) const;
  bool has_param(const std::string& name) const;
};

struct CausalDataset {
  std::size_t t_len = 0;
  std::size_t n_vars = 0;
  std::vector<double> data;  // t_len * n_vars, row-major, row = time step
  // Start row of each trajectory; a single series is {0}.  Windows never
  // cross these boundaries.
  std::vector<std::size_t> trajectory_starts{0};
  std::optional<GroundTruthGraph> truth;
  DatasetMeta meta;

  double value(std::size_t t, std::size_t i) const {
    return data[t * n_vars + i];
  }
  double& value(std::size_t t, std::size_t i) { return data[t * n_vars + i]; }

  std::size_t n_trajectories() const { return trajectory_starts.size(); }
  std::size_t trajectory_begin(std::size_t k) const {
    return trajectory_starts[k];
  }
  std::size_t trajectory_end(std::size_t k) const {
    return k + 1 < trajectory_starts.size() ? trajectory_starts[k + 1] : t_len;
  }
};

}  // namespace granger
