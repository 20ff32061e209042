#pragma once

// Association degree measures over per-level ST-cell overlaps.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "minsig/traces.hpp"

namespace minsig {

/// Per-level overlap counts; index 0 is level 1. Every cell is one temporal
/// unit of duration.
struct LevelOverlap {
  std::vector<std::uint32_t> overlap;
  std::vector<std::uint32_t> total_a;
  std::vector<std::uint32_t> total_b;

  int height() const noexcept { return static_cast<int>(overlap.size()); }
};

enum class MeasureVariant { adm, dice, jaccard, cosine };

std::string_view to_string(MeasureVariant v);
MeasureVariant parse_measure_variant(std::string_view name);

struct MeasureParams {
  MeasureVariant variant = MeasureVariant::adm;
  double level_exponent = 1.0;     // u
  double duration_exponent = 1.0;  // v
  /// Level weights for the set-similarity variants, level 1 first. Empty
  /// means l^u normalized to sum 1.
  std::vector<double> level_weights;
};

/// A validated measure bound to a hierarchy height. Every variant evaluates
/// as sum_l w_l * sim_l, so scores, bounds and the ADM/Dice identity share
/// one code path.
class Measure {
 public:
  Measure() = default;
  Measure(const MeasureParams& params, int height);

  const MeasureParams& params() const noexcept { return params_; }
  int height() const noexcept { return static_cast<int>(weights_.size()); }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }

  /// Similarity of one level given |A ∩ B|, |A|, |B|.
  double level_similarity(double overlap, double size_a, double size_b) const;
  /// Largest level similarity any set can reach against a query set of size
  /// `query_size` when at most `available` query cells may be shared.
  double level_bound(double available, double query_size) const {
    return level_similarity(available, available, query_size);
  }
  double score(const LevelOverlap& o) const;
  double score(const CellSequence& a, const CellSequence& b) const;
  /// Weighted combination of precomputed per-level components.
  double combine(const Eigen::VectorXd& components) const { return weights_.dot(components); }

 private:
  MeasureParams params_;
  Eigen::VectorXd weights_;
};

/// Per-level intersection and set sizes. Errors on mismatched heights.
LevelOverlap level_overlaps(const CellSequence& a, const CellSequence& b);

/// Duration-based ADM: sum_l l^u (|P_ab^l| / (|P_a^l| + |P_b^l|))^v divided by
/// the self-score sum_l l^u (1/2)^v.
double adm_score(const MeasureParams& params, const LevelOverlap& o);
/// Weighted Dice, Jaccard or Cosine.
double set_similarity_score(const MeasureParams& params, const LevelOverlap& o);

/// Parses "w1,w2,..." into weights.
std::vector<double> parse_weights(std::string_view text);

}  // namespace minsig
