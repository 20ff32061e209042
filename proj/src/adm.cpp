#include "minsig/adm.hpp"

#include <charconv>
#include <cmath>

namespace minsig {

std::string_view to_string(MeasureVariant v) {
  switch (v) {
    case MeasureVariant::adm:
      return "adm";
    case MeasureVariant::dice:
      return "dice";
    case MeasureVariant::jaccard:
      return "jaccard";
    case MeasureVariant::cosine:
      return "cosine";
  }
  return "?";
}

MeasureVariant parse_measure_variant(std::string_view name) {
  if (name == "adm") return MeasureVariant::adm;
  if (name == "dice") return MeasureVariant::dice;
  if (name == "jaccard") return MeasureVariant::jaccard;
  if (name == "cosine") return MeasureVariant::cosine;
  fail(ErrorCode::invalid_argument, "unknown measure '" + std::string(name) + "'");
}

namespace {

Eigen::VectorXd level_power_weights(double u, int m) {
  Eigen::VectorXd w(m);
  for (int l = 1; l <= m; ++l) w[l - 1] = std::pow(static_cast<double>(l), u);
  return w / w.sum();
}

}  // namespace

Measure::Measure(const MeasureParams& params, int height) : params_(params) {
  if (height < 1) fail(ErrorCode::invalid_argument, "measure height must be >= 1");
  if (!(params.level_exponent > 0) || !std::isfinite(params.level_exponent))
    fail(ErrorCode::invalid_argument, "level exponent u must be > 0");
  if (!(params.duration_exponent > 0) || !std::isfinite(params.duration_exponent))
    fail(ErrorCode::invalid_argument, "duration exponent v must be > 0");
  if (params.variant == MeasureVariant::adm || params.level_weights.empty()) {
    weights_ = level_power_weights(params.level_exponent, height);
    return;
  }
  if (static_cast<int>(params.level_weights.size()) != height)
    fail(ErrorCode::invalid_argument, "expected " + std::to_string(height) + " level weights, got " +
                                          std::to_string(params.level_weights.size()));
  weights_ = Eigen::Map<const Eigen::VectorXd>(params.level_weights.data(), height);
  if ((weights_.array() < 0).any() || std::abs(weights_.sum() - 1.0) > 1e-9)
    fail(ErrorCode::invalid_argument, "level weights must be nonnegative and sum to 1");
}

double Measure::level_similarity(double overlap, double size_a, double size_b) const {
  switch (params_.variant) {
    case MeasureVariant::adm: {
      const double denom = size_a + size_b;
      if (denom <= 0) return 0.0;
      return std::pow(2.0 * overlap / denom, params_.duration_exponent);
    }
    case MeasureVariant::dice: {
      const double denom = size_a + size_b;
      return denom > 0 ? 2.0 * overlap / denom : 0.0;
    }
    case MeasureVariant::jaccard: {
      const double uni = size_a + size_b - overlap;
      return uni > 0 ? overlap / uni : 0.0;
    }
    case MeasureVariant::cosine: {
      const double denom = std::sqrt(size_a * size_b);
      return denom > 0 ? overlap / denom : 0.0;
    }
  }
  return 0.0;
}

double Measure::score(const LevelOverlap& o) const {
  if (o.height() != height())
    fail(ErrorCode::invalid_argument, "overlap height does not match the measure");
  Eigen::VectorXd sims(height());
  for (int l = 0; l < height(); ++l) sims[l] = level_similarity(o.overlap[l], o.total_a[l], o.total_b[l]);
  return combine(sims);
}

double Measure::score(const CellSequence& a, const CellSequence& b) const {
  return score(level_overlaps(a, b));
}

LevelOverlap level_overlaps(const CellSequence& a, const CellSequence& b) {
  if (a.height() != b.height())
    fail(ErrorCode::invalid_argument, "cell sequences have different heights");
  LevelOverlap o;
  const auto m = static_cast<std::size_t>(a.height());
  o.overlap.resize(m);
  o.total_a.resize(m);
  o.total_b.resize(m);
  for (int l = 1; l <= a.height(); ++l) {
    const auto sa = a.level(l);
    const auto sb = b.level(l);
    o.overlap[l - 1] = static_cast<std::uint32_t>(intersection_size(sa, sb));
    o.total_a[l - 1] = static_cast<std::uint32_t>(sa.size());
    o.total_b[l - 1] = static_cast<std::uint32_t>(sb.size());
  }
  return o;
}

double adm_score(const MeasureParams& params, const LevelOverlap& o) {
  if (params.variant != MeasureVariant::adm)
    fail(ErrorCode::invalid_argument, "adm_score requires the adm variant");
  return Measure(params, o.height()).score(o);
}

double set_similarity_score(const MeasureParams& params, const LevelOverlap& o) {
  if (params.variant == MeasureVariant::adm)
    fail(ErrorCode::invalid_argument, "set_similarity_score requires dice, jaccard or cosine");
  return Measure(params, o.height()).score(o);
}

std::vector<double> parse_weights(std::string_view text) {
  std::vector<double> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    auto item = text.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    double w = 0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), w);
    if (ec != std::errc{} || ptr != item.data() + item.size())
      fail(ErrorCode::invalid_argument, "bad weight '" + std::string(item) + "'");
    out.push_back(w);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace minsig
