#include "ricov/design.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <utility>

#include "ricov/core.hpp"

namespace ricov {

HtEstimate ht_estimate(const EligibleCell& cell) {
  if (cell.children.empty()) throw InputError("ht_estimate: empty cell");
  double sw = 0, swy = 0;
  for (const auto& c : cell.children) {
    sw += c.weight;
    swy += c.weight * c.mcv1;
  }
  if (!(sw > 0))
    throw NumericalError("degenerate cell " + cell.area_id + "/" +
                         std::to_string(cell.cohort_index) + "/" + cell.survey_id +
                         ": all weights zero");
  return {swy / sw, static_cast<long>(cell.children.size())};
}

double design_variance(const EligibleCell& cell, LonePsuPolicy lone_psu) {
  const auto [p, n] = ht_estimate(cell);
  double sw = 0;
  for (const auto& c : cell.children) sw += c.weight;

  // stratum -> cluster -> total of linearized values
  std::map<std::string, std::map<std::string, double>> totals;
  for (const auto& c : cell.children)
    totals[c.stratum_id][c.cluster_id] += c.weight * (c.mcv1 - p) / sw;

  double grand_sum = 0;
  long grand_count = 0;
  for (const auto& [h, clusters] : totals)
    for (const auto& [id, z] : clusters) {
      grand_sum += z;
      ++grand_count;
    }
  const double grand_mean = grand_sum / static_cast<double>(grand_count);

  double v = 0;
  for (const auto& [h, clusters] : totals) {
    const auto nh = static_cast<double>(clusters.size());
    if (clusters.size() == 1) {
      if (lone_psu == LonePsuPolicy::kGrandMean) {
        const double d = clusters.begin()->second - grand_mean;
        v += d * d;
      }
      continue;
    }
    double mean = 0;
    for (const auto& [id, z] : clusters) mean += z;
    mean /= nh;
    double ss = 0;
    for (const auto& [id, z] : clusters) ss += (z - mean) * (z - mean);
    v += nh / (nh - 1.0) * ss;
  }
  return v;
}

LogitEstimate logit_transform(double p_hat, double v_hat) {
  if (!(p_hat > 0 && p_hat < 1))
    throw NumericalError("logit_transform: p_hat must lie in (0,1)");
  if (!(v_hat > 0)) throw NumericalError("logit_transform: v_hat must be > 0");
  const double d = p_hat * (1 - p_hat);
  return {logit(p_hat), v_hat / (d * d)};
}

namespace {

// Either an estimate or the reason the cell is excluded.
std::pair<std::optional<CellEstimate>, std::optional<DegenerateCell>> estimate_one(
    const EligibleCell& cell, const DesignOptions& options) {
  auto [p, n] = ht_estimate(cell);
  double v = design_variance(cell, options.lone_psu);
  const bool boundary = p <= 0 || p >= 1;
  const bool zero_var = !(v > 0);
  if (boundary || zero_var) {
    if (!options.truncate_degenerate) {
      return {std::nullopt,
              DegenerateCell{cell.area_id, cell.cohort_index, cell.survey_id, n, p, v,
                             boundary ? "p_hat at boundary" : "zero design variance"}};
    }
    const double lo = 1.0 / (2.0 * static_cast<double>(n));
    p = std::clamp(p, lo, 1.0 - lo);
    if (zero_var) v = p * (1 - p) / static_cast<double>(n);
  }
  const auto t = logit_transform(p, v);
  return {CellEstimate{cell.area_id, cell.cohort_index, cell.survey_id,
                       cell.sia_indicator, n, p, v, t.theta_hat, t.V_hat},
          std::nullopt};
}

void collect(std::vector<std::pair<std::optional<CellEstimate>,
                                   std::optional<DegenerateCell>>>& slots,
             DirectEstimates& out) {
  for (auto& [est, bad] : slots) {
    if (est) out.estimates.push_back(std::move(*est));
    if (bad) out.excluded.push_back(std::move(*bad));
  }
}

}  // namespace

DirectEstimates estimate_cells(const std::vector<EligibleCell>& cells,
                               const DesignOptions& options) {
  std::vector<std::pair<std::optional<CellEstimate>, std::optional<DegenerateCell>>>
      slots(cells.size());
  const auto count = static_cast<long>(cells.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (long c = 0; c < count; ++c) slots[c] = estimate_one(cells[c], options);
  DirectEstimates out;
  collect(slots, out);
  return out;
}

namespace serial {
DirectEstimates estimate_cells(const std::vector<EligibleCell>& cells,
                               const DesignOptions& options) {
  std::vector<std::pair<std::optional<CellEstimate>, std::optional<DegenerateCell>>>
      slots;
  slots.reserve(cells.size());
  for (const auto& cell : cells) slots.push_back(estimate_one(cell, options));
  DirectEstimates out;
  collect(slots, out);
  return out;
}
}  // namespace serial

}  // namespace ricov
