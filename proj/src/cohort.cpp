#include "ricov/cohort.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "ricov/core.hpp"

namespace ricov {

void CohortGrid::validate() const {
  if (cohort_len_months <= 0 || 12 % cohort_len_months != 0)
    throw InputError("cohort_len_months must divide 12, got " +
                     std::to_string(cohort_len_months));
  if (num_cohorts < 1) throw InputError("num_cohorts must be >= 1");
}

int cmc(int year, int month) {
  if (month < 1 || month > 12)
    throw InputError("month outside 1..12: " + std::to_string(month));
  if (year < 1900) throw InputError("year before 1900: " + std::to_string(year));
  return 12 * (year - 1900) + month;
}

std::optional<int> cohort_index(int birth_cmc, const CohortGrid& grid) {
  const int offset = birth_cmc - grid.origin_cmc;
  if (offset < 0 || offset >= grid.num_cohorts * grid.cohort_len_months)
    return std::nullopt;
  return offset / grid.cohort_len_months + 1;
}

void validate(const ChildRecord& child) {
  if (!(child.weight > 0))
    throw InputError("row " + std::to_string(child.row) + ": weight must be > 0");
  if (child.interview_cmc < child.birth_cmc)
    throw InputError("row " + std::to_string(child.row) +
                     ": interview_cmc before birth_cmc");
  if (child.mcv1 != 0 && child.mcv1 != 1)
    throw InputError("row " + std::to_string(child.row) + ": mcv1 must be 0 or 1");
}

void validate(const SiaEvent& event) {
  if (event.start_cmc > event.end_cmc)
    throw InputError("SIA " + event.sia_id + ": start_cmc after end_cmc");
  if (event.min_age_months < 0 || event.min_age_months > event.max_age_months)
    throw InputError("SIA " + event.sia_id + ": invalid target age range");
}

OpportunityProfile opportunity_profile(const ChildRecord& child,
                                       std::span<const SiaEvent> calendar,
                                       int ri_age_months) {
  if (ri_age_months < 0) throw InputError("ri_age_months must be >= 0");
  OpportunityProfile out;
  out.had_ri = child.interview_cmc - child.birth_cmc >= ri_age_months;
  for (const auto& e : calendar) {
    if (!e.area_ids.contains(child.area_id)) continue;
    // months m in the campaign window, before the interview, at which the
    // child's age falls inside the target range
    const int lo = std::max(e.start_cmc, child.birth_cmc + e.min_age_months);
    const int hi = std::min({e.end_cmc, child.interview_cmc - 1,
                             child.birth_cmc + e.max_age_months});
    if (lo <= hi) ++out.sia_count;
  }
  return out;
}

CellBuildResult build_cells(std::span<const ChildRecord> children,
                            std::span<const SiaEvent> calendar,
                            const CohortGrid& grid, int ri_age_months) {
  grid.validate();
  if (ri_age_months < 0) throw InputError("ri_age_months must be >= 0");

  using Key = std::tuple<std::string, std::string, int>;  // survey, area, cohort
  struct Group {
    std::vector<const ChildRecord*> members;
    std::vector<OpportunityProfile> profiles;
  };
  std::map<Key, Group> groups;
  CellBuildResult result;

  for (const auto& child : children) {
    const auto b = cohort_index(child.birth_cmc, grid);
    if (!b) {
      result.rejections.push_back(
          {child.row, child.survey_id, child.area_id, 0, reason::kOutOfGrid});
      continue;
    }
    auto& g = groups[{child.survey_id, child.area_id, *b}];
    g.members.push_back(&child);
    g.profiles.push_back(opportunity_profile(child, calendar, ri_age_months));
  }

  for (auto& [key, g] : groups) {
    const auto& [survey, area, b] = key;
    const auto& first = g.profiles.front();
    const bool all_ri = std::all_of(g.profiles.begin(), g.profiles.end(),
                                    [](const auto& p) { return p.had_ri; });
    const bool same = std::all_of(g.profiles.begin(), g.profiles.end(),
                                  [&](const auto& p) { return p == first; });
    const char* why = nullptr;
    if (!all_ri)
      why = reason::kNoRi;
    else if (!same)
      why = reason::kMixed;
    else if (first.sia_count > 1)
      why = reason::kMultiSia;

    if (why) {
      for (const auto* c : g.members)
        result.rejections.push_back({c->row, survey, area, b, why});
      continue;
    }
    EligibleCell cell{area, b, survey, first.sia_count, {}};
    cell.children.reserve(g.members.size());
    for (const auto* c : g.members) cell.children.push_back(*c);
    result.cells.push_back(std::move(cell));
  }
  std::stable_sort(result.rejections.begin(), result.rejections.end(),
                   [](const Rejection& a, const Rejection& b) { return a.row < b.row; });
  return result;
}

}  // namespace ricov
