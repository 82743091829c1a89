#ifndef RICOV_COHORT_HPP
#define RICOV_COHORT_HPP

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ricov {

// One surveyed child. `row` is the 1-based data line in the source file.
struct ChildRecord {
  std::string survey_id;
  std::string area_id;
  std::string stratum_id;
  std::string cluster_id;
  double weight = 1.0;
  int birth_cmc = 0;
  int interview_cmc = 0;
  int mcv1 = 0;
  long row = 0;
};

struct SiaEvent {
  std::string sia_id;
  int start_cmc = 0;
  int end_cmc = 0;
  int min_age_months = 0;
  int max_age_months = 0;
  std::set<std::string> area_ids;
};

struct CohortGrid {
  int origin_cmc = 1201;  // Jan 2000
  int cohort_len_months = 6;
  int num_cohorts = 1;

  void validate() const;
};

struct OpportunityProfile {
  bool had_ri = false;
  int sia_count = 0;
  bool operator==(const OpportunityProfile&) const = default;
};

struct EligibleCell {
  std::string area_id;
  int cohort_index = 0;
  std::string survey_id;
  int sia_indicator = 0;
  std::vector<ChildRecord> children;
};

struct Rejection {
  long row = 0;
  std::string survey_id;
  std::string area_id;
  int cohort_index = 0;  // 0 when the child is outside the grid
  std::string reason;
};

struct CellBuildResult {
  std::vector<EligibleCell> cells;
  std::vector<Rejection> rejections;
};

/// Century-month code, 12*(year-1900)+month.
int cmc(int year, int month);

/// 1-based cohort index, or nullopt when the birth month lies outside the grid.
std::optional<int> cohort_index(int birth_cmc, const CohortGrid& grid);

void validate(const ChildRecord& child);
void validate(const SiaEvent& event);

/// RI opportunity and number of SIA opportunities a child had before the
/// interview month. Age eligibility is evaluated at month granularity and an
/// SIA only counts through interview_cmc - 1.
OpportunityProfile opportunity_profile(const ChildRecord& child,
                                       std::span<const SiaEvent> calendar,
                                       int ri_age_months);

/// Groups children by (survey, area, cohort) and keeps the groups whose
/// members share a (true,0) or (true,1) profile. Output cells are sorted by
/// (survey, area, cohort); rejections cover every child that was dropped.
CellBuildResult build_cells(std::span<const ChildRecord> children,
                            std::span<const SiaEvent> calendar,
                            const CohortGrid& grid, int ri_age_months);

namespace reason {
inline constexpr const char* kOutOfGrid = "birth outside cohort grid";
inline constexpr const char* kNoRi = "no RI opportunity";
inline constexpr const char* kMixed = "mixed SIA exposure";
inline constexpr const char* kMultiSia = "more than one SIA";
}  // namespace reason

}  // namespace ricov

#endif
