#ifndef RICOV_IO_HPP
#define RICOV_IO_HPP

#include <map>
#include <string>
#include <vector>

#include "ricov/assessment.hpp"
#include "ricov/cohort.hpp"
#include "ricov/design.hpp"
#include "ricov/fit.hpp"
#include "ricov/simulate.hpp"

namespace ricov {

// A parsed CSV file. Lines starting with '#' and blank lines are skipped;
// fields are comma separated and may be double-quoted.
class CsvTable {
 public:
  static CsvTable read(const std::string& path, const std::vector<std::string>& required);
  static CsvTable parse(const std::string& text, const std::string& name,
                        const std::vector<std::string>& required);

  std::size_t size() const { return rows_.size(); }
  long line(std::size_t r) const { return lines_[r]; }
  bool has(const std::string& column) const { return index_.contains(column); }
  const std::string& get(std::size_t r, const std::string& column) const;
  long get_int(std::size_t r, const std::string& column) const;
  double get_double(std::size_t r, const std::string& column) const;

 private:
  std::string name_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<long> lines_;
};

struct ChildrenInput {
  std::vector<ChildRecord> children;
  std::vector<Rejection> rejections;  // rows with missing fields
};

ChildrenInput read_children(const std::string& path);
std::vector<SiaEvent> read_sia_calendar(const std::string& path);

struct AreaGraph {
  std::vector<std::string> area_ids;  // order of first appearance
  AdjacencyGraph graph;
};
/// Rows `area_id,neighbor_id`; an empty neighbor declares an isolated area.
/// Every edge must be listed in both directions.
AreaGraph read_adjacency(const std::string& path);

std::vector<EligibleCell> read_cells(const std::string& path);
std::vector<CellEstimate> read_direct_estimates(const std::string& path);

// Writers. Every file starts with "# manifest=<hash>".
void write_children(const std::string& path, const std::vector<ChildRecord>& children,
                    const std::string& manifest);
void write_sia_calendar(const std::string& path, const std::vector<SiaEvent>& calendar,
                        const std::string& manifest);
void write_adjacency(const std::string& path, const std::vector<std::string>& area_ids,
                     const AdjacencyGraph& graph, const std::string& manifest);
void write_truth(const std::string& path, const std::vector<std::string>& area_ids,
                 const Truth& truth, const std::string& manifest);
void write_cells(const std::string& path, const std::vector<EligibleCell>& cells,
                 const std::string& manifest);
void write_rejections(const std::string& path, const std::vector<Rejection>& rejections,
                      const std::string& manifest);
void write_direct_estimates(const std::string& path, const std::vector<CellEstimate>& estimates,
                            const std::string& manifest);
void write_degenerate(const std::string& path, const std::vector<DegenerateCell>& cells,
                      const std::string& manifest);
void write_ri_coverage(const std::string& path, const std::vector<PosteriorSummary>& rows,
                       const std::string& manifest);
void write_fixed_effects(const std::string& path, const std::vector<QuantileSummary>& rows,
                         const std::string& manifest);
void write_hyper_posterior(const std::string& path, const HyperPosterior& hp,
                           const std::string& manifest);

struct AssessmentRow {
  std::string variant;
  AssessmentReport report;
};
void write_assessment(const std::string& path, const std::vector<AssessmentRow>& rows,
                      const std::string& manifest);

/// Fit serialization (JSON). Per-point moments are not stored.
void write_fit(const std::string& path, const FitResult& fit, const std::string& manifest);
FitResult read_fit(const std::string& path, std::string* manifest = nullptr);

/// Lowercase hex SHA-256 of a byte string / file.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

std::string read_text(const std::string& path);

}  // namespace ricov

#endif
