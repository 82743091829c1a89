#include "ricov/io.hpp"

#include <openssl/evp.h>

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "ricov/core.hpp"

namespace ricov {

using nlohmann::json;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::vector<std::string> split_fields(const std::string& line, const std::string& where) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"' && cur.empty()) {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw InputError(where + ": unterminated quoted field");
  out.push_back(std::move(cur));
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

CsvTable CsvTable::parse(const std::string& text, const std::string& name,
                         const std::vector<std::string>& required) {
  CsvTable t;
  t.name_ = name;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  bool have_header = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    const std::string where = name + ":" + std::to_string(lineno);
    auto fields = split_fields(line, where);
    for (auto& f : fields) f = trim(f);
    if (!have_header) {
      for (std::size_t k = 0; k < fields.size(); ++k)
        if (!t.index_.emplace(fields[k], k).second)
          throw InputError(where + ": duplicate column '" + fields[k] + "'");
      for (const auto& col : required)
        if (!t.index_.contains(col))
          throw InputError(name + ": missing required column '" + col + "'");
      width = fields.size();
      have_header = true;
      continue;
    }
    if (fields.size() != width)
      throw InputError(where + ": expected " + std::to_string(width) + " fields, found " +
                       std::to_string(fields.size()));
    t.rows_.push_back(std::move(fields));
    t.lines_.push_back(lineno);
  }
  if (!have_header) throw InputError(name + ": empty file (no header)");
  return t;
}

CsvTable CsvTable::read(const std::string& path, const std::vector<std::string>& required) {
  return parse(read_text(path), path, required);
}

const std::string& CsvTable::get(std::size_t r, const std::string& column) const {
  const auto it = index_.find(column);
  if (it == index_.end()) throw InputError(name_ + ": no column '" + column + "'");
  return rows_[r][it->second];
}

long CsvTable::get_int(std::size_t r, const std::string& column) const {
  const auto& s = get(r, column);
  long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size())
    throw InputError(name_ + ":" + std::to_string(lines_[r]) + ": column '" + column +
                     "': expected an integer, found '" + s + "'");
  return v;
}

double CsvTable::get_double(std::size_t r, const std::string& column) const {
  const auto& s = get(r, column);
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
    throw InputError(name_ + ":" + std::to_string(lines_[r]) + ": column '" + column +
                     "': expected a number, found '" + s + "'");
  return v;
}

ChildrenInput read_children(const std::string& path) {
  const auto t = CsvTable::read(path, {"survey_id", "area_id", "stratum_id", "cluster_id",
                                       "weight", "birth_cmc", "interview_cmc", "mcv1"});
  ChildrenInput out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    ChildRecord c;
    c.row = t.line(r);
    c.survey_id = t.get(r, "survey_id");
    c.area_id = t.get(r, "area_id");
    c.stratum_id = t.get(r, "stratum_id");
    c.cluster_id = t.get(r, "cluster_id");
    const char* missing = nullptr;
    if (t.get(r, "birth_cmc").empty())
      missing = "missing birth_cmc";
    else if (t.get(r, "mcv1").empty())
      missing = "missing mcv1";
    if (missing) {
      out.rejections.push_back({c.row, c.survey_id, c.area_id, 0, missing});
      continue;
    }
    c.weight = t.get_double(r, "weight");
    c.birth_cmc = static_cast<int>(t.get_int(r, "birth_cmc"));
    c.interview_cmc = static_cast<int>(t.get_int(r, "interview_cmc"));
    c.mcv1 = static_cast<int>(t.get_int(r, "mcv1"));
    try {
      validate(c);
    } catch (const InputError& e) {
      throw InputError(path + ":" + std::to_string(c.row) + ": " + e.what());
    }
    out.children.push_back(std::move(c));
  }
  return out;
}

std::vector<SiaEvent> read_sia_calendar(const std::string& path) {
  const auto t = CsvTable::read(
      path, {"sia_id", "start_cmc", "end_cmc", "min_age_months", "max_age_months", "area_ids"});
  std::vector<SiaEvent> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    SiaEvent e;
    e.sia_id = t.get(r, "sia_id");
    e.start_cmc = static_cast<int>(t.get_int(r, "start_cmc"));
    e.end_cmc = static_cast<int>(t.get_int(r, "end_cmc"));
    e.min_age_months = static_cast<int>(t.get_int(r, "min_age_months"));
    e.max_age_months = static_cast<int>(t.get_int(r, "max_age_months"));
    std::istringstream ids(t.get(r, "area_ids"));
    std::string id;
    while (std::getline(ids, id, ';'))
      if (!trim(id).empty()) e.area_ids.insert(trim(id));
    try {
      validate(e);
    } catch (const InputError& err) {
      throw InputError(path + ":" + std::to_string(t.line(r)) + ": " + err.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

AreaGraph read_adjacency(const std::string& path) {
  const auto t = CsvTable::read(path, {"area_id", "neighbor_id"});
  AreaGraph g;
  std::map<std::string, int> index;
  auto id_of = [&](const std::string& a) {
    const auto [it, fresh] = index.emplace(a, static_cast<int>(g.area_ids.size()));
    if (fresh) g.area_ids.push_back(a);
    return it->second;
  };
  std::set<std::pair<int, int>> directed;
  for (std::size_t r = 0; r < t.size(); ++r) {
    const auto& a = t.get(r, "area_id");
    const auto& b = t.get(r, "neighbor_id");
    const std::string where = path + ":" + std::to_string(t.line(r));
    if (a.empty()) throw InputError(where + ": empty area_id");
    const int i = id_of(a);
    if (b.empty()) continue;
    if (a == b) throw InputError(where + ": area '" + a + "' lists itself as a neighbor");
    directed.emplace(i, id_of(b));
  }
  std::vector<std::pair<int, int>> edges;
  for (const auto& [i, j] : directed) {
    if (!directed.contains({j, i}))
      throw InputError(path + ": adjacency is not symmetric: '" + g.area_ids[i] + "' lists '" +
                       g.area_ids[j] + "' but not the reverse");
    if (i < j) edges.emplace_back(i, j);
  }
  g.graph = AdjacencyGraph::from_edges(static_cast<int>(g.area_ids.size()), std::move(edges));
  return g;
}

std::vector<EligibleCell> read_cells(const std::string& path) {
  const auto t = CsvTable::read(path, {"survey_id", "area_id", "cohort", "x", "stratum_id",
                                       "cluster_id", "weight", "mcv1"});
  std::map<std::tuple<std::string, std::string, long>, std::size_t> index;
  std::vector<EligibleCell> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    ChildRecord c;
    c.row = t.line(r);
    c.survey_id = t.get(r, "survey_id");
    c.area_id = t.get(r, "area_id");
    c.stratum_id = t.get(r, "stratum_id");
    c.cluster_id = t.get(r, "cluster_id");
    c.weight = t.get_double(r, "weight");
    c.mcv1 = static_cast<int>(t.get_int(r, "mcv1"));
    const long b = t.get_int(r, "cohort");
    const int x = static_cast<int>(t.get_int(r, "x"));
    const std::string where = path + ":" + std::to_string(c.row);
    if (b < 1) throw InputError(where + ": column 'cohort' must be >= 1");
    if (x != 0 && x != 1) throw InputError(where + ": column 'x' must be 0 or 1");
    if (!(c.weight > 0)) throw InputError(where + ": column 'weight' must be > 0");
    if (c.mcv1 != 0 && c.mcv1 != 1) throw InputError(where + ": column 'mcv1' must be 0 or 1");
    const auto key = std::make_tuple(c.survey_id, c.area_id, b);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, out.size()).first;
      out.push_back({c.area_id, static_cast<int>(b), c.survey_id, x, {}});
    } else if (out[it->second].sia_indicator != x) {
      throw InputError(where + ": column 'x' disagrees with earlier rows of the same cell");
    }
    out[it->second].children.push_back(std::move(c));
  }
  return out;
}

std::vector<CellEstimate> read_direct_estimates(const std::string& path) {
  const auto t = CsvTable::read(path, {"area_id", "cohort", "survey_id", "x", "n", "p_hat",
                                       "v_hat", "theta_hat", "V_hat"});
  std::vector<CellEstimate> out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    CellEstimate e;
    e.area_id = t.get(r, "area_id");
    e.cohort_index = static_cast<int>(t.get_int(r, "cohort"));
    e.survey_id = t.get(r, "survey_id");
    e.sia_indicator = static_cast<int>(t.get_int(r, "x"));
    e.n = t.get_int(r, "n");
    e.p_hat = t.get_double(r, "p_hat");
    e.v_hat = t.get_double(r, "v_hat");
    e.theta_hat = t.get_double(r, "theta_hat");
    e.V_hat = t.get_double(r, "V_hat");
    const std::string where = path + ":" + std::to_string(t.line(r));
    if (e.sia_indicator != 0 && e.sia_indicator != 1)
      throw InputError(where + ": column 'x' must be 0 or 1");
    if (!(e.V_hat > 0)) throw InputError(where + ": column 'V_hat' must be > 0");
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Writer {
 public:
  Writer(const std::string& path, const std::string& manifest) : path_(path), out_(path) {
    if (!out_) throw InputError("cannot write '" + path + "'");
    out_ << "# manifest=" << manifest << "\n";
  }
  template <class... T>
  void row(const T&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(fields), first = false), ...);
    out_ << "\n";
  }
  ~Writer() noexcept(false) {
    out_.flush();
    if (!out_) throw InputError("write to '" + path_ + "' failed");
  }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  std::string path_;
  std::ofstream out_;
};

}  // namespace

void write_children(const std::string& path, const std::vector<ChildRecord>& children,
                    const std::string& manifest) {
  Writer w(path, manifest);
  w.row("survey_id", "area_id", "stratum_id", "cluster_id", "weight", "birth_cmc",
        "interview_cmc", "mcv1");
  for (const auto& c : children)
    w.row(c.survey_id, c.area_id, c.stratum_id, c.cluster_id, c.weight, c.birth_cmc,
          c.interview_cmc, c.mcv1);
}

void write_sia_calendar(const std::string& path, const std::vector<SiaEvent>& calendar,
                        const std::string& manifest) {
  Writer w(path, manifest);
  w.row("sia_id", "start_cmc", "end_cmc", "min_age_months", "max_age_months", "area_ids");
  for (const auto& e : calendar) {
    std::string ids;
    for (const auto& a : e.area_ids) ids += (ids.empty() ? "" : ";") + a;
    w.row(e.sia_id, e.start_cmc, e.end_cmc, e.min_age_months, e.max_age_months, ids);
  }
}

void write_adjacency(const std::string& path, const std::vector<std::string>& area_ids,
                     const AdjacencyGraph& graph, const std::string& manifest) {
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(graph.num_areas));
  for (const auto& [i, j] : graph.edges) {
    nbrs[i].push_back(j);
    nbrs[j].push_back(i);
  }
  Writer w(path, manifest);
  w.row("area_id", "neighbor_id");
  for (int i = 0; i < graph.num_areas; ++i) {
    if (nbrs[i].empty()) w.row(area_ids[i], "");
    std::sort(nbrs[i].begin(), nbrs[i].end());
    for (int j : nbrs[i]) w.row(area_ids[i], area_ids[j]);
  }
}

void write_truth(const std::string& path, const std::vector<std::string>& area_ids,
                 const Truth& truth, const std::string& manifest) {
  Writer w(path, manifest);
  w.row("area_id", "cohort", "p_ri_true");
  for (int i = 0; i < truth.p_ri.rows(); ++i)
    for (int b = 0; b < truth.p_ri.cols(); ++b) w.row(area_ids[i], b + 1, truth.p_ri(i, b));
}

void write_cells(const std::string& path, const std::vector<EligibleCell>& cells,
                 const std::string& manifest) {
  Writer w(path, manifest);
  w.row("survey_id", "area_id", "cohort", "x", "stratum_id", "cluster_id", "weight", "mcv1");
  for (const auto& cell : cells)
    for (const auto& c : cell.children)
      w.row(cell.survey_id, cell.area_id, cell.cohort_index, cell.sia_indicator, c.stratum_id,
            c.cluster_id, c.weight, c.mcv1);
}

void write_rejections(const std::string& path, const std::vector<Rejection>& rejections,
                      const std::string& manifest) {
  Writer w(path, manifest);
  w.row("row", "survey_id", "area_id", "cohort", "reason");
  for (const auto& r : rejections) w.row(r.row, r.survey_id, r.area_id, r.cohort_index, r.reason);
}

void write_direct_estimates(const std::string& path, const std::vector<CellEstimate>& estimates,
                            const std::string& manifest) {
  Writer w(path, manifest);
  w.row("area_id", "cohort", "survey_id", "x", "n", "p_hat", "v_hat", "theta_hat", "V_hat");
  for (const auto& e : estimates)
    w.row(e.area_id, e.cohort_index, e.survey_id, e.sia_indicator, e.n, e.p_hat, e.v_hat,
          e.theta_hat, e.V_hat);
}

void write_degenerate(const std::string& path, const std::vector<DegenerateCell>& cells,
                      const std::string& manifest) {
  Writer w(path, manifest);
  w.row("area_id", "cohort", "survey_id", "n", "p_hat", "v_hat", "reason");
  for (const auto& d : cells)
    w.row(d.area_id, d.cohort_index, d.survey_id, d.n, d.p_hat, d.v_hat, d.reason);
}

void write_ri_coverage(const std::string& path, const std::vector<PosteriorSummary>& rows,
                       const std::string& manifest) {
  Writer w(path, manifest);
  w.row("area_id", "cohort", "median", "lower95", "upper95");
  for (const auto& r : rows) w.row(r.area_id, r.cohort, r.median, r.lower95, r.upper95);
}

void write_fixed_effects(const std::string& path, const std::vector<QuantileSummary>& rows,
                         const std::string& manifest) {
  Writer w(path, manifest);
  w.row("parameter", "median", "lower95", "upper95");
  for (const auto& r : rows) w.row(r.name, r.median, r.lower95, r.upper95);
}

void write_hyper_posterior(const std::string& path, const HyperPosterior& hp,
                           const std::string& manifest) {
  static const char* natural[] = {"sigma_alpha", "sigma_gamma", "sigma_delta", "sigma_tau",
                                  "sigma_phi",   "sigma_epsilon", "rho_phi"};
  Writer w(path, manifest);
  std::ostringstream head;
  head << "point";
  for (const auto& n : hp.names) head << "," << n;
  const std::size_t d = hp.names.size();
  for (std::size_t j = 0; j < d && j < 7; ++j) head << "," << natural[j];
  head << ",log_posterior,weight";
  w.row(head.str());
  for (std::size_t k = 0; k < hp.points.size(); ++k) {
    const auto& p = hp.points[k];
    std::ostringstream line;
    line << k;
    for (int j = 0; j < p.psi.size(); ++j) line << "," << num(p.psi[j]);
    for (double v : p.natural) line << "," << num(v);
    line << "," << num(p.log_posterior) << "," << num(p.weight);
    w.row(line.str());
  }
}

void write_assessment(const std::string& path, const std::vector<AssessmentRow>& rows,
                      const std::string& manifest) {
  Writer w(path, manifest);
  w.row("variant,dic,p_d,waic,lcpo,share_icar,share_space_iid,share_rw2,share_time_iid,"
        "share_space_time,share_survey");
  for (const auto& r : rows) {
    const auto& a = r.report;
    const auto& s = a.variance_shares;
    w.row(r.variant, a.dic, a.p_d, a.waic, a.lcpo, s[0], s[1], s[2], s[3], s[4], s[5]);
  }
}

namespace {

json prior_json(const PcPrecisionPrior& p) { return {{"u", p.u}, {"alpha", p.alpha}}; }
PcPrecisionPrior prior_from(const json& j) {
  return {j.at("u").get<double>(), j.at("alpha").get<double>()};
}

json vec_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_fit(const std::string& path, const FitResult& fit, const std::string& manifest) {
  const auto& s = fit.spec;
  const auto& pr = s.priors;
  json j;
  j["manifest"] = manifest;
  j["variant"] = to_string(s.variant);
  j["num_areas"] = s.num_areas;
  j["num_cohorts"] = s.num_cohorts;
  j["num_surveys"] = s.num_surveys;
  json priors = {{"icar", prior_json(pr.icar)},     {"space_iid", prior_json(pr.space_iid)},
                 {"rw2", prior_json(pr.rw2)},       {"time_iid", prior_json(pr.time_iid)},
                 {"survey", prior_json(pr.survey)}, {"rho", {{"u0", pr.rho.u0}, {"alpha0", pr.rho.alpha0}}},
                 {"fixed_effect_precision", pr.fixed_effect_precision}};
  if (pr.interaction) priors["interaction"] = prior_json(*pr.interaction);
  j["priors"] = priors;
  j["area_ids"] = fit.maps.area_ids;
  j["survey_ids"] = fit.maps.survey_ids;
  j["edges"] = fit.graph.edges;
  json cells = json::array();
  for (const auto& c : fit.cells)
    cells.push_back({c.area_id, c.cohort_index, c.survey_id, c.sia_indicator, c.n, c.p_hat,
                     c.v_hat, c.theta_hat, c.V_hat});
  j["cells"] = cells;
  const auto layout = build_layout(s);
  j["layout"] = {{"beta0", layout.beta0}, {"beta1", layout.beta1}, {"alpha", layout.alpha},
                 {"gamma", layout.gamma}, {"delta", layout.delta}, {"tau", layout.tau},
                 {"phi", layout.phi},     {"epsilon", layout.epsilon}, {"total", layout.total}};
  const auto& h = fit.hyper;
  json hyper;
  hyper["names"] = h.names;
  hyper["mode"] = vec_json(h.mode);
  json hess = json::array();
  for (int r = 0; r < h.hessian.rows(); ++r) hess.push_back(vec_json(h.hessian.row(r).transpose()));
  hyper["hessian"] = hess;
  hyper["mode_log_posterior"] = h.mode_log_posterior;
  hyper["mode_gradient_norm"] = h.mode_gradient_norm;
  hyper["iterations"] = h.iterations;
  hyper["augment_all"] = h.augment_all;
  hyper["nnz_factor"] = h.nnz_factor;
  json points = json::array();
  for (const auto& p : h.points)
    points.push_back({{"psi", vec_json(p.psi)},
                      {"natural", p.natural},
                      {"log_posterior", p.log_posterior},
                      {"weight", p.weight}});
  hyper["points"] = points;
  j["hyper"] = hyper;

  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(1) << "\n";
}

FitResult read_fit(const std::string& path, std::string* manifest) {
  try {
    const json j = json::parse(read_text(path));
    FitResult f;
    auto& s = f.spec;
    s.variant = parse_variant(j.at("variant").get<std::string>());
    s.num_areas = j.at("num_areas").get<int>();
    s.num_cohorts = j.at("num_cohorts").get<int>();
    s.num_surveys = j.at("num_surveys").get<int>();
    const auto& p = j.at("priors");
    s.priors.icar = prior_from(p.at("icar"));
    s.priors.space_iid = prior_from(p.at("space_iid"));
    s.priors.rw2 = prior_from(p.at("rw2"));
    s.priors.time_iid = prior_from(p.at("time_iid"));
    s.priors.survey = prior_from(p.at("survey"));
    if (p.contains("interaction")) s.priors.interaction = prior_from(p.at("interaction"));
    s.priors.rho = {p.at("rho").at("u0").get<double>(), p.at("rho").at("alpha0").get<double>()};
    s.priors.fixed_effect_precision = p.at("fixed_effect_precision").get<double>();
    s.validate();
    f.maps = IndexMaps(j.at("area_ids").get<std::vector<std::string>>(),
                       j.at("survey_ids").get<std::vector<std::string>>());
    f.graph = AdjacencyGraph::from_edges(s.num_areas,
                                         j.at("edges").get<std::vector<std::pair<int, int>>>());
    for (const auto& c : j.at("cells")) {
      CellEstimate e;
      e.area_id = c.at(0).get<std::string>();
      e.cohort_index = c.at(1).get<int>();
      e.survey_id = c.at(2).get<std::string>();
      e.sia_indicator = c.at(3).get<int>();
      e.n = c.at(4).get<long>();
      e.p_hat = c.at(5).get<double>();
      e.v_hat = c.at(6).get<double>();
      e.theta_hat = c.at(7).get<double>();
      e.V_hat = c.at(8).get<double>();
      f.cells.push_back(std::move(e));
    }
    f.data = make_data(f.cells, build_layout(s), f.maps);
    const auto& h = j.at("hyper");
    auto& hp = f.hyper;
    hp.names = h.at("names").get<std::vector<std::string>>();
    hp.mode = vec_from(h.at("mode"));
    const auto& hess = h.at("hessian");
    hp.hessian.resize(static_cast<Eigen::Index>(hess.size()),
                      static_cast<Eigen::Index>(hess.size()));
    for (std::size_t r = 0; r < hess.size(); ++r)
      hp.hessian.row(static_cast<Eigen::Index>(r)) = vec_from(hess[r]).transpose();
    hp.mode_log_posterior = h.at("mode_log_posterior").get<double>();
    hp.mode_gradient_norm = h.at("mode_gradient_norm").get<double>();
    hp.iterations = h.at("iterations").get<int>();
    hp.augment_all = h.at("augment_all").get<bool>();
    hp.nnz_factor = h.at("nnz_factor").get<long>();
    for (const auto& pt : h.at("points")) {
      HyperGridPoint g;
      g.psi = vec_from(pt.at("psi"));
      g.natural = pt.at("natural").get<std::vector<double>>();
      g.log_posterior = pt.at("log_posterior").get<double>();
      g.weight = pt.at("weight").get<double>();
      hp.points.push_back(std::move(g));
    }
    if (manifest) *manifest = j.value("manifest", "");
    return f;
  } catch (const json::exception& e) {
    throw InputError(path + ": malformed fit file: " + e.what());
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
    throw NumericalError("SHA-256 failed");
  std::ostringstream ss;
  for (unsigned int k = 0; k < len; ++k)
    ss << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[k]);
  return ss.str();
}

std::string sha256_file(const std::string& path) { return sha256_hex(read_text(path)); }

}  // namespace ricov
