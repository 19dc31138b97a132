#include "gflm/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace gflm {

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw std::invalid_argument(where + ": '" + text + "' is not a number");
  }
  return v;
}

// Reads a CSV file into header + rows, skipping blank lines.
struct Table {
  std::vector<std::string> header;
  std::vector<std::pair<int, std::vector<std::string>>> rows;  // line number
};

Table read_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Table t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      t.rows.emplace_back(lineno, std::move(fields));
    }
  }
  if (t.header.empty()) {
    throw std::invalid_argument(path.string() + ": empty file");
  }
  return t;
}

std::string where(const std::filesystem::path& path, int line) {
  return path.string() + ":" + std::to_string(line);
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, ptr);
}

std::vector<CurveRow> read_curves_csv(const std::filesystem::path& path) {
  const Table t = read_table(path);
  if (t.header != std::vector<std::string>{"id", "t", "x"}) {
    throw std::invalid_argument(path.string() +
                                ": curve file header must be 'id,t,x'");
  }
  std::vector<CurveRow> rows;
  rows.reserve(t.rows.size());
  for (const auto& [line, f] : t.rows) {
    if (f.size() != 3) {
      throw std::invalid_argument(where(path, line) + ": expected 3 fields");
    }
    if (f[0].empty()) {
      throw std::invalid_argument(where(path, line) + ": empty id");
    }
    rows.push_back({f[0], parse_number(f[1], where(path, line)),
                    parse_number(f[2], where(path, line))});
  }
  if (rows.empty()) throw std::invalid_argument(path.string() + ": no rows");
  return rows;
}

std::vector<ResponseRow> read_responses_csv(const std::filesystem::path& path) {
  const Table t = read_table(path);
  const bool with_trials =
      t.header == std::vector<std::string>{"id", "y", "trials"};
  if (!with_trials && t.header != std::vector<std::string>{"id", "y"}) {
    throw std::invalid_argument(
        path.string() + ": response file header must be 'id,y' or "
                        "'id,y,trials'");
  }
  std::vector<ResponseRow> rows;
  for (const auto& [line, f] : t.rows) {
    if (f.size() != t.header.size()) {
      throw std::invalid_argument(where(path, line) + ": expected " +
                                  std::to_string(t.header.size()) +
                                  " fields");
    }
    ResponseRow r{f[0], parse_number(f[1], where(path, line)), std::nullopt};
    if (with_trials) {
      const double m = parse_number(f[2], where(path, line));
      if (!(m >= 1.0) || m != std::floor(m)) {
        throw std::invalid_argument(where(path, line) +
                                    ": trials must be a positive integer");
      }
      r.trials = m;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

struct Grouped {
  Eigen::VectorXd grid;
  std::vector<std::string> ids;
  std::vector<std::vector<std::pair<double, double>>> points;
};

Grouped group_curves(const std::vector<CurveRow>& curves) {
  Grouped g;
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<double> ts;
  ts.reserve(curves.size());
  for (const auto& row : curves) {
    auto [it, inserted] = slot.try_emplace(row.id, g.ids.size());
    if (inserted) {
      g.ids.push_back(row.id);
      g.points.emplace_back();
    }
    g.points[it->second].emplace_back(row.t, row.x);
    ts.push_back(row.t);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  if (ts.size() < 2) {
    throw std::invalid_argument("curves need at least two distinct t values");
  }
  g.grid = Eigen::Map<Eigen::VectorXd>(ts.data(),
                                       static_cast<Eigen::Index>(ts.size()));
  return g;
}

std::vector<SubjectCurve> make_subjects(const Grouped& g) {
  std::vector<SubjectCurve> subjects;
  subjects.reserve(g.ids.size());
  for (std::size_t i = 0; i < g.ids.size(); ++i) {
    std::vector<double> t;
    std::vector<double> x;
    for (const auto& [tt, xx] : g.points[i]) {
      t.push_back(tt);
      x.push_back(xx);
    }
    subjects.push_back(make_subject(g.ids[i], g.grid, t, x));
  }
  return subjects;
}

}  // namespace

FunctionalDataset assemble_dataset(const std::vector<CurveRow>& curves,
                                   const std::vector<ResponseRow>& responses,
                                   FamilyTag family) {
  const Grouped g = group_curves(curves);
  std::unordered_map<std::string, const ResponseRow*> by_id;
  for (const auto& r : responses) {
    if (!by_id.emplace(r.id, &r).second) {
      throw std::invalid_argument("duplicate response for id '" + r.id + "'");
    }
  }
  FunctionalDataset data;
  data.grid = g.grid;
  data.family = family;
  data.subjects = make_subjects(g);
  const auto n = static_cast<Eigen::Index>(g.ids.size());
  data.response.resize(n);
  if (family == FamilyTag::binomial) data.trials.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string& id = g.ids[static_cast<std::size_t>(i)];
    const auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw std::invalid_argument("missing response for id '" + id + "'");
    }
    data.response(i) = it->second->y;
    if (family == FamilyTag::binomial) {
      if (!it->second->trials) {
        throw std::invalid_argument("binomial family needs a trials column");
      }
      data.trials(i) = *it->second->trials;
    }
    by_id.erase(it);
  }
  if (!by_id.empty()) {
    throw std::invalid_argument("response for id '" + by_id.begin()->first +
                                "' has no curve");
  }
  data.validate();
  return data;
}

FunctionalDataset curves_only_dataset(const std::vector<CurveRow>& curves) {
  const Grouped g = group_curves(curves);
  FunctionalDataset data;
  data.grid = g.grid;
  data.family = FamilyTag::gaussian;
  data.subjects = make_subjects(g);
  data.response = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.ids.size()));
  data.validate();
  return data;
}

void write_curves_csv(const FunctionalDataset& data, std::ostream& out) {
  out << "id,t,x\n";
  for (const auto& s : data.subjects) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      out << s.id << ',' << format_double(data.grid(static_cast<Eigen::Index>(s.index[j])))
          << ',' << format_double(s.values(static_cast<Eigen::Index>(j)))
          << '\n';
    }
  }
}

void write_responses_csv(const FunctionalDataset& data, std::ostream& out) {
  const bool binomial = data.family == FamilyTag::binomial;
  out << (binomial ? "id,y,trials\n" : "id,y\n");
  for (std::size_t i = 0; i < data.num_subjects(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << data.subjects[i].id << ',' << format_double(data.response(r));
    if (binomial) out << ',' << format_double(data.trials(r));
    out << '\n';
  }
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

nlohmann::ordered_json test_result_json(const TestResult& r) {
  nlohmann::ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["hypothesis"] = std::string(to_string(r.hypothesis));
  j["method"] = std::string(to_string(r.method));
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  if (r.method == TestMethod::arlrt) {
    j["null_draws"] = r.null_draws;
    j["mass_at_zero"] = r.mass_at_zero;
  } else {
    j["reference"] = {{"scale", r.score_scale}, {"df", r.score_df}};
  }
  j["K_x"] = r.num_components;
  j["K_u"] = r.num_basis;
  j["spectral_rank"] = r.num_spectral;
  j["lambda_hat"] = r.lambda_hat;
  j["sigma2_u"] = r.sigma2_u;
  j["sigma2_e"] = r.sigma2_e;
  j["sigma2_x"] = r.noise_var;
  j["converged"] = r.converged;
  j["diverged"] = r.diverged;
  j["null_converged"] = r.null_converged;
  j["iterations"] = r.iterations;
  j["beta_hat"] = {{"t", to_vector(r.grid)}, {"value", to_vector(r.coefficient)}};
  return j;
}

nlohmann::ordered_json fpca_json(const FpcaModel& model,
                                 const std::vector<double>& aic) {
  nlohmann::ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["K_x"] = model.num_components;
  j["eigenvalues"] = to_vector(model.eigenvalues);
  j["sigma2_x"] = model.noise_var;
  j["aic"] = aic;
  j["grid"] = to_vector(model.grid);
  j["mean"] = to_vector(model.mean);
  nlohmann::ordered_json funcs = nlohmann::ordered_json::array();
  for (int k = 0; k < model.num_components; ++k) {
    funcs.push_back(to_vector(model.eigenfunctions.col(k)));
  }
  j["eigenfunctions"] = funcs;
  return j;
}

nlohmann::ordered_json experiment_json(const ExperimentResult& r) {
  nlohmann::ordered_json j;
  j["family"] = std::string(to_string(r.family));
  j["hypothesis"] = std::string(to_string(r.hypothesis));
  j["method"] = std::string(to_string(r.method));
  j["n"] = r.n;
  j["m"] = r.m;
  j["coefficient"] = std::string(to_string(r.coefficient));
  j["delta"] = r.delta;
  j["replicates"] = r.replicates;
  j["rejections"] = r.rejections;
  j["rate"] = r.rate();
  j["se"] = r.standard_error();
  j["nonconverged"] = r.nonconverged;
  j["rejections_nonconverged"] = r.rejections_nonconverged;
  j["rate_converged"] = r.rate_converged();
  j["failures"] = r.failures;
  return j;
}

void write_experiment_csv(const std::vector<ExperimentResult>& results,
                          std::ostream& out) {
  out << "family,hypothesis,method,n,m_i,coefficient,delta,replicates,"
         "rejections,rate,se,nonconverged,rate_converged,failures\n";
  for (const auto& r : results) {
    out << to_string(r.family) << ',' << to_string(r.hypothesis) << ','
        << to_string(r.method) << ',' << r.n << ',' << r.m << ','
        << to_string(r.coefficient) << ',' << format_double(r.delta) << ','
        << r.replicates << ',' << r.rejections << ','
        << format_double(r.rate()) << ',' << format_double(r.standard_error())
        << ',' << r.nonconverged << ',' << format_double(r.rate_converged())
        << ',' << r.failures << '\n';
  }
}

void write_experiment_summary(const std::vector<ExperimentResult>& results,
                              std::ostream& out) {
  // columns in first-seen order of (hypothesis, method)
  std::vector<std::pair<Hypothesis, TestMethod>> columns;
  for (const auto& r : results) {
    const std::pair key{r.hypothesis, r.method};
    if (std::find(columns.begin(), columns.end(), key) == columns.end()) {
      columns.push_back(key);
    }
  }
  out << std::left << std::setw(10) << "family" << std::setw(6) << "n"
      << std::setw(5) << "m" << std::setw(11) << "beta(t)" << std::setw(8)
      << "delta";
  for (const auto& [h, m] : columns) {
    out << std::setw(22)
        << (std::string(to_string(m)) + ":" + std::string(to_string(h)));
  }
  out << '\n';
  std::vector<bool> done(results.size(), false);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (done[i]) continue;
    const auto& a = results[i];
    out << std::left << std::setw(10) << to_string(a.family) << std::setw(6)
        << a.n << std::setw(5) << a.m << std::setw(11)
        << to_string(a.coefficient) << std::setw(8) << format_double(a.delta);
    for (const auto& [h, m] : columns) {
      std::string cell = "-";
      for (std::size_t k = i; k < results.size(); ++k) {
        const auto& b = results[k];
        if (!done[k] && b.family == a.family && b.n == a.n && b.m == a.m &&
            b.coefficient == a.coefficient && b.delta == a.delta &&
            b.hypothesis == h && b.method == m) {
          std::ostringstream c;
          c << std::fixed << std::setprecision(3) << b.rate() << " ("
            << b.nonconverged + b.failures << ")";
          cell = c.str();
          done[k] = true;
          break;
        }
      }
      out << std::setw(22) << cell;
    }
    out << '\n';
  }
  out << "rates are rejection fractions; parentheses count non-converged or "
         "failed replicates\n";
}

}  // namespace gflm
