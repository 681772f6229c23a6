#include "emaattn/dataset.hpp"

#include "emaattn/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace emaattn {
namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  for (char ch : line) {
    if (ch == delim) {
      out.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field.push_back(ch);
    }
  }
  out.push_back(field);
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_double(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool parse_long(const std::string& text, long& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

// Fills NaN cells of one row: linear between observed neighbours, nearest
// observed value at the edges.
void fill_row(Eigen::Ref<RowVector> row, const std::string& id, const std::string& feature) {
  const Eigen::Index n = row.size();
  std::vector<Eigen::Index> known;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (!std::isnan(row(t))) known.push_back(t);
  }
  if (known.empty()) {
    throw Error(Errc::malformed_row, "individual '" + id + "' has no values for feature '" + feature + "'");
  }
  for (Eigen::Index t = 0; t < known.front(); ++t) row(t) = row(known.front());
  for (Eigen::Index t = known.back() + 1; t < n; ++t) row(t) = row(known.back());
  for (std::size_t s = 0; s + 1 < known.size(); ++s) {
    const Eigen::Index a = known[s];
    const Eigen::Index b = known[s + 1];
    for (Eigen::Index t = a + 1; t < b; ++t) {
      const double w = static_cast<double>(t - a) / static_cast<double>(b - a);
      row(t) = row(a) + (row(b) - row(a)) * w;
    }
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

std::vector<std::string> MtsDataset::ids() const {
  std::vector<std::string> out;
  out.reserve(individuals.size());
  for (const auto& ind : individuals) out.push_back(ind.id);
  return out;
}

int PaddedDataset::t_valid(std::size_t i) const {
  return static_cast<int>(std::count(mask[i].begin(), mask[i].end(), true));
}

Matrix PaddedDataset::observed(std::size_t i) const {
  const Matrix& x = tensor[i];
  Matrix out(x.rows(), t_valid(i));
  Eigen::Index c = 0;
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    if (mask[i][t]) out.col(c++) = x.col(t);
  }
  return out;
}

int ClusterLabels::cluster_of(const std::string& id) const {
  auto it = assignment.find(id);
  if (it == assignment.end()) throw Error(Errc::missing_id, "no cluster label for '" + id + "'");
  return it->second;
}

std::size_t ClusterLabels::cluster_size(int c) const {
  return static_cast<std::size_t>(
      std::count_if(assignment.begin(), assignment.end(), [c](const auto& kv) { return kv.second == c; }));
}

MtsDataset parse_dataset(std::istream& in, const IngestConfig& cfg) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::empty_dataset, "input has no header");
  const auto header = split_line(line, cfg.delimiter);
  if (header.size() < 3) {
    throw Error(Errc::inconsistent_feature_count,
                "header needs individual_id, time_index and at least one feature");
  }
  const std::size_t n_features = header.size() - 2;

  // id -> time_index -> row values (NaN = missing cell)
  std::map<std::string, std::map<long, std::vector<double>>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_line(line, cfg.delimiter);
    if (fields.size() != header.size()) {
      throw Error(Errc::inconsistent_feature_count,
                  "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    }
    const std::string id = trim(fields[0]);
    if (id.empty()) throw Error(Errc::malformed_row, "line " + std::to_string(line_no) + ": empty id");
    long t = 0;
    if (!parse_long(trim(fields[1]), t) || t < 0) {
      throw Error(Errc::malformed_row, "line " + std::to_string(line_no) + ": bad time_index '" + fields[1] + "'");
    }
    std::vector<double> values(n_features, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t f = 0; f < n_features; ++f) {
      const std::string cell = trim(fields[f + 2]);
      if (cell.empty()) continue;
      if (!parse_double(cell, values[f])) {
        throw Error(Errc::malformed_row, "line " + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
      }
    }
    auto [it, inserted] = rows[id].emplace(t, std::move(values));
    if (!inserted) {
      throw Error(Errc::malformed_row,
                  "line " + std::to_string(line_no) + ": duplicate time_index " + std::to_string(t) + " for '" + id + "'");
    }
  }
  if (rows.empty()) throw Error(Errc::empty_dataset, "no data rows");

  MtsDataset ds;
  for (std::size_t f = 0; f < n_features; ++f) ds.feature_names.push_back(trim(header[f + 2]));
  for (auto& [id, by_time] : rows) {
    const long t0 = by_time.begin()->first;
    const long t1 = by_time.rbegin()->first;
    IndividualSeries ind;
    ind.id = id;
    ind.values = Matrix::Constant(static_cast<Eigen::Index>(n_features), t1 - t0 + 1,
                                  std::numeric_limits<double>::quiet_NaN());
    for (const auto& [t, values] : by_time) {
      for (std::size_t f = 0; f < n_features; ++f) ind.values(static_cast<Eigen::Index>(f), t - t0) = values[f];
    }
    for (std::size_t f = 0; f < n_features; ++f) {
      fill_row(ind.values.row(static_cast<Eigen::Index>(f)), id, ds.feature_names[f]);
    }
    ds.individuals.push_back(std::move(ind));
  }
  return ds;
}

MtsDataset load_dataset(const std::filesystem::path& path, const IngestConfig& cfg) {
  auto in = open_or_throw(path);
  return parse_dataset(in, cfg);
}

void write_dataset(std::ostream& out, const MtsDataset& ds) {
  out << "individual_id,time_index";
  for (const auto& name : ds.feature_names) out << ',' << name;
  out << '\n';
  std::ostringstream cell;
  cell.precision(17);
  for (const auto& ind : ds.individuals) {
    for (Eigen::Index t = 0; t < ind.values.cols(); ++t) {
      out << ind.id << ',' << t;
      for (Eigen::Index f = 0; f < ind.values.rows(); ++f) {
        cell.str("");
        cell << ind.values(f, t);
        out << ',' << cell.str();
      }
      out << '\n';
    }
  }
}

Normalization parse_normalization(const std::string& name) {
  if (name == "min_max") return Normalization::min_max;
  if (name == "z_score") return Normalization::z_score;
  if (name == "none") return Normalization::none;
  throw Error(Errc::config_error, "unknown normalization '" + name + "'");
}

MtsDataset normalize_per_individual(const MtsDataset& ds, Normalization mode) {
  MtsDataset out = ds;
  if (mode == Normalization::none) return out;
  for (auto& ind : out.individuals) {
    for (Eigen::Index f = 0; f < ind.values.rows(); ++f) {
      auto row = ind.values.row(f);
      if (mode == Normalization::min_max) {
        const double lo = row.minCoeff();
        const double hi = row.maxCoeff();
        if (hi > lo) {
          row = (row.array() - lo) / (hi - lo);
        } else {
          row.setConstant(0.5);
        }
      } else {
        const double mean = row.mean();
        const double var = (row.array() - mean).square().mean();
        if (var > 0.0) {
          row = (row.array() - mean) / std::sqrt(var);
        } else {
          row.setZero();
        }
      }
    }
  }
  return out;
}

PaddedDataset pad_and_mask(const MtsDataset& ds, std::optional<int> t_cap) {
  if (ds.individuals.empty()) throw Error(Errc::empty_dataset, "nothing to pad");
  int t_max = 0;
  for (const auto& ind : ds.individuals) {
    if (ind.v() != ds.v()) {
      throw Error(Errc::inconsistent_feature_count, "individual '" + ind.id + "' has a different V");
    }
    t_max = std::max(t_max, ind.t_len());
  }
  if (t_cap && *t_cap < t_max) {
    throw Error(Errc::cap_too_small,
                "t_cap " + std::to_string(*t_cap) + " < longest series " + std::to_string(t_max));
  }
  PaddedDataset pd;
  pd.feature_names = ds.feature_names;
  pd.t_pad = t_cap.value_or(t_max);
  for (const auto& ind : ds.individuals) {
    pd.ids.push_back(ind.id);
    Matrix x = Matrix::Zero(ds.v(), pd.t_pad);
    x.leftCols(ind.t_len()) = ind.values;
    pd.tensor.push_back(std::move(x));
    Mask m(static_cast<std::size_t>(pd.t_pad), false);
    std::fill_n(m.begin(), ind.t_len(), true);
    pd.mask.push_back(std::move(m));
  }
  return pd;
}

MtsDataset strip_padding(const PaddedDataset& pd) {
  MtsDataset ds;
  ds.feature_names = pd.feature_names;
  for (std::size_t i = 0; i < pd.size(); ++i) ds.individuals.push_back({pd.ids[i], pd.observed(i)});
  return ds;
}

std::pair<PaddedDataset, PaddedDataset> temporal_split(const PaddedDataset& pd, double frac) {
  if (!(frac > 0.0 && frac < 1.0)) throw Error(Errc::invalid_argument, "split fraction must lie in (0,1)");
  MtsDataset train;
  MtsDataset test;
  train.feature_names = test.feature_names = pd.feature_names;
  for (std::size_t i = 0; i < pd.size(); ++i) {
    const Matrix x = pd.observed(i);
    const int total = static_cast<int>(x.cols());
    // The epsilon keeps products like 0.7 * 10 from flooring to 6.
    const int n_train = static_cast<int>(std::floor(frac * total + 1e-9));
    if (n_train < 1 || n_train >= total) {
      throw Error(Errc::degenerate_split, "individual '" + pd.ids[i] + "' with T=" + std::to_string(total) +
                                              " cannot be split at " + std::to_string(frac));
    }
    train.individuals.push_back({pd.ids[i], x.leftCols(n_train)});
    test.individuals.push_back({pd.ids[i], x.rightCols(total - n_train)});
  }
  return {pad_and_mask(train), pad_and_mask(test)};
}

void validate_labels(const ClusterLabels& labels) {
  if (labels.k < 2) throw Error(Errc::invalid_k, "k must be >= 2, got " + std::to_string(labels.k));
  std::vector<std::size_t> counts(static_cast<std::size_t>(labels.k), 0);
  for (const auto& [id, c] : labels.assignment) {
    if (c < 0 || c >= labels.k) {
      throw Error(Errc::unknown_cluster, "label " + std::to_string(c) + " of '" + id + "' outside [0," +
                                             std::to_string(labels.k) + ")");
    }
    ++counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < labels.k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw Error(Errc::empty_cluster, "cluster " + std::to_string(c) + " has no members");
    }
  }
}

void check_labels_cover(const ClusterLabels& labels, const std::vector<std::string>& ids) {
  for (const auto& id : ids) (void)labels.cluster_of(id);
}

ClusterLabels parse_cluster_labels(std::istream& in, int k) {
  if (k < 2) throw Error(Errc::invalid_k, "k must be >= 2, got " + std::to_string(k));
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::empty_dataset, "labels file has no header");
  ClusterLabels labels;
  labels.k = k;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_line(line, ',');
    long c = 0;
    if (fields.size() != 2 || !parse_long(trim(fields[1]), c)) {
      throw Error(Errc::malformed_row, "labels line " + std::to_string(line_no) + " is not 'id,cluster'");
    }
    const std::string id = trim(fields[0]);
    if (c < 0 || c >= k) {
      throw Error(Errc::unknown_cluster,
                  "label " + std::to_string(c) + " of '" + id + "' outside [0," + std::to_string(k) + ")");
    }
    if (!labels.assignment.emplace(id, static_cast<int>(c)).second) {
      throw Error(Errc::duplicate_id, "'" + id + "' labelled twice");
    }
  }
  validate_labels(labels);
  return labels;
}

ClusterLabels load_cluster_labels(const std::filesystem::path& path, int k) {
  auto in = open_or_throw(path);
  return parse_cluster_labels(in, k);
}

void write_cluster_labels(std::ostream& out, const ClusterLabels& labels) {
  out << "individual_id,cluster\n";
  for (const auto& [id, c] : labels.assignment) out << id << ',' << c << '\n';
}

}  // namespace emaattn
