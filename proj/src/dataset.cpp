#include "rcw/core_model.hpp"
#include "rcw/error.hpp"
#include "rcw/linalg.hpp"

#include <cmath>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace rcw {
namespace {

[[noreturn]] void data_error(const std::string& msg) { throw Error(ErrorCode::Data, msg); }

// Splits one CSV record. Double quotes delimit fields that may contain commas;
// "" inside a quoted field is a literal quote.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string where(const std::string& source, std::size_t line, const std::string& column) {
  std::ostringstream os;
  os << source << ": line " << line << " (data row " << line - 1 << "), column '" << column << "'";
  return os.str();
}

double parse_double(const std::string& raw, const std::string& context) {
  const std::string s = trim(raw);
  if (s.empty()) data_error(context + ": missing value");
  double value = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) data_error(context + ": non-numeric value '" + s + "'");
  if (!std::isfinite(value)) data_error(context + ": non-finite value '" + s + "'");
  return value;
}

std::int64_t parse_label(const std::string& raw, const std::string& context) {
  const std::string s = trim(raw);
  if (s.empty()) data_error(context + ": missing cluster label");
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    data_error(context + ": cluster label '" + s + "' is not an integer");
  }
  return value;
}

// Columns scaled to unit norm before the eigenvalue rank test, so the check
// does not depend on measurement units.
bool full_column_rank(const MatrixXd& m) {
  if (m.cols() == 0) return true;
  const VectorXd norms = m.colwise().norm();
  if ((norms.array() <= 0.0).any()) return false;
  const MatrixXd scaled = m * norms.cwiseInverse().asDiagonal();
  return !linalg::is_singular(scaled.transpose() * scaled);
}

}  // namespace

MatrixXd IVData::Y() const {
  MatrixXd y(n(), p() + 1);
  y.col(0) = y1;
  y.rightCols(p()) = Y2;
  return y;
}

void validate(const IVData& data) {
  const Index n = data.n();
  if (data.p() < 1) data_error("at least one endogenous regressor is required (p >= 1)");
  if (data.k() < data.p()) {
    data_error("model is under-identified: k = " + std::to_string(data.k()) + " instruments < p = " +
               std::to_string(data.p()) + " endogenous regressors");
  }
  if (data.Y2.rows() != n || data.Z.rows() != n || (data.X && data.X->rows() != n)) {
    data_error("row counts of y1, Y2, Z, X disagree");
  }
  if (n <= data.k() + data.q()) {
    data_error("too few observations: n = " + std::to_string(n) + " must exceed k + q = " +
               std::to_string(data.k() + data.q()));
  }
  if (data.cluster_ids) {
    if (static_cast<Index>(data.cluster_ids->size()) != n) data_error("cluster label count differs from n");
    const std::set<std::int64_t> distinct(data.cluster_ids->begin(), data.cluster_ids->end());
    if (distinct.size() < 2) data_error("at least two distinct cluster labels are required");
  }
  if (!data.y1.allFinite() || !data.Y2.allFinite() || !data.Z.allFinite() ||
      (data.X && !data.X->allFinite())) {
    data_error("non-finite values in data");
  }
  if (data.X && !full_column_rank(*data.X)) data_error("exogenous covariates X are rank deficient");
  MatrixXd xz(n, data.q() + data.k());
  if (data.X) xz.leftCols(data.q()) = *data.X;
  xz.rightCols(data.k()) = data.Z;
  if (!full_column_rank(xz)) {
    data_error(data.X ? "instruments Z are rank deficient after accounting for X"
                      : "instruments Z are rank deficient");
  }
}

IVData parse_dataset(std::istream& in, const ColumnSpec& spec, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) data_error(source + ": empty file, expected a header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::unordered_map<std::string, std::size_t> index;
  const auto header = split_record(line);
  for (std::size_t j = 0; j < header.size(); ++j) index.emplace(trim(header[j]), j);

  auto column = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) data_error(source + ": column '" + name + "' not found in header");
    return it->second;
  };
  if (spec.y.empty()) data_error("no outcome column given");
  if (spec.endog.empty()) data_error("no endogenous regressor columns given");
  if (spec.instruments.empty()) data_error("no instrument columns given");

  const std::size_t y_col = column(spec.y);
  std::vector<std::size_t> endog_cols, iv_cols, exog_cols;
  for (const auto& c : spec.endog) endog_cols.push_back(column(c));
  for (const auto& c : spec.instruments) iv_cols.push_back(column(c));
  for (const auto& c : spec.exog) exog_cols.push_back(column(c));
  const std::optional<std::size_t> cluster_col =
      spec.cluster ? std::optional<std::size_t>(column(*spec.cluster)) : std::nullopt;

  std::vector<double> y;
  std::vector<std::vector<double>> endog, iv, exog;
  std::vector<std::int64_t> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_record(line);
    auto cell = [&](std::size_t j, const std::string& name) -> const std::string& {
      if (j >= cells.size()) data_error(where(source, line_no, name) + ": missing value (short row)");
      return cells[j];
    };
    y.push_back(parse_double(cell(y_col, spec.y), where(source, line_no, spec.y)));
    auto read_group = [&](const std::vector<std::size_t>& cols, const std::vector<std::string>& names) {
      std::vector<double> row;
      for (std::size_t j = 0; j < cols.size(); ++j) {
        row.push_back(parse_double(cell(cols[j], names[j]), where(source, line_no, names[j])));
      }
      return row;
    };
    endog.push_back(read_group(endog_cols, spec.endog));
    iv.push_back(read_group(iv_cols, spec.instruments));
    exog.push_back(read_group(exog_cols, spec.exog));
    if (cluster_col) {
      labels.push_back(parse_label(cell(*cluster_col, *spec.cluster),
                                   where(source, line_no, *spec.cluster)));
    }
  }

  const Index n = static_cast<Index>(y.size());
  auto to_matrix = [n](const std::vector<std::vector<double>>& rows, std::size_t cols) {
    MatrixXd m(n, static_cast<Index>(cols));
    for (Index i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < cols; ++j) m(i, static_cast<Index>(j)) = rows[i][j];
    }
    return m;
  };

  IVData data;
  data.y1 = Eigen::Map<const VectorXd>(y.data(), n);
  data.Y2 = to_matrix(endog, endog_cols.size());
  data.Z = to_matrix(iv, iv_cols.size());
  if (!exog_cols.empty() || spec.add_intercept) {
    MatrixXd x(n, static_cast<Index>(exog_cols.size()) + (spec.add_intercept ? 1 : 0));
    if (spec.add_intercept) x.col(0).setOnes();
    x.rightCols(static_cast<Index>(exog_cols.size())) = to_matrix(exog, exog_cols.size());
    data.X = std::move(x);
  }
  if (cluster_col) data.cluster_ids = std::move(labels);
  validate(data);
  return data;
}

IVData load_dataset(const std::string& path, const ColumnSpec& spec) {
  std::ifstream in(path);
  if (!in) data_error("cannot open data file '" + path + "'");
  return parse_dataset(in, spec, path);
}

}  // namespace rcw
