#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "miglmm/errors.hpp"
#include "miglmm/io.hpp"

namespace miglmm {

namespace {

std::string trim(std::string s) {
  auto space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && space(s.back())) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && space(s[start])) ++start;
  s.erase(0, start);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& text, double& value) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = first + text.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

struct Factor {
  enum class Kind { Constant, Column, Log } kind;
  double constant = 1.0;
  std::string column;
  double divisor = 1.0;
};

// Recursive-descent parser for the term grammar in io.hpp.
class TermParser {
 public:
  explicit TermParser(const std::string& text) : text_(text) {}

  std::vector<Factor> parse() {
    std::vector<Factor> factors;
    factors.push_back(factor());
    skip();
    while (pos_ < text_.size() && text_[pos_] == '*') {
      ++pos_;
      factors.push_back(factor());
      skip();
    }
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return factors;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("covariate term '" + text_ + "': " + why);
  }

  std::string identifier() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' ||
            text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a column name or number");
    return text_.substr(start, pos_ - start);
  }

  Factor factor() {
    const std::string word = identifier();
    double value = 0.0;
    if (parse_double(word, value)) return {Factor::Kind::Constant, value, {}, 1.0};
    skip();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      if (word != "log") fail("unknown function '" + word + "'");
      ++pos_;
      Factor f{Factor::Kind::Log, 1.0, identifier(), 1.0};
      skip();
      if (pos_ < text_.size() && text_[pos_] == '/') {
        ++pos_;
        const std::string d = identifier();
        if (!parse_double(d, f.divisor) || f.divisor <= 0.0) fail("divisor must be a positive number");
        skip();
      }
      if (pos_ >= text_.size() || text_[pos_] != ')') fail("missing ')'");
      ++pos_;
      return f;
    }
    return {Factor::Kind::Column, 1.0, word, 1.0};
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

int require_column(const CsvTable& table, const std::string& name, const std::string& role) {
  const int c = table.column(name);
  if (c < 0) throw DataError("missing column '" + name + "' (" + role + ")");
  return c;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return static_cast<int>(j);
  }
  return -1;
}

double CsvTable::number(std::size_t row, int col) const {
  double v = 0.0;
  if (!parse_double(cells[row][col], v)) {
    throw DataError("line " + std::to_string(line[row]) + ": column '" + header[col] +
                    "' is not numeric: '" + cells[row][col] + "'");
  }
  return v;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file " + path.string());
  CsvTable table;
  std::string text;
  int line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (trim(text).empty()) continue;
    auto cells = split_line(text);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(table.header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    table.cells.push_back(std::move(cells));
    table.line.push_back(line_no);
  }
  if (table.header.empty()) throw DataError("data file " + path.string() + " has no header row");
  return table;
}

void validate_term(const std::string& expression) { TermParser(expression).parse(); }

Dataset ingest_table(const CsvTable& table, const DatasetSchema& schema, Family family) {
  if (table.rows() == 0) throw DataError("data file has no rows");
  if (schema.covariates.empty()) throw ConfigError("model has no covariates");
  Dataset data;
  const int n = static_cast<int>(table.rows());
  const int y_col = require_column(table, schema.response, "response");
  int m_col = -1;
  if (family == Family::Binomial) {
    if (schema.trials.empty()) throw ConfigError("binomial family needs a trials column");
    m_col = require_column(table, schema.trials, "trials");
  }
  for (int i = 0; i < n; ++i) {
    data.y.push_back(table.number(i, y_col));
    if (m_col >= 0) {
      data.trials.push_back(table.number(i, m_col));
      if (data.y.back() > data.trials.back()) {
        throw DataError("line " + std::to_string(table.line[i]) + ": y = " + table.cells[i][y_col] +
                        " exceeds trials m = " + table.cells[i][m_col]);
      }
    }
  }

  const int p = static_cast<int>(schema.covariates.size());
  data.x.resize(n, p);
  for (int j = 0; j < p; ++j) {
    const Term& term = schema.covariates[j];
    const auto factors = TermParser(term.expression).parse();
    std::vector<int> cols;
    for (const Factor& f : factors) {
      cols.push_back(f.kind == Factor::Kind::Constant
                         ? -1
                         : require_column(table, f.column, "covariate " + term.name));
    }
    for (int i = 0; i < n; ++i) {
      double v = 1.0;
      for (std::size_t k = 0; k < factors.size(); ++k) {
        const Factor& f = factors[k];
        if (f.kind == Factor::Kind::Constant) {
          v *= f.constant;
          continue;
        }
        const double cell = table.number(i, cols[k]);
        if (f.kind == Factor::Kind::Column) {
          v *= cell;
        } else {
          if (!(cell > 0.0)) {
            throw DataError("line " + std::to_string(table.line[i]) + ": log of nonpositive '" +
                            f.column + "' = " + table.cells[i][cols[k]] + " in covariate " +
                            term.name);
          }
          v *= std::log(cell / f.divisor);
        }
      }
      data.x(i, j) = v;
    }
    data.covariate_names.push_back(term.name);
  }

  for (std::size_t l = 0; l < schema.group_columns.size(); ++l) {
    const std::string& name = schema.group_columns[l];
    std::vector<int> g(n);
    if (name == "@row") {
      for (int i = 0; i < n; ++i) g[i] = i;
    } else {
      const int c = require_column(table, name, "grouping");
      std::unordered_map<std::string, int> index;
      for (int i = 0; i < n; ++i) {
        const std::string& label = table.cells[i][c];
        if (label.empty()) {
          throw DataError("line " + std::to_string(table.line[i]) + ": empty group label in '" +
                          name + "'");
        }
        g[i] = index.emplace(label, static_cast<int>(index.size())).first->second;
      }
    }
    data.groups.push_back(std::move(g));
    data.level_names.push_back(l < schema.level_names.size() ? schema.level_names[l] : name);
  }
  data.validate(family);
  return data;
}

Dataset ingest_csv(const std::filesystem::path& path, const DatasetSchema& schema, Family family) {
  return ingest_table(read_csv(path), schema, family);
}

}  // namespace miglmm
