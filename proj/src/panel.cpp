#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mvi/data.hpp"
#include "mvi/error.hpp"
#include "mvi/format.hpp"

namespace mvi {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Panel read_panel_csv(std::istream& is, const PanelSpec& spec, const std::string& source) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError(source + ": empty file");
  const std::vector<std::string> header = split_csv(line);
  std::size_t date_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == spec.date_column) date_col = c;
  if (date_col == header.size())
    throw ParseError(source + ": no date column '" + spec.date_column + "'");

  std::vector<std::size_t> picked;
  Panel p;
  if (spec.label_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (c != date_col) picked.push_back(c);
  } else {
    for (const std::string& name : spec.label_columns) {
      std::size_t c = 0;
      while (c < header.size() && header[c] != name) ++c;
      if (c == header.size() || c == date_col)
        throw ParseError(source + ": unknown column '" + name + "'");
      picked.push_back(c);
    }
  }
  if (picked.empty()) throw ParseError(source + ": no label columns");
  for (std::size_t c : picked) p.columns.push_back(header[c]);

  std::vector<double> values;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::vector<std::string> cells = split_csv(line);
    if (cells.size() != header.size())
      throw ParseError(source + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    p.dates.push_back(cells[date_col]);
    for (std::size_t c : picked) {
      const std::string& cell = cells[c];
      const std::string where =
          source + ": row " + std::to_string(row) + ", column '" + header[c] + "'";
      if (cell.empty()) throw ParseError(where + ": missing value");
      std::size_t used = 0;
      long v = 0;
      try {
        v = std::stol(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || v < 0 || v > 2)
        throw ParseError(where + ": expected a label in {0,1,2}, got '" + cell + "'");
      values.push_back(static_cast<double>(v));
    }
  }
  if (p.dates.empty()) throw ParseError(source + ": no data rows");
  p.labels = Matrix(p.dates.size(), picked.size(), std::move(values));
  return p;
}

Panel load_panel_csv(const std::string& path, const PanelSpec& spec) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  return read_panel_csv(is, spec, path);
}

void write_panel_csv(std::ostream& os, const Panel& panel, const std::string& date_column) {
  if (panel.dates.size() != panel.labels.rows() || panel.columns.size() != panel.labels.cols())
    throw ShapeError("write_panel_csv: names do not match the label matrix");
  os << date_column;
  for (const std::string& c : panel.columns) os << ',' << c;
  os << '\n';
  for (std::size_t t = 0; t < panel.labels.rows(); ++t) {
    os << panel.dates[t];
    for (std::size_t j = 0; j < panel.labels.cols(); ++j) os << ',' << format_real(panel.labels(t, j));
    os << '\n';
  }
}

void save_panel_csv(const std::string& path, const Panel& panel, const std::string& date_column) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  write_panel_csv(os, panel, date_column);
}

}  // namespace mvi
