#include "climatune/climate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "climatune/error.hpp"

namespace climatune {

namespace {

constexpr std::array<std::string_view, 12> kMonths = {"jan", "feb", "mar", "apr", "may", "jun",
                                                       "jul", "aug", "sep", "oct", "nov", "dec"};
constexpr double kMinPlausible = -10.0;
constexpr double kMaxPlausible = 45.0;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

const MonthlyValues& ClimateTable::at(int year) const {
  const auto it = rows.find(year);
  if (it == rows.end()) throw DataError("year " + std::to_string(year) + " is not in the climate table");
  return it->second;
}

ClimateTable parse_climate_csv(std::string_view text) {
  ClimateTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = split_csv_line(t);

    if (!have_header) {
      bool ok = cells.size() == 13 && lower(cells[0]) == "year";
      for (std::size_t m = 0; ok && m < 12; ++m) ok = lower(cells[m + 1]).substr(0, 3) == kMonths[m];
      if (!ok) throw DataError("climate CSV line " + std::to_string(line_no) + ": expected header 'year,jan,...,dec'");
      have_header = true;
      continue;
    }

    int year = 0;
    {
      const std::string& y = cells[0];
      auto [ptr, ec] = std::from_chars(y.data(), y.data() + y.size(), year);
      if (y.empty() || ec != std::errc() || ptr != y.data() + y.size()) {
        throw DataError("climate CSV line " + std::to_string(line_no) + ": invalid year '" + y + "'");
      }
    }
    if (table.rows.count(year)) throw DataError("climate CSV: duplicate year " + std::to_string(year));
    if (cells.size() > 13) {
      throw DataError("climate CSV: year " + std::to_string(year) + " has more than 12 monthly values");
    }

    MonthlyValues values{};
    for (std::size_t m = 0; m < 12; ++m) {
      const std::string where = "climate CSV: year " + std::to_string(year) + ", " + std::string(kMonths[m]);
      if (m + 1 >= cells.size() || cells[m + 1].empty()) throw DataError(where + ": missing value");
      const std::string& cell = cells[m + 1];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError(where + ": non-numeric value '" + cell + "'");
      }
      if (v < kMinPlausible || v > kMaxPlausible) {
        throw DataError(where + ": implausible temperature " + cell);
      }
      values[m] = v;
    }
    table.rows.emplace(year, values);
  }
  if (!have_header) throw DataError("climate CSV: header row 'year,jan,...,dec' is missing");
  return table;
}

ClimateTable load_climate_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open climate table " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  ClimateTable t = parse_climate_csv(buf.str());
  t.provenance.source = path.string();
  return t;
}

std::array<double, 11> forward_difference(const MonthlyValues& monthly) {
  std::array<double, 11> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = monthly[i + 1] - monthly[i];
  return out;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DataError("cosine_similarity: length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DataError("cosine_similarity: degenerate (all-zero) vector");
  return dot / std::sqrt(na * nb);
}

double pitch_temperature(const ClimateTable& table, int year, int reference_year) {
  const auto query = forward_difference(table.at(year));
  if (year == reference_year) return 0.0;
  const auto reference = forward_difference(table.at(reference_year));
  return std::clamp(1.0 - cosine_similarity(query, reference), 0.0, 1.0);
}

std::map<int, double> duration_temperature(const ClimateTable& table) {
  if (table.rows.empty()) throw DataError("duration_temperature: empty climate table");
  std::map<int, double> mean;
  for (const auto& [year, months] : table.rows) {
    double sum = 0.0;
    for (double v : months) sum += v;
    mean[year] = sum / 12.0;
  }
  const auto [lo_it, hi_it] =
      std::minmax_element(mean.begin(), mean.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  const double lo = lo_it->second;
  const double hi = hi_it->second;
  if (hi == lo) throw DataError("duration_temperature: every year has the same annual mean");
  std::map<int, double> out;
  for (const auto& [year, m] : mean) out[year] = (m - lo) / (hi - lo);
  return out;
}

const YearTemperatures& TemperatureVectors::at(int year) const {
  const auto it = years.find(year);
  if (it == years.end()) {
    std::string msg = "unknown year " + std::to_string(year);
    if (!years.empty()) msg += " (valid range " + std::to_string(first_year()) + "-" + std::to_string(last_year()) + ")";
    throw DataError(msg);
  }
  return it->second;
}

std::string TemperatureVectors::to_json() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(6);
  out << "{\n  \"reference_year\": " << reference_year << ",\n  \"years\": {";
  bool first = true;
  for (const auto& [year, t] : years) {
    out << (first ? "\n" : ",\n") << "    \"" << year << "\": { \"duration\": " << t.duration
        << ", \"pitch\": " << t.pitch << " }";
    first = false;
  }
  out << "\n  }\n}\n";
  return out.str();
}

TemperatureVectors TemperatureVectors::from_json(std::string_view text) {
  TemperatureVectors out;
  try {
    const auto j = nlohmann::json::parse(text);
    out.reference_year = j.at("reference_year").get<int>();
    for (const auto& [key, value] : j.at("years").items()) {
      YearTemperatures t{value.at("pitch").get<double>(), value.at("duration").get<double>()};
      if (!(t.pitch >= 0.0 && t.pitch <= 1.0 && t.duration >= 0.0 && t.duration <= 1.0)) {
        throw DataError("temperatures.json: year " + key + " has a value outside [0, 1]");
      }
      out.years[std::stoi(key)] = t;
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("temperatures.json: ") + e.what());
  }
  if (out.years.empty()) throw DataError("temperatures.json: no years");
  return out;
}

TemperatureVectors build_temperature_vectors(const ClimateTable& table, int reference_year) {
  TemperatureVectors out;
  out.reference_year = reference_year;
  const auto duration = duration_temperature(table);
  for (const auto& [year, d] : duration) {
    out.years[year] = YearTemperatures{pitch_temperature(table, year, reference_year), d};
  }
  return out;
}

}  // namespace climatune
