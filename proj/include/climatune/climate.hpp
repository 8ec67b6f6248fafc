#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace climatune {

inline constexpr int kReferenceYear = 1876;
inline constexpr int kFirstYear = 1876;
inline constexpr int kLastYear = 2021;

using MonthlyValues = std::array<double, 12>;

struct ClimateProvenance {
  std::string source;
  std::string retrieved;
};

/// Monthly mean daily-maximum temperatures (degrees C) keyed by year.
struct ClimateTable {
  std::map<int, MonthlyValues> rows;
  ClimateProvenance provenance;

  const MonthlyValues& at(int year) const;
  bool contains(int year) const { return rows.count(year) != 0; }
};

/// Parse `year,jan,...,dec` CSV. Lines starting with '#' are comments; cells
/// may be quoted or padded. Each row must carry all twelve months, values
/// within [-10, 45].
ClimateTable parse_climate_csv(std::string_view text);
ClimateTable load_climate_csv(const std::filesystem::path& path);

/// out[i] = monthly[i+1] - monthly[i].
std::array<double, 11> forward_difference(const MonthlyValues& monthly);

/// dot(a, b) / (|a| |b|). Throws DataError for unequal lengths or a zero vector.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// clamp(1 - cos(diff(year), diff(reference)), 0, 1); exactly 0 for the reference year.
double pitch_temperature(const ClimateTable& table, int year, int reference_year = kReferenceYear);

/// Min-max normalised annual mean (unweighted mean of the 12 months).
std::map<int, double> duration_temperature(const ClimateTable& table);

struct YearTemperatures {
  double pitch = 0.0;
  double duration = 0.0;
};

struct TemperatureVectors {
  int reference_year = kReferenceYear;
  std::map<int, YearTemperatures> years;

  const YearTemperatures& at(int year) const;
  bool contains(int year) const { return years.count(year) != 0; }
  int first_year() const { return years.begin()->first; }
  int last_year() const { return years.rbegin()->first; }

  /// `{"reference_year": 1876, "years": {"<year>": {"duration": y, "pitch": x}}}`
  /// with six decimal places.
  std::string to_json() const;
  static TemperatureVectors from_json(std::string_view text);
};

TemperatureVectors build_temperature_vectors(const ClimateTable& table, int reference_year = kReferenceYear);

}  // namespace climatune
