#pragma once

// Tactical scenario events and the seeded synthetic master dataset.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tacdss/errors.hpp"
#include "tacdss/numfmt.hpp"
#include "tacdss/random.hpp"

namespace tacdss {

struct FactorRange {
  std::string_view name;
  double lo;
  double hi;
  std::string_view unit;
};

/// Factor order used everywhere: fuel, intercept time, weapon, danger.
inline constexpr std::array<FactorRange, 4> kFactorRanges{{
    {"fuel", 0.0, 1000.0, "litres"},
    {"intercept_time", 0.0, 60.0, "minutes"},
    {"weapon", 0.0, 100.0, "percent"},
    {"danger", 0.0, 10.0, "points"},
}};

struct ScenarioEvent {
  double fuel = 0.0;
  double intercept_time = 0.0;
  double weapon = 0.0;
  double danger = 0.0;

  std::array<double, 4> values() const { return {fuel, intercept_time, weapon, danger}; }
  static ScenarioEvent from_values(const std::array<double, 4>& v) { return {v[0], v[1], v[2], v[3]}; }

  friend bool operator==(const ScenarioEvent&, const ScenarioEvent&) = default;
};

/// Name of the first field outside its range (or non-finite), empty if valid.
inline std::string_view invalid_field(const ScenarioEvent& event) {
  const auto v = event.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v[k]) || v[k] < kFactorRanges[k].lo || v[k] > kFactorRanges[k].hi) {
      return kFactorRanges[k].name;
    }
  }
  return {};
}

inline std::string range_text(const FactorRange& r) {
  std::ostringstream os;
  os << r.name << " must be within [" << r.lo << ", " << r.hi << "] " << r.unit;
  return os.str();
}

inline void validate(const ScenarioEvent& event) {
  const auto field = invalid_field(event);
  if (field.empty()) return;
  for (const auto& r : kFactorRanges) {
    if (r.name == field) throw InvalidArgument(range_text(r));
  }
}

/// Equal-weight average of the four factors, each oriented so that larger is
/// more favourable: plenty of fuel and weapons, short intercept time, low danger.
inline double latent_score(const ScenarioEvent& event) {
  validate(event);
  return (event.fuel / 1000.0 + (1.0 - event.intercept_time / 60.0) + event.weapon / 100.0 +
          (1.0 - event.danger / 10.0)) /
         4.0;
}

struct MasterDataset {
  std::vector<ScenarioEvent> events;
  std::uint64_t seed = 0;

  std::size_t size() const { return events.size(); }
};

/// Index of the latent-score third an event falls in: 0 for [0,1/3), 1 for
/// [1/3,2/3), 2 for [2/3,1].
inline int score_stratum(double score) {
  if (score < 1.0 / 3.0) return 0;
  if (score < 2.0 / 3.0) return 1;
  return 2;
}

/// Distance kept between each latent-score band and the interior edges of its third.
inline constexpr double kStratumMargin = 0.1;

/// Whether `score` lies in the sampling band of stratum `k`: the k-th third of
/// [0,1] with kStratumMargin trimmed from the sides that face another third.
inline bool in_stratum_band(double score, int k) {
  const double lo = k / 3.0 + (k > 0 ? kStratumMargin : 0.0);
  const double hi = (k + 1) / 3.0 - (k < 2 ? kStratumMargin : 0.0);
  return score >= lo && score <= hi;
}

/// Uniform per-factor sampling, stratified by rejection: event i is redrawn
/// until its latent score falls in the band of stratum i mod 3. Every third of
/// the score range therefore holds floor or ceil of size/3 events, and the
/// bands are separated so that three decision regions are discoverable.
inline MasterDataset generate_master(std::size_t size, std::uint64_t seed) {
  if (size < 10) throw InvalidArgument("master dataset size must be at least 10, got " + std::to_string(size));
  Rng rng(seed);
  MasterDataset out;
  out.seed = seed;
  out.events.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    const int wanted = static_cast<int>(i % 3);
    while (true) {
      ScenarioEvent e;
      e.fuel = rng.uniform(kFactorRanges[0].lo, kFactorRanges[0].hi);
      e.intercept_time = rng.uniform(kFactorRanges[1].lo, kFactorRanges[1].hi);
      e.weapon = rng.uniform(kFactorRanges[2].lo, kFactorRanges[2].hi);
      e.danger = rng.uniform(kFactorRanges[3].lo, kFactorRanges[3].hi);
      if (in_stratum_band(latent_score(e), wanted)) {
        out.events.push_back(e);
        break;
      }
    }
  }
  return out;
}

inline constexpr std::string_view kCsvHeader = "fuel,intercept_time,weapon,danger";

inline void write_csv(std::ostream& os, const std::vector<ScenarioEvent>& events) {
  os << kCsvHeader << '\n';
  for (const auto& e : events) {
    os << format_number(e.fuel) << ',' << format_number(e.intercept_time) << ',' << format_number(e.weapon) << ','
       << format_number(e.danger) << '\n';
  }
}

inline std::vector<ScenarioEvent> read_csv(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t start = 0;
    while (start < s.size() && (s[start] == ' ' || s[start] == '\t')) ++start;
    return s.substr(start);
  };
  if (!std::getline(is, line)) throw ParseError("dataset: empty file");
  ++line_no;
  if (trim(line) != kCsvHeader) {
    throw ParseError("dataset line 1: expected header '" + std::string(kCsvHeader) + "'");
  }
  std::vector<ScenarioEvent> events;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    std::array<double, 4> v{};
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= v.size()) throw ParseError("dataset line " + std::to_string(line_no) + ": too many columns");
      cell = trim(cell);
      std::size_t used = 0;
      try {
        v[k] = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size()) {
        throw ParseError("dataset line " + std::to_string(line_no) + ": cannot parse '" + cell + "' as a number");
      }
      ++k;
    }
    if (k != v.size()) throw ParseError("dataset line " + std::to_string(line_no) + ": expected 4 columns");
    const ScenarioEvent e = ScenarioEvent::from_values(v);
    if (const auto field = invalid_field(e); !field.empty()) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": " + std::string(field) + " out of range");
    }
    events.push_back(e);
  }
  return events;
}

inline std::vector<ScenarioEvent> read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset '" + path + "'");
  return read_csv(in);
}

}  // namespace tacdss
