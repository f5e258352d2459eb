#pragma once

#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "conglab/csv.hpp"
#include "conglab/errors.hpp"
#include "conglab/model.hpp"
#include "conglab/scenario.hpp"

namespace conglab {

// Arrival-rate regimes switching at fixed fractions of the horizon.
struct PiecewiseTrace {
  std::vector<double> breakpoints;  // 0 = t^(0) < ... < t^(B) = 1, fractions of T
  std::vector<RateModel> regimes;   // size B
};

// Per-slot multiplier applied to a base model's arrival rates.
struct GridTrace {
  RateModel base;
  std::vector<double> multipliers;  // one per slot
  double slot_length = 0.5;
};

using Trace = std::variant<PiecewiseTrace, GridTrace>;

inline void validate_trace(const Trace& trace) {
  if (const auto* pw = std::get_if<PiecewiseTrace>(&trace)) {
    if (pw->breakpoints.size() < 2 || pw->breakpoints.front() != 0.0 ||
        pw->breakpoints.back() != 1.0) {
      throw InvalidTrace("breakpoints must run from 0 to 1");
    }
    for (std::size_t i = 1; i < pw->breakpoints.size(); ++i) {
      if (!(pw->breakpoints[i] > pw->breakpoints[i - 1])) {
        throw InvalidTrace("breakpoints must be strictly increasing");
      }
    }
    if (pw->regimes.size() + 1 != pw->breakpoints.size()) {
      throw InvalidTrace("need one regime per breakpoint gap");
    }
    for (const RateModel& m : pw->regimes) {
      if (m.mu != pw->regimes.front().mu) {
        throw InvalidTrace("regimes must share the service rate");
      }
    }
  } else {
    const auto& g = std::get<GridTrace>(trace);
    if (!(g.slot_length > 0.0)) throw InvalidTrace("slot_length must be > 0");
    if (g.multipliers.empty()) throw InvalidTrace("empty multiplier grid");
    for (double m : g.multipliers) {
      if (!(m > 0.0)) throw InvalidTrace("multipliers must be > 0");
    }
  }
}

// Same model with every arrival rate multiplied by a constant factor; the
// analytic gradient of one multiplier slot uses this.
inline RateModel scale_arrivals(const RateModel& base, double factor) {
  if (!(factor > 0.0)) throw InvalidTrace("multipliers must be > 0");
  RateModel m = base;
  m.id = base.id + "*" + std::to_string(factor);
  auto rate = base.rate;
  m.rate = [rate, factor](int k, double p) { return factor * rate(k, p); };
  if (base.rate_deriv) {
    auto deriv = base.rate_deriv;
    m.rate_deriv = [deriv, factor](int k, double p) { return factor * deriv(k, p); };
  }
  return m;
}

inline double trace_mu(const Trace& trace) {
  if (const auto* pw = std::get_if<PiecewiseTrace>(&trace)) return pw->regimes.front().mu;
  return std::get<GridTrace>(trace).base.mu;
}

inline int trace_capacity(const Trace& trace) {
  if (const auto* pw = std::get_if<PiecewiseTrace>(&trace)) {
    int k = 0;
    for (const RateModel& m : pw->regimes) k = std::max(k, m.capacity);
    return k;
  }
  return std::get<GridTrace>(trace).base.capacity;
}

// Span a grid trace can cover; piecewise traces scale to any horizon.
inline double grid_trace_span(const GridTrace& g) {
  return g.slot_length * static_cast<double>(g.multipliers.size());
}

// Week factors a_w and the synthetic half-hourly day shape: a day-night
// sinusoid bottoming out overnight, clipped at 0.2, with Saturday (day 5 of
// the Monday-based week) scaled by 0.75 and its peak 3h later.
inline std::vector<double> synthetic_ed_multipliers(int weeks) {
  if (weeks < 1) throw BadConfig("weeks must be >= 1");
  static constexpr double kWeekFactor[4] = {0.9, 1.0, 1.1, 1.2};
  std::vector<double> mult;
  mult.reserve(static_cast<std::size_t>(weeks) * 7 * 48);
  for (int w = 0; w < weeks; ++w) {
    double aw = kWeekFactor[w % 4];
    for (int d = 0; d < 7; ++d) {
      bool saturday = (d == 5);
      double shift = saturday ? 9.0 : 6.0;
      double scale = saturday ? 0.75 : 1.0;
      for (int t = 0; t < 48; ++t) {
        double hour = (t + 0.5) * 0.5;
        double b = 1.0 + 0.6 * std::sin(2.0 * M_PI * (hour - shift) / 24.0);
        b = std::max(b, 0.2) * scale;
        mult.push_back(aw * b);
      }
    }
  }
  return mult;
}

// Emergency-department style environment: lambda_k(p) = 4(2-p)/(1+k) under
// mu = 2, modulated by week factors and the half-hourly grid. Time unit:
// hours; slots are half-hours.
inline GridTrace build_ed_trace(int weeks) {
  GridTrace g;
  std::vector<double> table(40);
  for (int k = 0; k < 40; ++k) {
    table[static_cast<std::size_t>(k)] = 4.0 / (1.0 + k);
  }
  g.base = table_model(std::move(table), 2.0, PriceFamily::linear, "ed_base");
  g.slot_length = 0.5;
  g.multipliers = synthetic_ed_multipliers(weeks);
  validate_trace(Trace{g});
  return g;
}

inline void write_trace_csv(const GridTrace& g, const std::string& path) {
  if (g.multipliers.size() % 48 != 0) {
    throw InvalidTrace("grid must hold whole days (48 slots/day)");
  }
  auto f = open_for_write(path);
  f << "day,slot,multiplier\n";
  for (std::size_t i = 0; i < g.multipliers.size(); ++i) {
    f << (i / 48) << ',' << (i % 48) << ',' << fmt_double(g.multipliers[i]) << '\n';
  }
}

inline std::vector<double> read_trace_multipliers(const std::string& path) {
  auto f = open_for_read(path);
  std::string line;
  if (!std::getline(f, line)) throw BadTraceCsv("empty trace csv");
  if (split_csv_line(line) != std::vector<std::string>{"day", "slot", "multiplier"}) {
    throw BadTraceCsv("bad trace csv header");
  }
  std::vector<double> mult;
  long row = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto cols = split_csv_line(line);
    if (cols.size() != 3) throw BadTraceCsv("bad trace csv row: " + line);
    long day = parse_long(cols[0], "trace csv");
    long slot = parse_long(cols[1], "trace csv");
    if (day != row / 48 || slot != row % 48) {
      throw BadTraceCsv("trace csv rows must cover consecutive half-hour slots");
    }
    double m = parse_double(cols[2], "trace csv");
    if (!(m > 0.0)) throw BadTraceCsv("multiplier must be > 0");
    mult.push_back(m);
    ++row;
  }
  if (mult.empty() || mult.size() % 48 != 0) {
    throw BadTraceCsv("trace csv must hold whole days (48 slots/day)");
  }
  return mult;
}

}  // namespace conglab
