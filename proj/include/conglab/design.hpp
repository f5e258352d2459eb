#pragma once

#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "conglab/errors.hpp"
#include "conglab/model.hpp"
#include "conglab/rng.hpp"

namespace conglab {

enum class Label { plus, minus, base };

inline std::string label_name(Label l) {
  switch (l) {
    case Label::plus: return "+";
    case Label::minus: return "-";
    default: return "base";
  }
}

inline Label label_from_name(const std::string& s) {
  if (s == "+") return Label::plus;
  if (s == "-") return Label::minus;
  if (s == "base") return Label::base;
  throw CorruptLog("unknown price label '" + s + "'");
}

enum class Assignment { iid_coin, balanced_permutation, efron_biased_coin };

inline std::string assignment_name(Assignment a) {
  switch (a) {
    case Assignment::iid_coin: return "iid_coin";
    case Assignment::balanced_permutation: return "balanced_permutation";
    default: return "efron_biased_coin";
  }
}

inline Assignment assignment_from_name(const std::string& s) {
  if (s == "iid_coin") return Assignment::iid_coin;
  if (s == "balanced_permutation") return Assignment::balanced_permutation;
  if (s == "efron_biased_coin") return Assignment::efron_biased_coin;
  throw BadConfig("unknown assignment '" + s + "'");
}

struct FixedPrice {
  double p = 1.0;
};

struct IntervalSwitchback {
  double p = 1.0;
  double zeta = 0.05;
  double interval_length = 1.0;
  Assignment assignment = Assignment::iid_coin;
  double efron_bias = 0.5;
};

struct RegenerativeSwitchback {
  double p = 1.0;
  double zeta = 0.05;
  int regeneration_state = 0;
};

struct UserLevel {
  double p = 1.0;
  double zeta = 0.05;
};

using Design = std::variant<FixedPrice, IntervalSwitchback, RegenerativeSwitchback, UserLevel>;

inline double design_price(const Design& d) {
  return std::visit([](const auto& v) { return v.p; }, d);
}

inline double design_zeta(const Design& d) {
  return std::visit(
      [](const auto& v) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, FixedPrice>) {
          return 0.0;
        } else {
          return v.zeta;
        }
      },
      d);
}

inline bool is_user_level(const Design& d) { return std::holds_alternative<UserLevel>(d); }
inline bool is_fixed_price(const Design& d) { return std::holds_alternative<FixedPrice>(d); }

inline std::string design_type_name(const Design& d) {
  if (std::holds_alternative<FixedPrice>(d)) return "fixed_price";
  if (std::holds_alternative<IntervalSwitchback>(d)) return "interval_switchback";
  if (std::holds_alternative<RegenerativeSwitchback>(d)) return "regenerative_switchback";
  return "user_level";
}

inline void validate_design(const Design& d, const RateModel& model) {
  double p = design_price(d);
  if (is_fixed_price(d)) {
    model.check_price(p);
    return;
  }
  double z = design_zeta(d);
  if (!(z > 0.0)) throw InvalidDesign("zeta must be > 0");
  try {
    model.check_price(p + z);
    model.check_price(p - z);
  } catch (const InvalidPrice& e) {
    throw InvalidDesign(std::string("p +/- zeta outside valid price range: ") + e.what());
  }
  if (const auto* sb = std::get_if<IntervalSwitchback>(&d)) {
    if (!(sb->interval_length > 0.0)) throw InvalidDesign("interval_length must be > 0");
    if (sb->assignment == Assignment::efron_biased_coin &&
        !(sb->efron_bias >= 0.5 && sb->efron_bias < 1.0)) {
      throw InvalidDesign("efron_bias must be in [0.5, 1)");
    }
  }
  if (const auto* rg = std::get_if<RegenerativeSwitchback>(&d)) {
    if (rg->regeneration_state < 0 || rg->regeneration_state > model.capacity) {
      throw InvalidDesign("regeneration_state outside {0..K}");
    }
  }
}

// Per-interval price arms for the interval switchback.
inline std::vector<Label> assignment_sequence(const IntervalSwitchback& design,
                                              int num_intervals, RngStream& rng) {
  if (num_intervals < 1) throw InvalidDesign("num_intervals must be >= 1");
  std::vector<Label> seq(static_cast<std::size_t>(num_intervals));
  switch (design.assignment) {
    case Assignment::iid_coin:
      for (auto& l : seq) l = rng.next_bernoulli(0.5) ? Label::plus : Label::minus;
      break;
    case Assignment::balanced_permutation: {
      int plus_count = (num_intervals + 1) / 2;
      for (int i = 0; i < num_intervals; ++i) {
        seq[static_cast<std::size_t>(i)] = i < plus_count ? Label::plus : Label::minus;
      }
      rng.shuffle(seq);
      break;
    }
    case Assignment::efron_biased_coin: {
      int diff = 0;  // count(+) - count(-)
      for (auto& l : seq) {
        double p_plus;
        if (diff == 0) {
          p_plus = 0.5;
        } else if (diff < 0) {
          p_plus = design.efron_bias;
        } else {
          p_plus = 1.0 - design.efron_bias;
        }
        l = rng.next_bernoulli(p_plus) ? Label::plus : Label::minus;
        diff += (l == Label::plus) ? 1 : -1;
      }
      break;
    }
  }
  return seq;
}

inline nlohmann::json design_to_json(const Design& d) {
  nlohmann::json j;
  j["type"] = design_type_name(d);
  j["p"] = design_price(d);
  if (!is_fixed_price(d)) j["zeta"] = design_zeta(d);
  if (const auto* sb = std::get_if<IntervalSwitchback>(&d)) {
    j["interval_length"] = sb->interval_length;
    j["assignment"] = assignment_name(sb->assignment);
    if (sb->assignment == Assignment::efron_biased_coin) j["efron_bias"] = sb->efron_bias;
  }
  if (const auto* rg = std::get_if<RegenerativeSwitchback>(&d)) {
    j["regeneration_state"] = rg->regeneration_state;
  }
  return j;
}

inline Design design_from_json(const nlohmann::json& j) {
  try {
    std::string type = j.at("type").get<std::string>();
    if (type == "fixed_price") {
      FixedPrice d;
      d.p = j.at("p").get<double>();
      return d;
    }
    if (type == "interval_switchback") {
      IntervalSwitchback d;
      d.p = j.at("p").get<double>();
      d.zeta = j.at("zeta").get<double>();
      d.interval_length = j.at("interval_length").get<double>();
      d.assignment = assignment_from_name(j.value("assignment", std::string("iid_coin")));
      if (d.assignment == Assignment::efron_biased_coin) {
        d.efron_bias = j.at("efron_bias").get<double>();
      }
      return d;
    }
    if (type == "regenerative_switchback") {
      RegenerativeSwitchback d;
      d.p = j.at("p").get<double>();
      d.zeta = j.at("zeta").get<double>();
      d.regeneration_state = j.value("regeneration_state", 0);
      return d;
    }
    if (type == "user_level") {
      UserLevel d;
      d.p = j.at("p").get<double>();
      d.zeta = j.at("zeta").get<double>();
      return d;
    }
    throw BadConfig("unknown design type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw BadConfig(std::string("bad design json: ") + e.what());
  }
}

}  // namespace conglab
