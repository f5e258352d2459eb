#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "conglab/csv.hpp"
#include "conglab/design.hpp"
#include "conglab/errors.hpp"

namespace conglab {

enum class EventKind { arrival, departure, price_switch };

struct Event {
  double t = 0.0;
  EventKind kind = EventKind::arrival;
  int pre_state = -1;        // arrivals and departures
  Label label = Label::base; // arrival price label / switch target
};

inline Event arrival_event(double t, int pre_state, Label label) {
  return Event{t, EventKind::arrival, pre_state, label};
}
inline Event departure_event(double t, int pre_state) {
  return Event{t, EventKind::departure, pre_state, Label::base};
}
inline Event price_switch_event(double t, Label new_label) {
  return Event{t, EventKind::price_switch, -1, new_label};
}

struct EventLog {
  double horizon = 0.0;
  int initial_state = 0;
  std::optional<Label> initial_label;  // arm active at t=0; empty for user-level
  std::vector<Event> events;
  std::uint64_t seed = 0;
  Design design = FixedPrice{};
  std::string model_id;
  double mu = 1.0;
};

// Trajectory checks: pre-states consistent with the reconstructed path,
// bounds respected, arrival/departure times strictly increasing. A price
// switch may share the timestamp of the transition that triggered it
// (regenerative switching happens exactly at the visit); deterministic
// switch times are otherwise strictly between transitions.
inline void validate_event_log(const EventLog& log, int capacity = -1) {
  int state = log.initial_state;
  if (state < 0) throw CorruptLog("initial_state < 0");
  if (capacity >= 0 && state > capacity) throw CorruptLog("initial_state > K");
  double prev_t = 0.0;
  bool prev_was_transition = false;
  for (const Event& e : log.events) {
    if (!(e.t >= 0.0 && e.t <= log.horizon)) throw CorruptLog("event time outside [0, T]");
    if (e.kind == EventKind::price_switch) {
      if (e.t < prev_t) throw CorruptLog("price switch time decreases");
      if (e.t == prev_t && !prev_was_transition) {
        throw CorruptLog("coincident price switches");
      }
      if (e.label == Label::base) throw CorruptLog("price switch to base label");
      prev_t = e.t;
      prev_was_transition = false;
      continue;
    }
    if (e.t <= prev_t) throw CorruptLog("transition times not strictly increasing");
    if (e.pre_state != state) throw CorruptLog("pre_state does not match trajectory");
    if (e.kind == EventKind::arrival) {
      if (capacity >= 0 && state >= capacity) throw CorruptLog("arrival from state K");
      ++state;
    } else {
      if (state == 0) throw CorruptLog("departure from state 0");
      --state;
    }
    if (capacity >= 0 && state > capacity) throw CorruptLog("state exceeds K");
    prev_t = e.t;
    prev_was_transition = true;
  }
}

inline const char* event_kind_code(EventKind k) {
  switch (k) {
    case EventKind::arrival: return "A";
    case EventKind::departure: return "D";
    default: return "S";
  }
}

inline void write_event_csv(const EventLog& log, const std::string& path) {
  auto f = open_for_write(path);
  f << "t,kind,pre_state,label\n";
  for (const Event& e : log.events) {
    f << fmt_double(e.t) << ',' << event_kind_code(e.kind) << ',';
    if (e.kind != EventKind::price_switch) f << e.pre_state;
    f << ',';
    if (e.kind != EventKind::departure) f << label_name(e.label);
    f << '\n';
  }
}

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".json"; }

inline void write_event_sidecar(const EventLog& log, const std::string& csv_path) {
  nlohmann::json j;
  j["horizon_T"] = log.horizon;
  j["initial_state"] = log.initial_state;
  if (log.initial_label) {
    j["initial_label"] = label_name(*log.initial_label);
  } else {
    j["initial_label"] = nullptr;
  }
  j["seed"] = log.seed;
  j["design"] = design_to_json(log.design);
  j["model_id"] = log.model_id;
  j["mu"] = log.mu;
  auto f = open_for_write(sidecar_path(csv_path));
  f << j.dump(2) << '\n';
}

inline void write_event_log(const EventLog& log, const std::string& csv_path) {
  write_event_csv(log, csv_path);
  write_event_sidecar(log, csv_path);
}

inline EventLog read_event_log(const std::string& csv_path) {
  EventLog log;
  {
    auto f = open_for_read(sidecar_path(csv_path));
    nlohmann::json j;
    try {
      f >> j;
      log.horizon = j.at("horizon_T").get<double>();
      log.initial_state = j.at("initial_state").get<int>();
      if (!j.at("initial_label").is_null()) {
        log.initial_label = label_from_name(j.at("initial_label").get<std::string>());
      }
      log.seed = j.at("seed").get<std::uint64_t>();
      log.design = design_from_json(j.at("design"));
      log.model_id = j.value("model_id", std::string());
      log.mu = j.at("mu").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw CorruptLog(std::string("bad sidecar json: ") + e.what());
    }
  }
  auto f = open_for_read(csv_path);
  std::string line;
  if (!std::getline(f, line)) throw CorruptLog("empty event csv");
  if (split_csv_line(line) != std::vector<std::string>{"t", "kind", "pre_state", "label"}) {
    throw CorruptLog("bad event csv header");
  }
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto cols = split_csv_line(line);
    if (cols.size() != 4) throw CorruptLog("bad event csv row: " + line);
    Event e;
    e.t = parse_double(cols[0], "event csv");
    if (cols[1] == "A") {
      e.kind = EventKind::arrival;
    } else if (cols[1] == "D") {
      e.kind = EventKind::departure;
    } else if (cols[1] == "S") {
      e.kind = EventKind::price_switch;
    } else {
      throw CorruptLog("unknown event kind '" + cols[1] + "'");
    }
    if (e.kind != EventKind::price_switch) {
      e.pre_state = static_cast<int>(parse_long(cols[2], "event csv"));
    } else if (!cols[2].empty()) {
      throw CorruptLog("price switch row carries pre_state");
    }
    if (e.kind != EventKind::departure) {
      e.label = label_from_name(cols[3]);
    } else if (!cols[3].empty()) {
      throw CorruptLog("departure row carries label");
    }
    log.events.push_back(e);
  }
  return log;
}

}  // namespace conglab
