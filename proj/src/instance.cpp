#include "ambopt/instance.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace ambopt {

using nlohmann::json;

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json parse_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& ctx) {
  if (!j.contains(key)) throw ConfigError(ctx + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(ctx + "." + key + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

Location get_location(const json& j, const std::string& ctx) {
  return {get_field<double>(j, "x", ctx), get_field<double>(j, "y", ctx)};
}

GeoMode parse_geo(const json& j, const std::string& ctx) {
  const std::string kind = get_or<std::string>(j, "mode", "planar");
  GeoMode mode;
  if (kind == "planar") {
    mode.kind = GeoMode::Kind::Planar;
  } else if (kind == "geodesic") {
    mode.kind = GeoMode::Kind::Geodesic;
  } else {
    throw ConfigError(ctx + ".mode: expected 'planar' or 'geodesic'");
  }
  if (j.contains("speed_kmh")) {
    mode.speed = j.at("speed_kmh").get<double>() / 3600.0;
  } else if (j.contains("speed")) {
    mode.speed = j.at("speed").get<double>();
  } else {
    throw ConfigError(ctx + ": set either 'speed' (units/s) or 'speed_kmh'");
  }
  if (!(mode.speed > 0.0)) throw ConfigError(ctx + ": speed must be positive");
  return mode;
}

Instance parse_instance(const json& j, const std::string& origin) {
  Instance ins;
  ins.geo = parse_geo(get_field<json>(j, "geo", origin), origin + ".geo");

  int idx = 0;
  for (const auto& ct : get_field<json>(j, "call_types", origin)) {
    const std::string ctx = origin + ".call_types[" + std::to_string(idx) + "]";
    CallType t;
    t.id = get_or<int>(ct, "id", idx);
    t.theta = get_field<double>(ct, "theta", ctx);
    t.label = get_or<std::string>(ct, "label", "");
    ins.call_types.push_back(t);
    ++idx;
  }
  idx = 0;
  for (const auto& at : get_field<json>(j, "ambulance_types", origin)) {
    const std::string ctx =
        origin + ".ambulance_types[" + std::to_string(idx) + "]";
    AmbulanceType t;
    t.id = get_or<int>(at, "id", idx);
    t.advancement_rank = get_field<int>(at, "rank", ctx);
    t.label = get_or<std::string>(at, "label", "");
    ins.ambulance_types.push_back(t);
    ++idx;
  }

  const auto& q = get_field<json>(j, "quality", origin);
  ins.quality = QualityMatrix(static_cast<int>(ins.ambulance_types.size()),
                              static_cast<int>(ins.call_types.size()));
  if (q.size() != ins.ambulance_types.size()) {
    throw ConfigError(origin + ".quality: one row per ambulance type expected");
  }
  for (size_t a = 0; a < q.size(); ++a) {
    const auto& row = q.at(a);
    if (row.size() != ins.call_types.size()) {
      throw ConfigError(origin + ".quality[" + std::to_string(a) +
                        "]: one entry per call type expected");
    }
    for (size_t c = 0; c < row.size(); ++c) {
      const auto& cell = row.at(c);
      double v;
      if (cell.is_null() || (cell.is_string() && cell == "inf")) {
        v = QualityMatrix::forbidden();
      } else {
        v = cell.get<double>();
      }
      ins.quality.at(static_cast<int>(a), static_cast<int>(c)) = v;
    }
  }

  idx = 0;
  for (const auto& b : get_field<json>(j, "bases", origin)) {
    const std::string ctx = origin + ".bases[" + std::to_string(idx) + "]";
    ins.facilities.bases.push_back({get_or<int>(b, "id", idx),
                                    get_location(b, ctx)});
    ++idx;
  }
  idx = 0;
  for (const auto& h : get_or<json>(j, "hospitals", json::array())) {
    const std::string ctx = origin + ".hospitals[" + std::to_string(idx) + "]";
    Hospital hosp;
    hosp.id = get_or<int>(h, "id", idx);
    hosp.location = get_location(h, ctx);
    if (h.contains("capacity") && !h.at("capacity").is_null()) {
      hosp.capacity = h.at("capacity").get<int>();
    }
    hosp.occupancy = get_or<int>(h, "occupancy", 0);
    for (const auto& t : get_or<json>(h, "admissible_types", json::array())) {
      hosp.admissible_types.insert(t.get<int>());
    }
    ins.facilities.hospitals.push_back(std::move(hosp));
    ++idx;
  }
  idx = 0;
  for (const auto& cb : get_or<json>(j, "cleaning_bases", json::array())) {
    const std::string ctx =
        origin + ".cleaning_bases[" + std::to_string(idx) + "]";
    ins.facilities.cleaning_bases.push_back({get_or<int>(cb, "id", idx),
                                             get_location(cb, ctx)});
    ++idx;
  }
  idx = 0;
  for (const auto& f : get_field<json>(j, "fleet", origin)) {
    const std::string ctx = origin + ".fleet[" + std::to_string(idx) + "]";
    FleetMember m;
    m.id = get_or<int>(f, "id", idx);
    m.type = get_field<int>(f, "type", ctx);
    m.start_base = get_field<int>(f, "base", ctx);
    ins.fleet.push_back(m);
    ++idx;
  }

  ins.validate();
  return ins;
}

Call parse_call(const json& j, int fallback_id, const std::string& ctx) {
  Call c;
  c.id = get_or<int>(j, "id", fallback_id);
  c.arrival_time = get_field<double>(j, "t", ctx);
  c.location = get_location(j, ctx);
  c.type = get_field<int>(j, "type", ctx);
  c.time_on_scene = get_or<double>(j, "time_on_scene", 0.0);
  c.needs_hospital = get_or<bool>(j, "needs_hospital", false);
  c.time_at_hospital = get_or<double>(j, "time_at_hospital", 0.0);
  c.needs_cleaning = get_or<bool>(j, "needs_cleaning", false);
  c.cleaning_time = get_or<double>(j, "cleaning_time", 0.0);
  if (j.contains("restricted_to") && !j.at("restricted_to").is_null()) {
    std::set<int> r;
    for (const auto& a : j.at("restricted_to")) r.insert(a.get<int>());
    c.restricted_to = std::move(r);
  }
  if (c.time_on_scene < 0 || c.time_at_hospital < 0 || c.cleaning_time < 0) {
    throw ConfigError(ctx + ": negative duration");
  }
  if (c.needs_hospital && !j.contains("time_at_hospital")) {
    throw ConfigError(ctx + ": time_at_hospital required with needs_hospital");
  }
  return c;
}

json call_to_json(const Call& c) {
  json j{{"id", c.id},
         {"t", c.arrival_time},
         {"x", c.location.x},
         {"y", c.location.y},
         {"type", c.type},
         {"time_on_scene", c.time_on_scene},
         {"needs_hospital", c.needs_hospital},
         {"needs_cleaning", c.needs_cleaning}};
  if (c.needs_hospital) j["time_at_hospital"] = c.time_at_hospital;
  if (c.needs_cleaning) j["cleaning_time"] = c.cleaning_time;
  if (c.restricted_to) j["restricted_to"] = *c.restricted_to;
  return j;
}

}  // namespace

int Instance::closest_hospital(const Location& scene, int call_type) const {
  int best = -1;
  double best_t = std::numeric_limits<double>::infinity();
  for (const auto& h : facilities.hospitals) {
    if (!h.admits(call_type)) continue;
    const double t = travel_time_ms(scene, h.location, 0.0, geo);
    if (t < best_t) {
      best_t = t;
      best = h.id;
    }
  }
  return best;
}

int Instance::closest_cleaning_base(const Location& from) const {
  int best = -1;
  double best_t = std::numeric_limits<double>::infinity();
  for (const auto& cb : facilities.cleaning_bases) {
    const double t = travel_time_ms(from, cb.location, 0.0, geo);
    if (t < best_t) {
      best_t = t;
      best = cb.id;
    }
  }
  return best;
}

int Instance::closest_base(const Location& from) const {
  int best = -1;
  double best_t = std::numeric_limits<double>::infinity();
  for (const auto& b : facilities.bases) {
    const double t = travel_time_ms(from, b.location, 0.0, geo);
    if (t < best_t) {
      best_t = t;
      best = b.id;
    }
  }
  return best;
}

std::vector<AmbulanceState> Instance::initial_fleet() const {
  std::vector<AmbulanceState> out;
  out.reserve(fleet.size());
  for (const auto& m : fleet) {
    AmbulanceState a;
    a.id = m.id;
    a.type = m.type;
    a.home_base = m.start_base;
    a.base_location = facilities.bases.at(m.start_base).location;
    a.base_time = 0.0;
    a.free_location = a.base_location;
    a.free_time = 0.0;
    out.push_back(std::move(a));
  }
  return out;
}

void Instance::validate() const {
  if (facilities.bases.empty()) throw ConfigError("instance: no bases");
  if (call_types.empty()) throw ConfigError("instance: no call types");
  if (ambulance_types.empty()) throw ConfigError("instance: no ambulance types");
  for (const auto& t : call_types) {
    if (!(t.theta > 0.0))
      throw ConfigError("call_types[" + std::to_string(t.id) +
                        "].theta must be positive");
  }
  for (size_t i = 0; i < facilities.bases.size(); ++i) {
    if (facilities.bases[i].id != static_cast<int>(i))
      throw ConfigError("bases must be listed in id order starting at 0");
  }
  for (size_t i = 0; i < facilities.hospitals.size(); ++i) {
    const auto& h = facilities.hospitals[i];
    if (h.id != static_cast<int>(i))
      throw ConfigError("hospitals must be listed in id order starting at 0");
    if (h.capacity && (h.occupancy < 0 || h.occupancy > *h.capacity))
      throw ConfigError("hospitals[" + std::to_string(h.id) +
                        "]: occupancy outside [0, capacity]");
  }
  for (size_t i = 0; i < facilities.cleaning_bases.size(); ++i) {
    if (facilities.cleaning_bases[i].id != static_cast<int>(i))
      throw ConfigError(
          "cleaning_bases must be listed in id order starting at 0");
  }
  for (size_t i = 0; i < fleet.size(); ++i) {
    const auto& m = fleet[i];
    if (m.id != static_cast<int>(i))
      throw ConfigError("fleet must be listed in id order starting at 0");
    if (m.type < 0 || m.type >= static_cast<int>(ambulance_types.size()))
      throw ConfigError("fleet[" + std::to_string(m.id) + "].type unknown");
    if (m.start_base < 0 ||
        m.start_base >= static_cast<int>(facilities.bases.size()))
      throw ConfigError("fleet[" + std::to_string(m.id) + "].base unknown");
  }
  // Every call type must be servable by someone.
  for (const auto& ct : call_types) {
    bool ok = false;
    for (const auto& at : ambulance_types) {
      if (quality.compatible(at.id, ct.id)) ok = true;
    }
    if (!ok)
      throw ConfigError("call type " + std::to_string(ct.id) +
                        " has no compatible ambulance type");
  }
}

Instance load_instance(const std::string& path) {
  return parse_instance(parse_file(path), path);
}

Instance instance_from_json_text(const std::string& text,
                                 const std::string& origin) {
  return parse_instance(parse_text(text, origin), origin);
}

std::string instance_to_json_text(const Instance& ins) {
  json j;
  j["geo"] = {{"mode", ins.geo.kind == GeoMode::Kind::Planar ? "planar"
                                                             : "geodesic"},
              {"speed", ins.geo.speed}};
  j["call_types"] = json::array();
  for (const auto& t : ins.call_types) {
    j["call_types"].push_back(
        {{"id", t.id}, {"theta", t.theta}, {"label", t.label}});
  }
  j["ambulance_types"] = json::array();
  for (const auto& t : ins.ambulance_types) {
    j["ambulance_types"].push_back(
        {{"id", t.id}, {"rank", t.advancement_rank}, {"label", t.label}});
  }
  j["quality"] = json::array();
  for (int a = 0; a < ins.quality.ambulance_types(); ++a) {
    json row = json::array();
    for (int c = 0; c < ins.quality.call_types(); ++c) {
      const double v = ins.quality.at(a, c);
      if (std::isfinite(v)) {
        row.push_back(v);
      } else {
        row.push_back(nullptr);
      }
    }
    j["quality"].push_back(row);
  }
  j["bases"] = json::array();
  for (const auto& b : ins.facilities.bases) {
    j["bases"].push_back({{"id", b.id}, {"x", b.location.x}, {"y", b.location.y}});
  }
  j["hospitals"] = json::array();
  for (const auto& h : ins.facilities.hospitals) {
    json hj{{"id", h.id}, {"x", h.location.x}, {"y", h.location.y},
            {"occupancy", h.occupancy}};
    if (h.capacity) hj["capacity"] = *h.capacity;
    if (!h.admissible_types.empty()) hj["admissible_types"] = h.admissible_types;
    j["hospitals"].push_back(hj);
  }
  j["cleaning_bases"] = json::array();
  for (const auto& cb : ins.facilities.cleaning_bases) {
    j["cleaning_bases"].push_back(
        {{"id", cb.id}, {"x", cb.location.x}, {"y", cb.location.y}});
  }
  j["fleet"] = json::array();
  for (const auto& m : ins.fleet) {
    j["fleet"].push_back({{"id", m.id}, {"type", m.type}, {"base", m.start_base}});
  }
  return j.dump(2);
}

std::vector<Call> load_calls(const std::string& path) {
  const json j = parse_file(path);
  std::vector<Call> out;
  const auto& arr = j.is_array() ? j : j.at("calls");
  int idx = 0;
  for (const auto& cj : arr) {
    out.push_back(
        parse_call(cj, idx, path + ".calls[" + std::to_string(idx) + "]"));
    ++idx;
  }
  std::sort(out.begin(), out.end(), [](const Call& a, const Call& b) {
    return a.arrival_time < b.arrival_time ||
           (a.arrival_time == b.arrival_time && a.id < b.id);
  });
  return out;
}

std::vector<Call> calls_from_json_text(const std::string& text,
                                       const std::string& origin) {
  const json j = parse_text(text, origin);
  std::vector<Call> out;
  const auto& arr = j.is_array() ? j : j.at("calls");
  int idx = 0;
  for (const auto& cj : arr) {
    out.push_back(
        parse_call(cj, idx, origin + ".calls[" + std::to_string(idx) + "]"));
    ++idx;
  }
  return out;
}

std::string calls_to_json_text(const std::vector<Call>& calls) {
  json arr = json::array();
  for (const auto& c : calls) arr.push_back(call_to_json(c));
  return json{{"calls", arr}}.dump(2);
}

}  // namespace ambopt
