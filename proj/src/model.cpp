#include "ambopt/model.hpp"

#include <cmath>

namespace ambopt {

const char* trip_kind_name(TripKind k) {
  switch (k) {
    case TripKind::ToScene: return "to_scene";
    case TripKind::OnScene: return "on_scene";
    case TripKind::ToHospital: return "to_hospital";
    case TripKind::AtHospital: return "at_hospital";
    case TripKind::ToCleaning: return "to_cleaning";
    case TripKind::AtCleaning: return "at_cleaning";
    case TripKind::ToBase: return "to_base";
    case TripKind::AtBase: return "at_base";
  }
  return "?";
}

Location available_position(const AmbulanceState& a, double now,
                            const GeoMode& mode) {
  switch (availability(a, now)) {
    case Availability::AtBase:
      return a.base_location;
    case Availability::EnRouteToBase:
      if (a.awaiting_reassignment) return a.free_location;
      return position_between(a.free_location, a.base_location, a.free_time,
                              now, mode);
    case Availability::Busy:
      break;
  }
  throw std::logic_error("available_position called on a busy ambulance");
}

double cost_allocation(const QualityMatrix& quality, double theta,
                       int ambulance_type, int call_type, double t) {
  const double m = quality.at(ambulance_type, call_type);
  if (!std::isfinite(m)) {
    throw std::invalid_argument("incompatible ambulance/call pair");
  }
  return penalization(t, theta) + m;
}

std::vector<int> compatible_ambulances(const Call& call,
                                       const std::vector<AmbulanceState>& fleet,
                                       const QualityMatrix& quality) {
  std::vector<int> out;
  for (const auto& amb : fleet) {
    if (!quality.compatible(amb.type, call.type)) continue;
    if (call.restricted_to && call.restricted_to->count(amb.id) == 0) continue;
    out.push_back(amb.id);
  }
  return out;
}

double response_time_if_assigned(const AmbulanceState& amb, const Call& call,
                                 double now, const GeoMode& mode) {
  switch (availability(amb, now)) {
    case Availability::AtBase:
      return travel_time_ms(amb.base_location, call.location, now, mode);
    case Availability::EnRouteToBase: {
      const Location p = available_position(amb, now, mode);
      return travel_time_ms(p, call.location, now, mode);
    }
    case Availability::Busy:
      return (amb.free_time - now) +
             travel_time_ms(amb.free_location, call.location, amb.free_time,
                            mode);
  }
  return 0.0;
}

}  // namespace ambopt
