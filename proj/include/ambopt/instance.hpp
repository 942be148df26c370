#pragma once

#include <string>
#include <vector>

#include "ambopt/model.hpp"

namespace ambopt {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FleetMember {
  int id = 0;
  int type = 0;
  int start_base = 0;
};

/// Static problem data: geography, type systems, quality matrix, and the
/// fleet roster. Loaded from a JSON instance file.
struct Instance {
  GeoMode geo;
  std::vector<CallType> call_types;
  std::vector<AmbulanceType> ambulance_types;
  QualityMatrix quality;
  Facilities facilities;
  std::vector<FleetMember> fleet;

  double theta(int call_type) const { return call_types.at(call_type).theta; }
  int rank(int ambulance_type) const {
    return ambulance_types.at(ambulance_type).advancement_rank;
  }

  /// Closest hospital admitting the call type, by travel time; ties to the
  /// lowest id. -1 when none admits the type.
  int closest_hospital(const Location& scene, int call_type) const;
  int closest_cleaning_base(const Location& from) const;
  int closest_base(const Location& from) const;

  /// Fleet at rest: every ambulance parked at its start base since t = 0.
  std::vector<AmbulanceState> initial_fleet() const;

  /// Throws ConfigError with a field path when a structural invariant is
  /// broken (empty base list, theta <= 0, unordered ranks, ...).
  void validate() const;
};

Instance load_instance(const std::string& path);
Instance instance_from_json_text(const std::string& text,
                                 const std::string& origin = "<memory>");
std::string instance_to_json_text(const Instance& ins);

std::vector<Call> load_calls(const std::string& path);
std::vector<Call> calls_from_json_text(const std::string& text,
                                       const std::string& origin = "<memory>");
std::string calls_to_json_text(const std::vector<Call>& calls);

}  // namespace ambopt
