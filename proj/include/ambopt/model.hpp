#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ambopt/geo.hpp"

namespace ambopt {

/// Weighted response time for a call of the given priority weight.
inline double penalization(double t, double theta) {
  if (t < 0.0) throw std::invalid_argument("negative wait");
  return theta * t;
}

struct CallType {
  int id = 0;
  /// Priority weight applied to every second of response time.
  double theta = 1.0;
  std::string label;
};

struct AmbulanceType {
  int id = 0;
  /// Lower rank = more basic vehicle. Ties on cost are resolved toward the
  /// least advanced ambulance, so ranks must totally order the types.
  int advancement_rank = 0;
  std::string label;
};

/// Quality-of-care cost of pairing an ambulance type with a call type, in
/// response-time seconds. An infinite entry marks a forbidden pair.
class QualityMatrix {
 public:
  QualityMatrix() = default;
  QualityMatrix(int ambulance_types, int call_types, double fill = 0.0)
      : n_call_types_(call_types),
        entries_(static_cast<size_t>(ambulance_types) * call_types, fill) {}

  static constexpr double forbidden() {
    return std::numeric_limits<double>::infinity();
  }

  double& at(int ambulance_type, int call_type) {
    return entries_[static_cast<size_t>(ambulance_type) * n_call_types_ +
                    call_type];
  }
  double at(int ambulance_type, int call_type) const {
    return entries_[static_cast<size_t>(ambulance_type) * n_call_types_ +
                    call_type];
  }
  bool compatible(int ambulance_type, int call_type) const {
    return std::isfinite(at(ambulance_type, call_type));
  }
  int ambulance_types() const {
    return n_call_types_ == 0 ? 0
                              : static_cast<int>(entries_.size()) / n_call_types_;
  }
  int call_types() const { return n_call_types_; }

 private:
  int n_call_types_ = 0;
  std::vector<double> entries_;
};

struct Call {
  int id = -1;
  double arrival_time = 0.0;
  Location location;
  int type = 0;
  double time_on_scene = 0.0;
  bool needs_hospital = false;
  double time_at_hospital = 0.0;
  bool needs_cleaning = false;
  double cleaning_time = 0.0;
  /// When set, only these ambulances may serve the call (scenario
  /// augmentation constraint).
  std::optional<std::set<int>> restricted_to;

  /// Ride class 1..4: hospital+cleaning, hospital only, cleaning only,
  /// neither.
  int ride_class() const {
    if (needs_hospital) return needs_cleaning ? 1 : 2;
    return needs_cleaning ? 3 : 4;
  }
};

struct CallRecord {
  int call = -1;
  int which_ambulance = -1;
  double waiting_on_scene = 0.0;
  double waiting_on_scene_penalized = 0.0;
  std::optional<double> waiting_to_hospital;
  std::optional<double> waiting_to_hospital_penalized;
  double allocation_cost = 0.0;
};

enum class TripKind {
  ToScene,
  OnScene,
  ToHospital,
  AtHospital,
  ToCleaning,
  AtCleaning,
  ToBase,
  AtBase,
};

const char* trip_kind_name(TripKind k);

struct Trip {
  TripKind kind;
  Location origin;
  Location destination;
  double depart = 0.0;
  double arrive = 0.0;
  int call = -1;  // -1 for base legs
};

/// Per-ambulance state vector. (free_location, free_time) is the next
/// free point while in service, or the last one once available;
/// (base_location, base_time) is the base currently occupied or targeted.
/// Busy at t iff t < free_time; at a base at t iff base_time <= t.
struct AmbulanceState {
  int id = -1;
  int type = 0;
  int home_base = 0;
  Location free_location;
  double free_time = 0.0;
  Location base_location;
  double base_time = 0.0;
  /// True between the end of a service chain and the instant a base (or a
  /// queued call) has been assigned; base_time is meaningless then.
  bool awaiting_reassignment = false;
  std::vector<Trip> trips;

  bool busy(double now) const { return now < free_time; }
};

enum class Availability { AtBase, EnRouteToBase, Busy };

inline Availability availability(const AmbulanceState& a, double now) {
  if (a.busy(now)) return Availability::Busy;
  if (a.awaiting_reassignment || now < a.base_time)
    return Availability::EnRouteToBase;
  return Availability::AtBase;
}

/// Current position of an available ambulance (at its base or en route
/// to it). Must not be called on a busy ambulance.
Location available_position(const AmbulanceState& a, double now,
                            const GeoMode& mode);

struct Base {
  int id = 0;
  Location location;
};

struct Hospital {
  int id = 0;
  Location location;
  /// Beds still free overall; unset means unbounded.
  std::optional<int> capacity;
  int occupancy = 0;
  /// Empty set means every call type is admissible.
  std::set<int> admissible_types;

  bool admits(int call_type) const {
    return admissible_types.empty() || admissible_types.count(call_type) > 0;
  }
};

struct CleaningBase {
  int id = 0;
  Location location;
};

struct Facilities {
  std::vector<Base> bases;
  std::vector<Hospital> hospitals;
  std::vector<CleaningBase> cleaning_bases;
};

/// Total cost of serving a call of type c with an ambulance of type a and
/// response time t: the weighted response time plus the quality-of-care
/// entry. Throws on a forbidden pair so infinities never enter arithmetic.
double cost_allocation(const QualityMatrix& quality, double theta,
                       int ambulance_type, int call_type, double t);

/// Ambulance ids able to serve the call: finite quality entry, intersected
/// with the call's restriction set when present. May be empty.
std::vector<int> compatible_ambulances(const Call& call,
                                       const std::vector<AmbulanceState>& fleet,
                                       const QualityMatrix& quality);

/// Forecast response time if the ambulance were committed to the call at
/// `now` (= the call's arrival). At a base: travel from the base. En route
/// to a base: travel from the current interpolated position. In service:
/// remaining service time plus travel from the future free point.
double response_time_if_assigned(const AmbulanceState& amb, const Call& call,
                                 double now, const GeoMode& mode);

}  // namespace ambopt
