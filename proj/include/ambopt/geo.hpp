#pragma once

#include <stdexcept>

namespace ambopt {

/// A point in the plane or a (longitude, latitude) pair in degrees,
/// depending on the active GeoMode.
struct Location {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Location& a, const Location& b) {
    return a.x == b.x && a.y == b.y;
  }
};

/// Distance metric plus the constant cruise speed of the fleet.
/// Planar: straight-line distance in abstract plane units.
/// Geodesic: great-circle distance in kilometers, x = longitude,
/// y = latitude in degrees.
struct GeoMode {
  enum class Kind { Planar, Geodesic };

  Kind kind = Kind::Planar;
  /// Length units per second (km/s in geodesic mode).
  double speed = 1.0;

  static GeoMode planar(double speed_units_per_s) {
    return GeoMode{Kind::Planar, speed_units_per_s};
  }
  static GeoMode geodesic_kmh(double speed_kmh) {
    return GeoMode{Kind::Geodesic, speed_kmh / 3600.0};
  }
};

class GeoError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Great-circle Earth radius used in geodesic mode, km.
inline constexpr double kEarthRadiusKm = 6371.0;

/// Distance between two locations under the given metric.
/// Symmetric, non-negative, zero iff the locations coincide.
/// Throws GeoError when a latitude is outside [-90, 90] in geodesic mode.
double distance(const Location& a, const Location& b, const GeoMode& mode);

/// Travel time in seconds for a trip starting at t0. Constant-speed model:
/// independent of t0, but t0 stays in the signature so time-dependent
/// models can be slotted in.
double travel_time(const Location& a, const Location& b, double t0,
                   const GeoMode& mode);

/// Position at time t of a vehicle that left a at t0 heading to b.
/// Returns b for every t at or past the arrival time. Planar mode
/// interpolates the segment; geodesic mode follows the great circle.
/// Throws GeoError when t < t0.
Location position_between(const Location& a, const Location& b, double t0,
                          double t, const GeoMode& mode);

/// Snap a duration in seconds to whole milliseconds. Dispatch policies
/// compare forecast costs for exact ties, so every travel time that feeds
/// a cost or a trip schedule goes through this.
double round_ms(double seconds);

/// travel_time rounded to whole milliseconds; shared by the simulator and
/// every policy so forecasts match materialized trips exactly.
double travel_time_ms(const Location& a, const Location& b, double t0,
                      const GeoMode& mode);

}  // namespace ambopt
