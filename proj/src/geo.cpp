#include "ambopt/geo.hpp"

#include <algorithm>
#include <cmath>

namespace ambopt {

namespace {

constexpr double kPi = 3.14159265358979323846;

double deg2rad(double d) { return d * kPi / 180.0; }

struct Vec3 {
  double x, y, z;
};

Vec3 to_unit_sphere(const Location& p) {
  const double lon = deg2rad(p.x);
  const double lat = deg2rad(p.y);
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
          std::sin(lat)};
}

Location from_unit_sphere(const Vec3& v) {
  const double lat = std::asin(std::clamp(v.z, -1.0, 1.0));
  const double lon = std::atan2(v.y, v.x);
  return {lon * 180.0 / kPi, lat * 180.0 / kPi};
}

void check_geodesic(const Location& p) {
  if (!(p.y >= -90.0 && p.y <= 90.0)) {
    throw GeoError("latitude out of range [-90, 90]");
  }
}

double central_angle(const Location& a, const Location& b) {
  // Haversine form, stable for short hops.
  const double lat1 = deg2rad(a.y), lat2 = deg2rad(b.y);
  const double dlat = lat2 - lat1;
  const double dlon = deg2rad(b.x - a.x);
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  return 2.0 * std::asin(std::min(1.0, std::sqrt(h)));
}

}  // namespace

double distance(const Location& a, const Location& b, const GeoMode& mode) {
  if (!std::isfinite(a.x) || !std::isfinite(a.y) || !std::isfinite(b.x) ||
      !std::isfinite(b.y)) {
    throw GeoError("non-finite coordinate");
  }
  switch (mode.kind) {
    case GeoMode::Kind::Planar:
      return std::hypot(b.x - a.x, b.y - a.y);
    case GeoMode::Kind::Geodesic:
      check_geodesic(a);
      check_geodesic(b);
      return kEarthRadiusKm * central_angle(a, b);
  }
  return 0.0;
}

double travel_time(const Location& a, const Location& b, double /*t0*/,
                   const GeoMode& mode) {
  return distance(a, b, mode) / mode.speed;
}

Location position_between(const Location& a, const Location& b, double t0,
                          double t, const GeoMode& mode) {
  if (t < t0) {
    throw GeoError("position requested before departure");
  }
  const double total = travel_time(a, b, t0, mode);
  if (total <= 0.0 || t - t0 >= total) {
    return b;
  }
  const double s = (t - t0) / total;
  if (mode.kind == GeoMode::Kind::Planar) {
    return {a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)};
  }
  // Spherical linear interpolation keeps both endpoints exact.
  const Vec3 va = to_unit_sphere(a);
  const Vec3 vb = to_unit_sphere(b);
  const double omega = central_angle(a, b);
  const double so = std::sin(omega);
  if (so < 1e-15) {
    return b;
  }
  const double ca = std::sin((1.0 - s) * omega) / so;
  const double cb = std::sin(s * omega) / so;
  return from_unit_sphere(
      {ca * va.x + cb * vb.x, ca * va.y + cb * vb.y, ca * va.z + cb * vb.z});
}

double round_ms(double seconds) {
  return std::round(seconds * 1000.0) / 1000.0;
}

double travel_time_ms(const Location& a, const Location& b, double t0,
                      const GeoMode& mode) {
  return round_ms(travel_time(a, b, t0, mode));
}

}  // namespace ambopt
