#include "deepscene/sim/driver.hpp"

#include <algorithm>

namespace deepscene::sim {

std::string to_string(VehicleClass c) {
  switch (c) {
    case VehicleClass::passenger1: return "passenger1";
    case VehicleClass::passenger2: return "passenger2";
    case VehicleClass::passenger3: return "passenger3";
    case VehicleClass::truck: return "truck";
    case VehicleClass::motorcycle: return "motorcycle";
    case VehicleClass::agent: return "agent";
  }
  return "unknown";
}

DriverClassSpec class_spec(VehicleClass c) {
  switch (c) {
    case VehicleClass::agent: return {{10, 10}, 0.0, 2.6, 4.5, {4.5, 4.5}, {0, 0}};
    case VehicleClass::passenger1: return {{8, 12}, 0.2, 2.6, 4.5, {4, 5}, {5, 10}};
    case VehicleClass::passenger2: return {{5, 9}, 1.0, 2.6, 4.5, {4, 5}, {5, 10}};
    case VehicleClass::passenger3: return {{3, 7}, 0.8, 2.6, 4.5, {4, 5}, {5, 10}};
    case VehicleClass::truck: return {{2, 4}, 0.4, 1.3, 2.25, {9.5, 14.5}, {0, 3}};
    case VehicleClass::motorcycle: return {{7, 11}, 0.2, 3.0, 5.0, {2, 3}, {15, 20}};
  }
  return class_spec(VehicleClass::passenger1);
}

DriverParams sample_driver(VehicleClass c, Rng& rng) {
  const auto spec = class_spec(c);
  DriverParams d;
  d.vehicle_class = c;
  d.max_speed_mps = uniform(rng, spec.max_speed.lo, spec.max_speed.hi);
  d.accel_mps2 = spec.accel;
  d.decel_mps2 = spec.decel;
  d.length_m = uniform(rng, spec.length.lo, spec.length.hi);
  d.cooperation_factor = spec.cooperation;
  d.speed_gain_factor = uniform(rng, spec.speed_gain.lo, spec.speed_gain.hi);
  return d;
}

DriverParams agent_driver() {
  const auto spec = class_spec(VehicleClass::agent);
  return {VehicleClass::agent, spec.max_speed.lo, spec.accel, spec.decel, spec.length.lo, 0.0, 0.0};
}

VehicleClass sample_vehicle_class(Rng& rng, double truck_probability, double motorcycle_probability) {
  const double r = uniform(rng, 0.0, 1.0);
  if (r < truck_probability) return VehicleClass::truck;
  if (r < truck_probability + motorcycle_probability) return VehicleClass::motorcycle;
  const auto k = uniform_int(rng, 0, 2);
  return k == 0 ? VehicleClass::passenger1 : (k == 1 ? VehicleClass::passenger2 : VehicleClass::passenger3);
}

double speed_limit_mps() {
  double v = 0.0;
  for (const auto c : {VehicleClass::passenger1, VehicleClass::passenger2, VehicleClass::passenger3,
                       VehicleClass::truck, VehicleClass::motorcycle, VehicleClass::agent}) {
    v = std::max(v, class_spec(c).max_speed.hi);
  }
  return v;
}

}  // namespace deepscene::sim
