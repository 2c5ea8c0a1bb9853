#pragma once

#include <cstdint>
#include <string>

#include "deepscene/random.hpp"

namespace deepscene::sim {

enum class VehicleClass : std::uint8_t { passenger1, passenger2, passenger3, truck, motorcycle, agent };

std::string to_string(VehicleClass c);

/// Per-vehicle driving parameters. Speeds in m/s, accelerations in m/s²,
/// lengths in m.
struct DriverParams {
  VehicleClass vehicle_class = VehicleClass::passenger1;
  double max_speed_mps = 10.0;
  double accel_mps2 = 2.6;
  double decel_mps2 = 4.5;
  double length_m = 4.5;
  double cooperation_factor = 0.0;  // probability of yielding to a blocked merger
  double speed_gain_factor = 0.0;   // eagerness for speed-gain lane changes

  bool operator==(const DriverParams&) const = default;
};

struct Range {
  double lo;
  double hi;
  [[nodiscard]] bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Sampling ranges for one driver class (degenerate ranges for fixed values).
struct DriverClassSpec {
  Range max_speed;
  double cooperation;
  double accel;
  double decel;
  Range length;
  Range speed_gain;
};

DriverClassSpec class_spec(VehicleClass c);

DriverParams sample_driver(VehicleClass c, Rng& rng);
DriverParams agent_driver();

/// Trucks and motorcycles with the given probabilities, otherwise one of the
/// three passenger types uniformly.
VehicleClass sample_vehicle_class(Rng& rng, double truck_probability, double motorcycle_probability);

/// Largest attainable max speed over all classes; used as the velocity normalizer.
double speed_limit_mps();

}  // namespace deepscene::sim
