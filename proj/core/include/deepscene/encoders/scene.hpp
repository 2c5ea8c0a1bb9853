#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace deepscene {

/// Object types in their fixed stacking order (vehicles first, then lanes).
enum class ObjectType : std::uint8_t { vehicle = 0, lane = 1 };

inline constexpr std::size_t kObjectTypeCount = 2;
inline constexpr std::size_t kVehicleFeatures = 4;  // dr, dv, dl, length/10
inline constexpr std::size_t kLaneFeatures = 4;     // start km, end km, valid, dl

std::string to_string(ObjectType type);
ObjectType parse_object_type(const std::string& name);

/// Variable-length set of same-typed objects, one feature row per object.
struct ObjectSet {
  ObjectType type = ObjectType::vehicle;
  std::size_t feature_dim = 0;
  std::vector<float> features;     // row-major, size() × feature_dim
  std::vector<std::int64_t> ids;   // simulator object id per row

  [[nodiscard]] std::size_t size() const { return ids.size(); }
  [[nodiscard]] bool empty() const { return ids.empty(); }
  [[nodiscard]] std::span<const float> row(std::size_t i) const {
    return std::span<const float>(features).subspan(i * feature_dim, feature_dim);
  }
  void push_back(std::int64_t id, std::span<const float> row);

  /// Throws DimensionError if storage and declared dimensions disagree.
  void validate() const;

  bool operator==(const ObjectSet&) const = default;
};

/// MDP state: typed dynamic object sets plus static ego features.
/// The vehicle set contains the ego vehicle itself (row with id == ego_id).
struct SceneState {
  std::vector<ObjectSet> dynamic_sets;
  std::vector<float> static_features;
  std::int64_t ego_id = 0;

  [[nodiscard]] const ObjectSet* find(ObjectType type) const;
  /// Returns the set or an empty one of the right type/dim when absent.
  [[nodiscard]] ObjectSet get_or_empty(ObjectType type) const;

  /// At most one set per type; each set internally consistent.
  void validate() const;

  bool operator==(const SceneState&) const = default;
};

}  // namespace deepscene
