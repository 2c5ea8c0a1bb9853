#include "deepscene/encoders/scene.hpp"

#include <array>

#include "deepscene/errors.hpp"

namespace deepscene {

std::string to_string(ObjectType type) { return type == ObjectType::vehicle ? "vehicle" : "lane"; }

ObjectType parse_object_type(const std::string& name) {
  if (name == "vehicle") return ObjectType::vehicle;
  if (name == "lane") return ObjectType::lane;
  throw ConfigError("unknown object type '" + name + "'");
}

void ObjectSet::push_back(std::int64_t id, std::span<const float> row) {
  if (row.size() != feature_dim) {
    throw DimensionError(to_string(type) + " row has " + std::to_string(row.size()) +
                         " features, set expects " + std::to_string(feature_dim));
  }
  ids.push_back(id);
  features.insert(features.end(), row.begin(), row.end());
}

void ObjectSet::validate() const {
  if (features.size() != ids.size() * feature_dim) {
    throw DimensionError(to_string(type) + " set holds " + std::to_string(features.size()) +
                         " values for " + std::to_string(ids.size()) + " objects of dim " +
                         std::to_string(feature_dim));
  }
}

const ObjectSet* SceneState::find(ObjectType type) const {
  for (const auto& s : dynamic_sets) {
    if (s.type == type) return &s;
  }
  return nullptr;
}

ObjectSet SceneState::get_or_empty(ObjectType type) const {
  if (const auto* s = find(type)) return *s;
  ObjectSet empty;
  empty.type = type;
  empty.feature_dim = type == ObjectType::vehicle ? kVehicleFeatures : kLaneFeatures;
  return empty;
}

void SceneState::validate() const {
  std::array<bool, kObjectTypeCount> seen{};
  for (const auto& s : dynamic_sets) {
    const auto k = static_cast<std::size_t>(s.type);
    if (k >= kObjectTypeCount) throw InvariantError("invalid object type in scene");
    if (seen[k]) throw InvariantError("scene holds two " + to_string(s.type) + " sets");
    seen[k] = true;
    s.validate();
  }
}

}  // namespace deepscene
