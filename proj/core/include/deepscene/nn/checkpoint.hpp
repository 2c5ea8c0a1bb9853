#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepscene/nn/layers.hpp"

namespace deepscene::nn {

/// Parameter checkpoint, version 1, little-endian binary:
///
///   magic "DSCKPT01" | u32 version | u64 n | n bytes metadata JSON
///   u64 tensor count, then per tensor:
///   u32 name length | name | u32 rank | rank × u64 dims | u32 dtype (0 = f32) | values
///
/// Values are raw IEEE-754 bits so save/load round-trips exactly.
struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  [[nodiscard]] const CheckpointTensor* find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Appends parameters under "<prefix>/<name>".
void add_parameters(Checkpoint& checkpoint, const std::string& prefix,
                    std::span<const NamedParameter<float>> params);

/// Copies "<prefix>/<name>" entries into the given parameters; every parameter
/// must be present with a matching shape.
void restore_parameters(const Checkpoint& checkpoint, const std::string& prefix,
                        std::span<NamedParameter<float>> params);

}  // namespace deepscene::nn
