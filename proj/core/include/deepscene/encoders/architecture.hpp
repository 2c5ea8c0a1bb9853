#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deepscene/encoders/scene.hpp"
#include "deepscene/graph/adjacency.hpp"
#include "deepscene/nn/ops.hpp"

namespace deepscene::encoders {

enum class EncoderKind : std::uint8_t {
  deepset,          // ρ(Σ φ(x)) over vehicles
  deepscene_set,    // ρ(Σ_k Σ φ^k(x)) over typed sets
  gcn,              // ρ(Σ H^(L)), H^(0) = φ(vehicles)
  deepscene_graph,  // ρ(Σ H^(L)), H^(0) = stacked typed encodings
  vbin,             // ρ(concat of φ over 6 neighbour slots)
  multi_rho,        // concat_k ρ^k(Σ φ^k(x))
};

enum class Pooling : std::uint8_t { sum, max };

inline constexpr std::size_t kNumActions = 3;
inline constexpr std::size_t kVbinSlots = 6;

std::string to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(const std::string& name);

/// Full description of a Q-network. Widths lists are layer output sizes;
/// an empty ρ list means ρ is the identity.
struct ArchitectureConfig {
  EncoderKind kind = EncoderKind::deepset;
  std::vector<ObjectType> object_types{ObjectType::vehicle};
  std::vector<std::size_t> object_dims{kVehicleFeatures};
  std::size_t static_dim = 3;
  std::vector<std::size_t> phi_widths{20, 80};
  bool shared_last_layer = true;
  std::vector<std::size_t> gcn_widths;
  nn::Activation gcn_activation = nn::Activation::relu;
  graph::Normalization normalization = graph::Normalization::inverse_sqrt;
  std::vector<std::size_t> rho_widths{80, 20};
  std::vector<std::size_t> q_widths{100, 100};
  std::size_t num_actions = kNumActions;
  Pooling pooling = Pooling::sum;

  /// Table II layer sizes for each kind.
  static ArchitectureConfig defaults(EncoderKind kind);

  [[nodiscard]] std::size_t type_count() const { return object_types.size(); }
  [[nodiscard]] bool uses_graph() const {
    return kind == EncoderKind::gcn || kind == EncoderKind::deepscene_graph;
  }
  [[nodiscard]] bool typed() const {
    return kind == EncoderKind::deepscene_set || kind == EncoderKind::deepscene_graph ||
           kind == EncoderKind::multi_rho;
  }
  /// Width F of the encoded object space.
  [[nodiscard]] std::size_t phi_out() const;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;

  bool operator==(const ArchitectureConfig&) const = default;
};

void to_json(nlohmann::json& j, const ArchitectureConfig& c);
void from_json(const nlohmann::json& j, ArchitectureConfig& c);

}  // namespace deepscene::encoders
