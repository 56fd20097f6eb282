#pragma once

#include "latkam/kam.hpp"

#include <nlohmann/json_fwd.hpp>
#include <string>

namespace latkam {

/// Bit-exact double <-> string round trip via C hex-float formatting.
std::string double_to_hex(double x);
double hex_to_double(const std::string& s);

/// Versioned JSON snapshot of (K, lambda, omega, diagnostics) with hex-float
/// arrays.  The bundle is not serialized; it is rebuilt on load from the
/// uncoupled splitting plus graph refinement.
void save_state(const KamState& st, const std::string& path, const nlohmann::json& config);
KamState load_state(const std::string& path, nlohmann::json* configOut = nullptr);

/// FNV-1a hash of a canonical model description, hex-encoded.
std::string model_hash(const ModelConfig& cfg);

} // namespace latkam
