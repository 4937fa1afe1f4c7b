#pragma once
// Transform configuration and composition.

#include <string>
#include <variant>
#include <vector>

#include "fencekit/compression.hpp"
#include "fencekit/distortion.hpp"
#include "fencekit/noise.hpp"

namespace fencekit {

using TransformParams =
    std::variant<SatSpec, RscaSpec, RspaSpec, SetSpec, RdgSpec, FdSpec, BdrSpec, RjpegSpec,
                 RwebpSpec, ShieldSpec, SmbSpec, SgbSpec, RgnSpec, RscdSpec, PdSpec>;

struct TransformSpec {
  std::string kind;        // one of the 15 registered kind names
  TransformParams params;  // matching parameter struct
  std::string rng_label;   // fork label; empty -> "stage-<index>-<kind>"
  bool operator==(const TransformSpec&) const = default;
};

struct Pipeline {
  std::vector<TransformSpec> stages;  // applied in order; stages[0] first
  bool operator==(const Pipeline&) const = default;
};

enum class TransformCategory { distortion, compression, noise };

struct RegistryEntry {
  std::string kind;
  TransformCategory category;
  std::string description;
  TransformParams defaults;
};

// The 15 registered transforms in stable order (5 distortion, 5 compression,
// 5 noise).
const std::vector<RegistryEntry>& registry_list();

// Default-parameter spec for a kind; throws on unknown kind.
TransformSpec make_default_spec(const std::string& kind);

// Throws std::invalid_argument describing the first violated constraint.
void validate(const TransformSpec& spec);
void validate(const Pipeline& p);

// Apply one transform / a whole pipeline.  Each stage draws from
// rng.fork(label) with the stage's label (default "stage-<index>-<kind>"),
// so per-stage randomness is independent of execution details.
ImageTensor apply_transform(const TransformSpec& spec, const ImageTensor& x, RngStream& rng);
ImageTensor apply_pipeline(const Pipeline& p, const ImageTensor& x, const RngStream& rng);

// JSON round trip.  parse_pipeline rejects unknown kinds, unknown parameter
// keys and out-of-range values; omitted parameters take their defaults.
Pipeline parse_pipeline(const std::string& json_text);
std::string serialize_pipeline(const Pipeline& p);

// Display label, e.g. [RDG, FD, FD] -> "FD×2+RDG" (stages listed outermost
// first, matching function composition order).
std::string pipeline_label(const Pipeline& p);

}  // namespace fencekit
