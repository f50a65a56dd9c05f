#pragma once

// The digital twin: an ordered, indexed set of plant components with
// per-component geometry, semantics and attached observations.
// File format "phytotwin/1" (JSON). Lengths in meters, areas in m^2.

#include "phytotwin/geom.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phytotwin::twin {

inline constexpr std::string_view kTwinVersion = "phytotwin/1";

enum class ComponentClass { LeafTop, LeafBottom, SideStem, MainStem, Pot, Soil, Noise };

std::string_view to_string(ComponentClass c);
ComponentClass component_class_from_string(std::string_view s);
/// Pot, Soil and Noise never enter the exported component set.
bool is_rejected(ComponentClass c);
bool is_leaf(ComponentClass c);

struct ShapeParams {
  double area = 0.0;    // m^2
  double length = 0.0;  // m
  double width = 0.0;   // m

  bool operator==(const ShapeParams&) const = default;
};

struct ComponentFeature {
  int id = 0;
  geom::Vec3 center = geom::Vec3::Zero();
  geom::Vec3 direction = geom::Vec3::UnitZ();
  // Normal of the leaf plane (thin axis of the oriented box), +z side.
  geom::Vec3 normal = geom::Vec3::UnitZ();
  ComponentClass cls = ComponentClass::LeafTop;
  ShapeParams beta;
  int cluster_label = -1;

  bool operator==(const ComponentFeature&) const = default;
};

enum class AnnotationKind { UndersideImage, OversideImage, MetricReport, PlanRecord };

std::string_view to_string(AnnotationKind k);
AnnotationKind annotation_kind_from_string(std::string_view s);

struct AnnotationRecord {
  AnnotationKind kind = AnnotationKind::MetricReport;
  std::optional<std::string> payload_path;  // relative to the twin file
  nlohmann::json values = nlohmann::json::object();
  std::string timestamp;

  bool operator==(const AnnotationRecord&) const = default;
};

struct Provenance {
  std::string source;
  std::string capture_manifest;

  bool operator==(const Provenance&) const = default;
};

class DigitalTwin {
 public:
  const std::vector<ComponentFeature>& components() const { return components_; }
  const std::map<int, std::vector<AnnotationRecord>>& annotations() const { return annotations_; }
  const Provenance& provenance() const { return provenance_; }

  std::size_t size() const { return components_.size(); }
  bool contains(int id) const { return id >= 1 && id <= static_cast<int>(components_.size()); }
  /// Throws UnknownComponent.
  const ComponentFeature& component(int id) const;
  std::vector<int> leaf_ids() const;

  bool operator==(const DigitalTwin&) const = default;

 private:
  friend DigitalTwin build_twin(const std::vector<ComponentFeature>&, Provenance);
  friend DigitalTwin attach_annotation(const DigitalTwin&, int, AnnotationRecord);
  friend DigitalTwin twin_from_json(const nlohmann::json&);

  std::vector<ComponentFeature> components_;
  std::map<int, std::vector<AnnotationRecord>> annotations_;
  Provenance provenance_;
};

/// Drops rejected classes, sorts by ascending center z (ties: x, then y) and
/// assigns ids 1..N. Throws EmptyPlant when nothing survives.
DigitalTwin build_twin(const std::vector<ComponentFeature>& partials, Provenance provenance = {});

/// Returns a copy with the record appended under `id`. Throws UnknownComponent.
DigitalTwin attach_annotation(const DigitalTwin& twin, int id, AnnotationRecord record);

nlohmann::json twin_to_json(const DigitalTwin& twin);
/// Validates version and structure; throws VersionMismatch / ParseError.
DigitalTwin twin_from_json(const nlohmann::json& doc);

std::string serialize_twin(const DigitalTwin& twin);
DigitalTwin parse_twin(std::string_view text);

/// Payload paths are resolved against the output directory; throws
/// MissingPayload when one does not exist.
void write_twin_file(const std::filesystem::path& path, const DigitalTwin& twin);
DigitalTwin read_twin_file(const std::filesystem::path& path);

}  // namespace phytotwin::twin
