#include "phytotwin/twin.hpp"

#include "json_util.hpp"
#include "phytotwin/error.hpp"

#include <algorithm>
#include <cmath>

namespace phytotwin::twin {

using detail::json;

std::string_view to_string(ComponentClass c) {
  switch (c) {
    case ComponentClass::LeafTop: return "LeafTop";
    case ComponentClass::LeafBottom: return "LeafBottom";
    case ComponentClass::SideStem: return "SideStem";
    case ComponentClass::MainStem: return "MainStem";
    case ComponentClass::Pot: return "Pot";
    case ComponentClass::Soil: return "Soil";
    case ComponentClass::Noise: return "Noise";
  }
  return "Noise";
}

ComponentClass component_class_from_string(std::string_view s) {
  for (auto c : {ComponentClass::LeafTop, ComponentClass::LeafBottom, ComponentClass::SideStem,
                 ComponentClass::MainStem, ComponentClass::Pot, ComponentClass::Soil,
                 ComponentClass::Noise}) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::ParseError, "unknown component class '" + std::string(s) + "'");
}

bool is_rejected(ComponentClass c) {
  return c == ComponentClass::Pot || c == ComponentClass::Soil || c == ComponentClass::Noise;
}

bool is_leaf(ComponentClass c) { return c == ComponentClass::LeafTop || c == ComponentClass::LeafBottom; }

std::string_view to_string(AnnotationKind k) {
  switch (k) {
    case AnnotationKind::UndersideImage: return "UndersideImage";
    case AnnotationKind::OversideImage: return "OversideImage";
    case AnnotationKind::MetricReport: return "MetricReport";
    case AnnotationKind::PlanRecord: return "PlanRecord";
  }
  return "MetricReport";
}

AnnotationKind annotation_kind_from_string(std::string_view s) {
  for (auto k : {AnnotationKind::UndersideImage, AnnotationKind::OversideImage,
                 AnnotationKind::MetricReport, AnnotationKind::PlanRecord}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::ParseError, "unknown annotation kind '" + std::string(s) + "'");
}

const ComponentFeature& DigitalTwin::component(int id) const {
  if (!contains(id)) throw Error(ErrorCode::UnknownComponent, "no component with id " + std::to_string(id));
  return components_[static_cast<std::size_t>(id - 1)];
}

std::vector<int> DigitalTwin::leaf_ids() const {
  std::vector<int> ids;
  for (const auto& c : components_) {
    if (is_leaf(c.cls)) ids.push_back(c.id);
  }
  return ids;
}

namespace {

void validate_feature(const ComponentFeature& f) {
  if (!f.center.allFinite()) throw Error(ErrorCode::DegenerateInput, "non-finite component center");
  if (std::abs(f.direction.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::DegenerateInput, "component direction is not a unit vector");
  }
  if (std::abs(f.normal.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::DegenerateInput, "component normal is not a unit vector");
  }
  const auto& b = f.beta;
  if (!(b.area >= 0.0) || !(b.length >= 0.0) || !(b.width >= 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "shape parameters must be non-negative");
  }
  if (b.width > b.length) throw Error(ErrorCode::DegenerateInput, "width exceeds length");
}

bool bottom_to_top(const ComponentFeature& a, const ComponentFeature& b) {
  if (a.center.z() != b.center.z()) return a.center.z() < b.center.z();
  if (a.center.x() != b.center.x()) return a.center.x() < b.center.x();
  return a.center.y() < b.center.y();
}

}  // namespace

DigitalTwin build_twin(const std::vector<ComponentFeature>& partials, Provenance provenance) {
  DigitalTwin twin;
  twin.provenance_ = std::move(provenance);
  for (const auto& f : partials) {
    if (is_rejected(f.cls)) continue;
    validate_feature(f);
    twin.components_.push_back(f);
  }
  if (twin.components_.empty()) throw Error(ErrorCode::EmptyPlant, "no components survived detection");
  std::stable_sort(twin.components_.begin(), twin.components_.end(), bottom_to_top);
  for (std::size_t i = 0; i < twin.components_.size(); ++i) twin.components_[i].id = static_cast<int>(i + 1);
  return twin;
}

DigitalTwin attach_annotation(const DigitalTwin& twin, int id, AnnotationRecord record) {
  if (!twin.contains(id)) {
    throw Error(ErrorCode::UnknownComponent, "cannot annotate missing component " + std::to_string(id));
  }
  DigitalTwin out = twin;
  out.annotations_[id].push_back(std::move(record));
  return out;
}

json twin_to_json(const DigitalTwin& twin) {
  json doc;
  doc["version"] = kTwinVersion;
  doc["frame"] = {{"origin", "pot_bottom_center"}, {"up", "+z"}, {"handedness", "right"},
                  {"length_unit", "m"}, {"area_unit", "m2"}};
  doc["provenance"] = {{"source", twin.provenance().source},
                       {"capture_manifest", twin.provenance().capture_manifest}};
  json comps = json::array();
  for (const auto& c : twin.components()) {
    comps.push_back({{"id", c.id},
                     {"class", to_string(c.cls)},
                     {"cluster_label", c.cluster_label},
                     {"center", detail::vec_to_json(c.center)},
                     {"direction", detail::vec_to_json(c.direction)},
                     {"normal", detail::vec_to_json(c.normal)},
                     {"beta", {{"area", c.beta.area}, {"length", c.beta.length}, {"width", c.beta.width}}}});
  }
  doc["components"] = std::move(comps);
  json notes = json::array();
  for (const auto& [id, records] : twin.annotations()) {
    for (const auto& r : records) {
      json a = {{"component", id}, {"kind", to_string(r.kind)}, {"timestamp", r.timestamp},
                {"values", r.values}};
      a["path"] = r.payload_path ? json(*r.payload_path) : json(nullptr);
      notes.push_back(std::move(a));
    }
  }
  doc["annotations"] = std::move(notes);
  return doc;
}

DigitalTwin twin_from_json(const json& doc) {
  detail::check_version(doc, kTwinVersion);
  DigitalTwin twin;
  const auto& prov = detail::require(doc, "provenance");
  twin.provenance_.source = detail::require(prov, "source").get<std::string>();
  twin.provenance_.capture_manifest = detail::require(prov, "capture_manifest").get<std::string>();

  const auto& comps = detail::require(doc, "components");
  if (!comps.is_array()) throw Error(ErrorCode::ParseError, "components must be an array");
  for (const auto& c : comps) {
    ComponentFeature f;
    f.id = detail::require(c, "id").get<int>();
    f.cls = component_class_from_string(detail::require(c, "class").get<std::string>());
    f.cluster_label = detail::require(c, "cluster_label").get<int>();
    f.center = detail::vec_from_json(detail::require(c, "center"), "center");
    f.direction = detail::vec_from_json(detail::require(c, "direction"), "direction");
    f.normal = detail::vec_from_json(detail::require(c, "normal"), "normal");
    const auto& beta = detail::require(c, "beta");
    f.beta = {detail::require_number(beta, "area"), detail::require_number(beta, "length"),
              detail::require_number(beta, "width")};
    validate_feature(f);
    if (is_rejected(f.cls)) throw Error(ErrorCode::ParseError, "rejected class in twin component set");
    twin.components_.push_back(f);
  }
  for (std::size_t i = 0; i < twin.components_.size(); ++i) {
    if (twin.components_[i].id != static_cast<int>(i + 1)) {
      throw Error(ErrorCode::ParseError, "component ids must be 1..N in order");
    }
    if (i > 0 && bottom_to_top(twin.components_[i], twin.components_[i - 1])) {
      throw Error(ErrorCode::ParseError, "components not ordered bottom to top");
    }
  }

  const auto& notes = detail::require(doc, "annotations");
  if (!notes.is_array()) throw Error(ErrorCode::ParseError, "annotations must be an array");
  for (const auto& a : notes) {
    int id = detail::require(a, "component").get<int>();
    if (!twin.contains(id)) {
      throw Error(ErrorCode::UnknownComponent, "annotation references missing component " + std::to_string(id));
    }
    AnnotationRecord r;
    r.kind = annotation_kind_from_string(detail::require(a, "kind").get<std::string>());
    r.timestamp = detail::require(a, "timestamp").get<std::string>();
    r.values = detail::require(a, "values");
    const auto& path = detail::require(a, "path");
    if (!path.is_null()) r.payload_path = path.get<std::string>();
    twin.annotations_[id].push_back(std::move(r));
  }
  return twin;
}

std::string serialize_twin(const DigitalTwin& twin) { return detail::dump(twin_to_json(twin)); }

DigitalTwin parse_twin(std::string_view text) {
  auto doc = detail::parse_json_text(text);
  try {
    return twin_from_json(doc);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

void write_twin_file(const std::filesystem::path& path, const DigitalTwin& twin) {
  const auto base = path.parent_path();
  for (const auto& [id, records] : twin.annotations()) {
    for (const auto& r : records) {
      if (r.payload_path && !std::filesystem::exists(base / *r.payload_path)) {
        throw Error(ErrorCode::MissingPayload,
                    "component " + std::to_string(id) + " payload not found: " + *r.payload_path);
      }
    }
  }
  detail::write_text_file(path, serialize_twin(twin));
}

DigitalTwin read_twin_file(const std::filesystem::path& path) {
  auto doc = detail::read_json_file(path);
  try {
    return twin_from_json(doc);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
}

}  // namespace phytotwin::twin
