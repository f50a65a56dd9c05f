#include "phytotwin/cloud.hpp"

#include "phytotwin/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace phytotwin {

std::vector<Cluster> split_clusters(const LabeledCloud& cloud) {
  std::map<int, Cluster> by_label;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto& c = by_label[cloud.labels[i]];
    c.label = cloud.labels[i];
    c.points.frame = geom::Frame::Plant;
    c.points.points.push_back(cloud.points[i]);
  }
  std::vector<Cluster> out;
  out.reserve(by_label.size());
  for (auto& [label, c] : by_label) out.push_back(std::move(c));
  return out;
}

LabeledCloud merge_clusters(const std::vector<Cluster>& clusters) {
  LabeledCloud cloud;
  for (const auto& c : clusters) {
    for (const auto& p : c.points.points) {
      cloud.points.push_back(p);
      cloud.labels.push_back(c.label);
    }
  }
  return cloud;
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

template <typename T>
bool parse_number(const std::string& tok, T& value) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<std::pair<std::string, std::string>> properties;  // (type, name)
};

}  // namespace

LabeledCloud read_ply(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") fail(line_no ? line_no : 1, "expected 'ply' magic");

  std::vector<Element> elements;
  bool saw_format = false;
  bool saw_end = false;
  while (next_line()) {
    auto tok = tokenize(line);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "format") {
      if (tok.size() != 3 || tok[1] != "ascii") fail(line_no, "only 'format ascii 1.0' is supported");
      saw_format = true;
    } else if (tok[0] == "element") {
      std::size_t count = 0;
      if (tok.size() != 3 || !parse_number(tok[2], count)) fail(line_no, "malformed element line");
      elements.push_back(Element{tok[1], count, {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) fail(line_no, "property before element");
      if (tok.size() == 3) {
        elements.back().properties.emplace_back(tok[1], tok[2]);
      } else if (tok.size() == 5 && tok[1] == "list") {
        elements.back().properties.emplace_back("list", tok[4]);
      } else {
        fail(line_no, "malformed property line");
      }
    } else if (tok[0] == "end_header") {
      saw_end = true;
      break;
    } else {
      fail(line_no, "unexpected header keyword '" + tok[0] + "'");
    }
  }
  if (!saw_format) fail(line_no, "missing format line");
  if (!saw_end) fail(line_no, "missing end_header");

  auto vertex_it = std::find_if(elements.begin(), elements.end(),
                                [](const Element& e) { return e.name == "vertex"; });
  if (vertex_it == elements.end()) fail(line_no, "missing 'element vertex'");

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < vertex_it->properties.size(); ++i) {
    const auto& [type, name] = vertex_it->properties[i];
    if (type == "list") fail(line_no, "list property on vertex element is not supported");
    column[name] = i;
  }
  for (const char* required : {"x", "y", "z", "cluster_id"}) {
    if (!column.count(required)) {
      fail(line_no, std::string("missing vertex field '") + required + "'");
    }
  }
  const std::size_t ix = column["x"], iy = column["y"], iz = column["z"], il = column["cluster_id"];
  const std::size_t width = vertex_it->properties.size();

  LabeledCloud cloud;
  for (const auto& element : elements) {
    for (std::size_t k = 0; k < element.count; ++k) {
      if (!next_line()) fail(line_no + 1, "unexpected end of file in element '" + element.name + "'");
      if (&element != &*vertex_it) continue;
      auto tok = tokenize(line);
      if (tok.size() != width) {
        fail(line_no, "expected " + std::to_string(width) + " values, found " + std::to_string(tok.size()));
      }
      geom::Vec3 p;
      for (auto [axis, col] : {std::pair{0, ix}, std::pair{1, iy}, std::pair{2, iz}}) {
        double v = 0.0;
        if (!parse_number(tok[col], v) || !std::isfinite(v)) fail(line_no, "bad coordinate '" + tok[col] + "'");
        p[axis] = v;
      }
      int label = 0;
      if (!parse_number(tok[il], label)) fail(line_no, "bad cluster_id '" + tok[il] + "'");
      cloud.points.push_back(p);
      cloud.labels.push_back(label);
    }
  }
  return cloud;
}

LabeledCloud read_ply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
  return read_ply(in);
}

void write_ply(std::ostream& out, const LabeledCloud& cloud) {
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << cloud.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\nproperty int cluster_id\nend_header\n";
  char buf[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %d\n", p.x(), p.y(), p.z(), cloud.labels[i]);
    out << buf;
  }
}

void write_ply_file(const std::filesystem::path& path, const LabeledCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  write_ply(out, cloud);
}

}  // namespace phytotwin
