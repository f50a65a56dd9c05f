#include "doctest.h"
#include "support.hpp"

#include "phytotwin/error.hpp"

using namespace phytotwin;
using namespace testsupport;

namespace {

Cluster blade_cluster(const sim::LeafBody& leaf, int n, std::uint64_t seed, int label = 1) {
  return make_cluster(label, sim::sample_blade(leaf, n, seed));
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("leaf height is the centroid z") {
  twin::ComponentFeature f;
  f.center = Vec3(0.05, -0.02, 0.272);
  CHECK(metrics::leaf_height(f) == 0.272);
  f.center = Vec3::Zero();
  CHECK(metrics::leaf_height(f) == 0.0);
}

TEST_CASE("generator leaf height matches the truth centroid within 1 mm") {
  const auto sp = sim::generate_plant(21);
  for (const auto& c : split_clusters(sp.cloud)) {
    const auto* t = sp.truth.by_label(c.label);
    if (!t) continue;
    const double h = metrics::leaf_height(detect::featureize(c));
    CHECK(std::abs(h - t->centroid.z()) <= 1e-3);
  }
}

TEST_CASE("flat disc of radius 5 cm") {
  const auto pts = lift3(filled_ellipse(0.05, 0.05, 10000, 22), 0.25);
  const double area_cm2 = metrics::leaf_area(make_cluster(1, pts.points)) * 1e4;
  CHECK(area_cm2 == doctest::Approx(78.5398).epsilon(0.03));
}

TEST_CASE("flat 6 x 4 cm ellipse extents") {
  const auto pts = lift3(filled_ellipse(0.03, 0.02, 20000, 23), 0.2);
  const auto [l, w] = metrics::leaf_length_width(make_cluster(1, pts.points));
  CHECK(l == doctest::Approx(0.06).epsilon(0.02));
  CHECK(w == doctest::Approx(0.04).epsilon(0.02));
}

TEST_CASE("25.6 cm2 with 7.2 cm length is exported verbatim") {
  twin::ComponentFeature f;
  f.center = Vec3(0.05, -0.02, 0.272);
  f.direction = Vec3::UnitX();
  f.normal = Vec3::UnitZ();
  f.beta = {25.6e-4, 0.072, 0.045};
  f.cluster_label = 4;
  const auto tw = twin::build_twin({f});
  const auto report = metrics::plant_report(tw, std::vector<Cluster>{}, "p");
  CHECK(twin::parse_twin(twin::serialize_twin(tw)).component(1).beta.area == 25.6e-4);
  REQUIRE(report.rows.size() == 1);
  CHECK_FALSE(report.rows[0].metrics.has_value());
}

TEST_CASE("curved leaf with 20% sag underestimates area and length") {
  const double a = 0.05, b = 0.025;
  auto leaf = make_leaf(0.3, 0.0, 0.3, 0.02, a, b, 0.2 * 2 * a);
  const auto c = blade_cluster(leaf, 5000, 24);
  const double true_area = blade_area_oracle(a, b, leaf.sag);
  const double arc = midline_length_oracle(a, leaf.sag);
  CHECK(metrics::leaf_area(c) < true_area);
  CHECK(metrics::leaf_length_width(c).first < arc);
  CHECK(sim::blade_surface_area(leaf) == doctest::Approx(true_area).epsilon(1e-4));
  CHECK(sim::blade_geodesic_length(leaf) == doctest::Approx(arc).epsilon(1e-6));
}

TEST_CASE("length and width are rigid invariant") {
  auto leaf = make_leaf(0.0, 0.2, 0.3, 0.02, 0.04, 0.02, 0.005);
  const auto c = blade_cluster(leaf, 3000, 25);
  std::mt19937_64 rng(26);
  for (int k = 0; k < 10; ++k) {
    const auto t = random_rigid(rng);
    const auto moved = make_cluster(1, geom::transform(t, c.points).points);
    const auto [l0, w0] = metrics::leaf_length_width(c);
    const auto [l1, w1] = metrics::leaf_length_width(moved);
    CHECK(std::abs(l0 - l1) < 1e-9);
    CHECK(std::abs(w0 - w1) < 1e-9);
  }
}

TEST_CASE("frame-preserving motions and scaling") {
  auto leaf = make_leaf(1.0, -0.1, 0.25, 0.02, 0.045, 0.02, 0.004);
  const auto c = blade_cluster(leaf, 3000, 27);
  const auto f = detect::featureize(c);
  const double area = metrics::leaf_area(c);
  const auto [l, w] = metrics::leaf_length_width(c);
  for (double angle : {0.3, 1.7, -2.4}) {
    const geom::RigidTransform t = geom::RigidTransform::from_axis_angle(Vec3::UnitZ(), angle, Vec3(0.01, -0.02, 0.05));
    const auto moved = make_cluster(1, geom::transform(t, c.points).points);
    CHECK(metrics::leaf_area(moved) == doctest::Approx(area).epsilon(1e-9));
    CHECK(metrics::leaf_length_width(moved).first == doctest::Approx(l).epsilon(1e-9));
    CHECK(metrics::leaf_height(detect::featureize(moved)) == doctest::Approx(metrics::leaf_height(f) + 0.05).epsilon(1e-12));
  }
  const double s = 1.7;
  std::vector<Vec3> scaled;
  for (const auto& p : c.points.points) scaled.push_back(s * p);
  const auto sc = make_cluster(1, scaled);
  CHECK(metrics::leaf_area(sc) == doctest::Approx(s * s * area).epsilon(1e-9));
  CHECK(metrics::leaf_length_width(sc).first == doctest::Approx(s * l).epsilon(1e-9));
  CHECK(metrics::leaf_length_width(sc).second == doctest::Approx(s * w).epsilon(1e-9));
  CHECK(metrics::leaf_height(detect::featureize(sc)) == doctest::Approx(s * metrics::leaf_height(f)).epsilon(1e-9));
}

TEST_CASE("leaf metric invariants on generator leaves") {
  sim::PlantSpec spec;
  spec.sag_ratio_max = 0.3;
  for (std::uint64_t seed = 30; seed < 35; ++seed) {
    const auto sp = sim::generate_plant(seed, spec);
    for (const auto& c : split_clusters(sp.cloud)) {
      if (!sp.truth.by_label(c.label)) continue;
      const double area = metrics::leaf_area(c);
      const auto [l, w] = metrics::leaf_length_width(c);
      CHECK(area >= 0.0);
      CHECK(w <= l);
      CHECK(area <= l * w * kPi / 4.0 * 1.1);
    }
  }
}

TEST_CASE("aggregates") {
  const std::vector<double> h{0.10, 0.20, 0.30};
  const auto a = metrics::aggregate(h);
  CHECK(a.mean == doctest::Approx(0.20));
  CHECK(a.stddev == doctest::Approx(0.08165).epsilon(1e-4));
  const std::vector<double> one{0.3};
  CHECK(metrics::aggregate(one).stddev == 0.0);
}

TEST_CASE("degenerate clusters") {
  CHECK_THROWS_AS(metrics::leaf_area(make_cluster(1, {Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()})),
                  Error);
  CHECK_THROWS_AS(metrics::leaf_length_width(make_cluster(1, {Vec3::Zero(), Vec3::UnitX()})), Error);
}

TEST_CASE("plant report matches the generator truth and recomputes its aggregates") {
  sim::PlantSpec spec;
  spec.leaves_min = spec.leaves_max = 20;
  spec.sag_ratio_max = 0.0;
  spec.height_max = 0.6;
  spec.min_separation = 0.008;
  const auto sp = sim::generate_plant(31, spec);
  const auto clusters = split_clusters(sp.cloud);
  const auto det = detect::detect_leaves(clusters);
  const auto tw = twin::build_twin(leaf_features(clusters, det));
  const auto rep = metrics::plant_report(tw, clusters, "p31");
  REQUIRE(rep.leaf_count() == 20);
  std::vector<double> heights, areas;
  for (const auto& row : rep.rows) {
    REQUIRE(row.metrics);
    const auto* t = sp.truth.by_label(tw.component(row.leaf_id).cluster_label);
    REQUIRE(t);
    CHECK(row.metrics->area == doctest::Approx(t->area).epsilon(0.05));
    CHECK(row.metrics->length == doctest::Approx(t->length).epsilon(0.03));
    CHECK(row.metrics->width == doctest::Approx(t->width).epsilon(0.03));
    CHECK(std::abs(row.metrics->height - t->centroid.z()) <= 1e-3);
    heights.push_back(row.metrics->height);
    areas.push_back(row.metrics->area);
  }
  CHECK(rep.height.mean == doctest::Approx(metrics::aggregate(heights).mean).epsilon(1e-12));
  CHECK(rep.area.stddev == doctest::Approx(metrics::aggregate(areas).stddev).epsilon(1e-12));

  const auto csv = metrics::report_to_csv(rep);
  CHECK(csv.find("\nplant_id,leaf_id,height_cm,area_cm2,length_cm,width_cm\n") == csv.find('\n'));
  CHECK(csv.find("p31,MEAN,") != std::string::npos);
  CHECK(csv.find("p31,STD,") != std::string::npos);
}

TEST_CASE("a failing leaf becomes a flagged row") {
  twin::ComponentFeature f;
  f.direction = Vec3::UnitX();
  f.center = Vec3(0, 0, 0.2);
  f.cluster_label = 5;
  twin::ComponentFeature g = f;
  g.center.z() = 0.3;
  g.cluster_label = 6;
  const auto tw = twin::build_twin({f, g});
  std::vector<Cluster> cs{make_cluster(5, lift3(filled_ellipse(0.03, 0.02, 2000, 28), 0.2).points),
                          make_cluster(6, {Vec3::Zero(), Vec3::UnitX()})};
  const auto rep = metrics::plant_report(tw, cs);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].metrics.has_value());
  CHECK_FALSE(rep.rows[1].metrics.has_value());
  CHECK_FALSE(rep.rows[1].error.empty());
  CHECK(rep.height.stddev == 0.0);
  CHECK(metrics::report_to_csv(rep).find("nan") != std::string::npos);
}

}  // TEST_SUITE
