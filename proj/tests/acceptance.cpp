// Acceptance run: one PASS/FAIL line per criterion with the measured values.

#include "support.hpp"

#include "phytotwin/capture.hpp"
#include "phytotwin/cli.hpp"
#include "phytotwin/error.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>

using namespace phytotwin;
using namespace testsupport;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

struct PlantTwin {
  sim::SyntheticPlant plant;
  std::vector<Cluster> clusters;
  twin::DigitalTwin twin;
};

PlantTwin build(std::uint64_t seed, const sim::PlantSpec& spec = {}) {
  PlantTwin p{sim::generate_plant(seed, spec), {}, {}};
  p.clusters = split_clusters(p.plant.cloud);
  p.twin = twin::build_twin(leaf_features(p.clusters, detect::detect_leaves(p.clusters)));
  return p;
}

// 1: flat leaves, 2000 samples, no noise.
Verdict flat_leaf_metrics() {
  sim::PlantSpec spec;
  spec.sag_ratio_max = 0.0;
  spec.points_per_leaf = 2000;
  double area = 0, length = 0, width = 0, worst_time = 0;
  int n = 0;
  for (std::uint64_t seed = 1000; n < 100; ++seed) {
    const auto t0 = Clock::now();
    const auto p = build(seed, spec);
    const auto rep = metrics::plant_report(p.twin, p.clusters, "p");
    worst_time = std::max(worst_time, seconds_since(t0));
    for (const auto& row : rep.rows) {
      if (n == 100) break;
      const auto* t = p.plant.truth.by_label(p.twin.component(row.leaf_id).cluster_label);
      if (!t || !row.metrics) return {false, "unmatched or unmeasured leaf"};
      area += std::abs(row.metrics->area - t->area) / t->area;
      length += std::abs(row.metrics->length - t->length) / t->length;
      width += std::abs(row.metrics->width - t->width) / t->width;
      ++n;
    }
  }
  area /= n, length /= n, width /= n;
  const bool pass = area <= 0.05 && length <= 0.03 && width <= 0.03 && worst_time < 1.0;
  return {pass, fmt("leaves=%d area_MRE=%.4f (<=0.05) length_MRE=%.4f width_MRE=%.4f (<=0.03) "
                    "max_plant_time=%.3fs (<1s)",
                    n, area, length, width, worst_time)};
}

// 2: curved leaves never overestimate length or area.
Verdict curved_leaf_bounds() {
  sim::PlantSpec spec;
  spec.sag_ratio_min = 0.1;
  spec.sag_ratio_max = 0.3;
  int n = 0, ok = 0;
  for (std::uint64_t seed = 2000; n < 100; ++seed) {
    const auto p = build(seed, spec);
    for (int id : p.twin.leaf_ids()) {
      if (n == 100) break;
      const auto& f = p.twin.component(id);
      const auto* t = p.plant.truth.by_label(f.cluster_label);
      if (!t) return {false, "unmatched leaf"};
      ok += (f.beta.length <= t->length && f.beta.area <= t->area) ? 1 : 0;
      ++n;
    }
  }
  return {ok >= 99, fmt("leaves=%d bounded=%d (>=99)", n, ok)};
}

// 3: detection precision and recall plus the targeted rules.
Verdict detection() {
  long tp = 0, fp = 0, fn = 0;
  for (std::uint64_t seed = 3000; seed < 3050; ++seed) {
    const auto sp = sim::generate_plant(seed);
    const auto r = detect::detect_leaves(split_clusters(sp.cloud));
    std::set<int> truth;
    for (const auto& l : sp.truth.leaves) truth.insert(l.label);
    const auto labels = r.leaf_labels();
    for (int l : labels) (truth.count(l) ? tp : fp) += 1;
    const std::set<int> found(labels.begin(), labels.end());
    for (int l : truth) fn += found.count(l) ? 0 : 1;
  }
  const double precision = double(tp) / double(tp + fp), recall = double(tp) / double(tp + fn);

  // 99 points is noise, 100 is a leaf.
  auto flat = [](int label, Vec3 c, int n) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.push_back(c + Vec3(0.0002 * (i % 10), 0.0002 * (i / 10), 0));
    return make_cluster(label, pts);
  };
  std::vector<Cluster> cs{flat(1, {0, 0, 0.00}, 300), flat(2, {0.1, 0, 0.01}, 300), flat(3, {0, 0.1, 0.02}, 300),
                          flat(4, {0, 0, 0.60}, 300), flat(5, {0.1, 0, 0.55}, 300), flat(6, {0.1, 0.1, 0.3}, 99)};
  const bool noise99 = detect::detect_leaves(cs).at_label(6).verdict == detect::Verdict::RejectedNoise;
  cs.back() = flat(6, {0.1, 0.1, 0.3}, 100);
  const bool leaf100 = detect::detect_leaves(cs).at_label(6).verdict == detect::Verdict::Leaf;
  // One cluster both lowest and tallest: union of 4 rejections leaves 1 leaf.
  std::vector<Cluster> un{make_cluster(1, {Vec3(0, 0, 0), Vec3(0, 0, 0.7)}), flat(2, {0.1, 0, 0.01}, 200),
                          flat(3, {0, 0.1, 0.02}, 200), flat(4, {0, 0, 0.5}, 200), flat(5, {0.1, 0.1, 0.3}, 200)};
  for (int i = 0; i < 200; ++i) un[0].points.points.push_back(Vec3(0, 0, 0.0035 * i));
  const auto ru = detect::detect_leaves(un);
  const bool union_ok = ru.leaf_labels() == std::vector<int>{5};
  const bool pass = precision == 1.0 && recall == 1.0 && noise99 && leaf100 && union_ok;
  return {pass, fmt("plants=50 precision=%.4f recall=%.4f (==1) rule99=%s union=%s", precision, recall,
                    (noise99 && leaf100) ? "ok" : "bad", union_ok ? "ok" : "bad")};
}

// 4: heuristic vs exhaustive grid over admissible turns (1 deg) and lift
// fractions (0.01).
Verdict heuristic_vs_grid() {
  const inspect::InspectionConfig cfg;
  const double eps = geom::deg2rad(cfg.epsilon_deg);
  double worst = 1e9, ratio_sum = 0;
  int plants = 0, leaves = 0, leaves_at_90 = 0;
  long turns = 0;
  double grid_time = 0;
  for (std::uint64_t seed = 4000; plants < 50; ++seed) {
    const auto p = build(seed);
    sim::Simulator s(p.plant.plant);
    double heuristic = 0, best = 0;
    for (int id : p.twin.leaf_ids()) {
      const auto& f = p.twin.component(id);
      const auto plan = inspect::optimize_plan(f, p.twin, s, cfg);
      if (!plan.baseline_coverage) continue;  // geometric skips have no candidates at all
      const double h = plan.predicted_coverage.value_or(*plan.baseline_coverage);
      const auto mode = inspect::select_mode(f, cfg);
      const auto& cam = cfg.camera_for(mode);
      const auto face = inspect::target_face(mode);
      // A_rotate at 1 deg: center bearing and axis residual both within eps.
      const Vec3 out = *inspect::outward_direction(f);
      const Vec3 axis = cam.optical_axis();
      const Vec3 toward = -Vec3(axis.x(), axis.y(), 0).normalized();
      std::vector<double> thetas;
      for (int d = -180; d < 180; ++d) {
        const double th = geom::deg2rad(d);
        const Vec3 turned(std::cos(th) * out.x() - std::sin(th) * out.y(), std::sin(th) * out.x() + std::cos(th) * out.y(), 0);
        const double residual = std::acos(std::clamp(turned.normalized().dot(toward), -1.0, 1.0));
        if (inspect::center_bearing(f.center, cam, th) <= eps && residual <= eps) thetas.push_back(th);
      }
      turns += static_cast<long>(thetas.size());
      const auto t0 = Clock::now();
      double g = 0;
      for (int k = 65; k <= 90; ++k) {
        auto seq = inspect::plan_manipulation(f, mode, cfg, k / 100.0);
        seq.target_leaf = plan.sim_leaf;
        s.execute_sequence(seq, geom::RigidTransform::identity(), cam);
        for (double th : thetas) g = std::max(g, s.evaluate_coverage(plan.sim_leaf, face, cam, th));
      }
      s.reset();
      grid_time += seconds_since(t0);
      heuristic += h;
      best += g;
      ++leaves;
      leaves_at_90 += (g <= 0.0 || h >= 0.9 * g) ? 1 : 0;
    }
    if (best <= 0.0) continue;
    const double ratio = heuristic / best;
    worst = std::min(worst, ratio);
    ratio_sum += ratio;
    ++plants;
  }
  const bool pass = worst >= 0.9 && grid_time <= 600.0;
  return {pass, fmt("plants=%d leaves=%d min_plant_ratio=%.4f mean_plant_ratio=%.4f (>=0.90) "
                    "leaves_within_90pct=%d grid_time=%.1fs (<=600s) turns_per_leaf=%.1f",
                    plants, leaves, worst, ratio_sum / plants, leaves_at_90, grid_time, double(turns) / leaves)};
}

// 5: success with and without tool pose error.
Verdict pose_error_success() {
  const inspect::InspectionConfig cfg;
  int planned = 0, ok_err = 0, ok_clean = 0;
  for (std::uint64_t seed = 5000; seed < 5050; ++seed) {
    const auto p = build(seed);
    sim::Simulator s(p.plant.plant);
    const auto doc = inspect::plan_twin(p.twin, s, cfg);
    for (const auto& plan : doc.plans) {
      if (plan.skipped()) continue;
      ++planned;
      const auto& cam = doc.camera_for(plan.sequence->mode);
      const auto err = sim::sample_pose_error(0.005, geom::deg2rad(2.0), seed * 1000 + plan.leaf_id);
      ok_err += s.execute_sequence(*plan.sequence, err, cam).coverage(plan.face()) >= cfg.success_threshold;
      ok_clean += s.execute_sequence(*plan.sequence, geom::RigidTransform::identity(), cam).coverage(plan.face()) >=
                  cfg.success_threshold;
      s.reset();
    }
  }
  const double with_err = double(ok_err) / planned, clean = double(ok_clean) / planned;
  return {with_err >= 0.77 && clean >= 0.95,
          fmt("planned_leaves=%d success_with_error=%.4f (>=0.77) success_without=%.4f (>=0.95)", planned, with_err,
              clean)};
}

// 6: calibration exactness and registration error under table jitter.
Verdict calibration() {
  capture::TurntableModel table;
  std::vector<geom::PinholeCamera> cams;
  for (int i = 0; i < 4; ++i) {
    cams.push_back(geom::PinholeCamera::look_at({0.6, 0.0, 0.15 + 0.15 * i}, {0, 0, 0.3}, Vec3::UnitZ(), 1000, 1600,
                                                1200));
  }
  const auto marker = geom::RigidTransform::from_axis_angle(Vec3::UnitZ(), 0.7, Vec3(0.1, -0.05, 0));
  const auto calib =
      capture::calibrate_turntable(capture::simulate_table_observations(table, cams, marker, 0.0, 0.0, 6), marker);
  double exact = 0;
  for (const auto& [key, pose] : calib.table_in_camera) {
    const auto truth = cams[static_cast<std::size_t>(key.first)].pose * table.world_from_table(key.second * 15.0);
    const auto a = pose.to_matrix34(), b = truth.to_matrix34();
    for (int i = 0; i < 12; ++i) exact = std::max(exact, std::abs(a[i] - b[i]));
  }
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> jit(-table.jitter_deg, table.jitter_deg), az(-kPi, kPi), z(0.1, 0.5);
  const int trials = 10000;
  int within = 0;
  double worst = 0;
  for (int t = 0; t < trials; ++t) {
    const int cam = static_cast<int>(rng() % 4), angle = static_cast<int>(rng() % 24);
    const auto plant = geom::RigidTransform::from_axis_angle(Vec3::UnitZ(), az(rng), Vec3::Zero());
    const auto obs = capture::simulate_plant_observation(table, cams[static_cast<std::size_t>(cam)], cam, angle,
                                                         jit(rng), plant);
    const auto est = capture::register_plant(obs, calib);
    const double a = az(rng);
    const Vec3 local(0.25 * std::cos(a), 0.25 * std::sin(a), z(rng));
    const double e = (est.apply(local) - plant.apply(local)).norm();
    worst = std::max(worst, e);
    within += e <= 0.5e-3;
  }
  const double share = double(within) / trials;
  return {exact <= 1e-9 && share >= 0.99,
          fmt("zero_noise_max_err=%.2e (<=1e-9) trials=%d within_0.5mm=%.4f (>=0.99) worst=%.4fmm", exact, trials,
              share, worst * 1e3)};
}

// 7: manifest size for 15 degree steps and four cameras.
Verdict manifest_counts() {
  std::vector<geom::PinholeCamera> cams(4);
  const auto m = capture::synthesize_views(capture::TurntableModel{}, cams, 0.0, 7);
  bool per = true;
  for (int c = 0; c < 4; ++c) per = per && m.count_for_camera(c) == 24;
  return {m.entries.size() == 96 && per, fmt("entries=%zu (==96) per_camera=%s", m.entries.size(), per ? "24" : "bad")};
}

// 8: geometry properties.
Verdict geometry_properties() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(8);
  double inv = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::normal_distribution<double> g(0, 1);
    geom::PointSet s;
    const Vec3 scale(0.05, 0.02, 0.003);
    for (int i = 0; i < 500; ++i) s.points.push_back(scale.cwiseProduct(Vec3(g(rng), g(rng), g(rng))));
    const auto t = random_rigid(rng);
    const auto a = geom::fit_obb(s), b = geom::fit_obb(geom::transform(t, s));
    const auto pa = geom::pca(s), pb = geom::pca(geom::transform(t, s));
    for (int k = 0; k < 3; ++k) {
      inv = std::max(inv, std::abs(a.extents[k] - b.extents[k]));
      inv = std::max(inv, std::abs(pa.variances[k] - pb.variances[k]));
      inv = std::max(inv, 1.0 - std::abs((t.rotation() * pa.axes[k]).dot(pb.axes[k])));
    }
    inv = std::max(inv, (t.apply(pa.mean) - pb.mean).norm());
  }
  double ellipse = 0;
  std::uniform_real_distribution<double> ax(0.01, 0.08), ratio(0.2, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = ax(rng), b = a * ratio(rng);
    const auto pts = filled_ellipse(a, b, 10000, rng());
    ellipse = std::max(ellipse, std::abs(geom::fit_ellipse_area(pts).area() / (kPi * a * b) - 1.0));
  }
  bool monotone = true, bounded = true;
  const auto cam = geom::PinholeCamera::look_at({0, 0, 1}, {0, 0, 0}, Vec3::UnitX(), 1000, 1600, 1200);
  std::uniform_real_distribution<double> u(-0.1, 0.1), h(0.05, 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    geom::SurfaceSamples samples;
    for (int i = 0; i < 400; ++i) samples.add({u(rng), u(rng), 0.0}, 1.0 + std::abs(u(rng)));
    geom::OccluderSet occ;
    double last = 1.0;
    for (int k = 0; k < 10; ++k) {
      const Vec3 c(u(rng), u(rng), h(rng));
      occ.add(geom::Triangle{c, c + Vec3(0.05, 0, 0), c + Vec3(0, 0.05, 0), k});
      const double v = geom::ray_visibility(samples, occ, cam);
      monotone = monotone && v <= last + 1e-15;
      bounded = bounded && v >= 0.0 && v <= 1.0;
      last = v;
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = inv <= 1e-9 && ellipse <= 0.02 && monotone && bounded && secs < 120.0;
  return {pass, fmt("obb_pca_invariance=%.2e (<=1e-9) ellipse_rel_err=%.4f (<=0.02) monotone=%s bounded=%s "
                    "time=%.2fs (<120s)",
                    inv, ellipse, monotone ? "yes" : "no", bounded ? "yes" : "no", secs)};
}

// 9: byte-identical pipeline and lossless round trips.
Verdict determinism() {
  std::vector<std::filesystem::path> dirs{scratch_dir("accept_a"), scratch_dir("accept_b")};
  std::ostringstream sink;
  for (const auto& d : dirs) {
    const std::string s = d.string();
    for (std::vector<std::string> args : {std::vector<std::string>{"synth", "--seed", "9", "--out", s},
                                          {"twin", s + "/cloud.ply", "--out", s},
                                          {"plan", s + "/twin.json", s + "/plant.json", "--out", s},
                                          {"simulate", s + "/plan.json", s + "/plant.json", "--seed", "9", "--out", s},
                                          {"report", s + "/twin.json", s + "/rollouts.json", "--out", s}}) {
      if (cli::run(args, sink, sink) != 0) return {false, "pipeline failed: " + args[0]};
    }
  }
  int same = 0, files = 0;
  for (const char* f : {"plant.json", "truth.json", "cloud.ply", "twin.json", "report.csv", "plan.json",
                        "rollouts.json", "twin_report.json", "summary.csv"}) {
    ++files;
    same += slurp(dirs[0] / f) == slurp(dirs[1] / f);
  }
  const auto twin_text = slurp(dirs[0] / "twin.json");
  const auto report_text = slurp(dirs[0] / "twin_report.json");
  const auto plan_text = slurp(dirs[0] / "plan.json");
  const bool twin_rt = twin::serialize_twin(twin::parse_twin(twin_text)) == twin_text &&
                       twin::serialize_twin(twin::parse_twin(report_text)) == report_text;
  const bool plan_rt = inspect::serialize_plan(inspect::parse_plan(plan_text)) == plan_text;
  return {same == files && twin_rt && plan_rt, fmt("identical_files=%d/%d twin_roundtrip=%s plan_roundtrip=%s", same,
                                                   files, twin_rt ? "ok" : "bad", plan_rt ? "ok" : "bad")};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, flat_leaf_metrics}, {2, curved_leaf_bounds}, {3, detection},       {4, heuristic_vs_grid}, {5, pose_error_success},
      {6, calibration},       {7, manifest_counts},    {8, geometry_properties}, {9, determinism}};
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << " | " << v.detail
              << fmt(" | %.1fs", seconds_since(t0)) << std::endl;
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
