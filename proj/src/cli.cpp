#include "phytotwin/cli.hpp"

#include "json_util.hpp"
#include "phytotwin/detect.hpp"
#include "phytotwin/error.hpp"
#include "phytotwin/metrics.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <ctime>
#include <map>
#include <ostream>

namespace phytotwin::cli {

using detail::json;
namespace fs = std::filesystem;

std::string build_timestamp() {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && *end == '\0' && v >= 0) t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyPlant:
      return kEmptyResult;
    case ErrorCode::UnknownLeaf:
    case ErrorCode::Unalignable:
    case ErrorCode::OutOfWorkspace:
    case ErrorCode::LeafTooSmall:
    case ErrorCode::NoObservations:
    case ErrorCode::MissingCalibration:
      return kRuntimeError;
    default:
      return kInputError;
  }
}

namespace {

struct Context {
  RunConfig config;
  fs::path out_dir;
  std::ostream& out;
};

void write(const fs::path& path, const std::string& text) { detail::write_text_file(path, text); }

std::uint64_t require_seed(const RunConfig& c, const char* command) {
  if (!c.seed) throw Error(ErrorCode::InvalidConfig, std::string(command) + " needs --seed");
  return *c.seed;
}

// --- synth -----------------------------------------------------------------

void cmd_synth(Context& ctx) {
  const auto seed = require_seed(ctx.config, "synth");
  const auto plant = sim::generate_plant(seed, ctx.config.plant);
  write(ctx.out_dir / "plant.json", detail::dump(sim::plant_to_json(plant.plant)));
  write(ctx.out_dir / "truth.json", detail::dump(sim::truth_to_json(plant.truth)));
  write_ply_file(ctx.out_dir / "cloud.ply", plant.cloud);
  ctx.out << "synth: " << plant.plant.leaves.size() << " leaves, " << plant.cloud.size() << " points -> "
          << ctx.out_dir.string() << "\n";
}

// --- twin ------------------------------------------------------------------

void cmd_twin(Context& ctx, const fs::path& cloud_path) {
  const auto cloud = read_ply_file(cloud_path);
  const auto clusters = split_clusters(cloud);
  if (clusters.empty()) throw Error(ErrorCode::EmptyPlant, "cloud has no points");
  const auto result = detect::detect_leaves(clusters);
  std::vector<twin::ComponentFeature> features;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (result.verdicts[i].verdict != detect::Verdict::Leaf) continue;
    features.push_back(metrics::with_shape(detect::featureize(clusters[i]), clusters[i]));
  }
  const auto built = twin::build_twin(features, {cloud_path.filename().string(), ""});
  twin::write_twin_file(ctx.out_dir / "twin.json", built);
  const auto report = metrics::plant_report(built, clusters, ctx.config.plant_id);
  write(ctx.out_dir / "report.csv", metrics::report_to_csv(report));
  ctx.out << "twin: " << built.leaf_ids().size() << " leaves from " << clusters.size() << " clusters\n";
}

// --- plan ------------------------------------------------------------------

void cmd_plan(Context& ctx, const fs::path& twin_path, const fs::path& plant_path) {
  const auto tw = twin::read_twin_file(twin_path);
  auto plant = sim::plant_from_json(detail::read_json_file(plant_path));
  ctx.config.inspection.validate();
  sim::SimSettings settings = ctx.config.sim;
  settings.ring_radius = ctx.config.inspection.ring_radius;
  sim::Simulator simulator(std::move(plant), settings);
  const auto doc = inspect::plan_twin(tw, simulator, ctx.config.inspection);
  write(ctx.out_dir / "plan.json", inspect::serialize_plan(doc));
  std::size_t skipped = 0;
  for (const auto& p : doc.plans) skipped += p.skipped() ? 1 : 0;
  ctx.out << "plan: " << doc.plans.size() - skipped << " planned, " << skipped << " skipped\n";
}

// --- simulate --------------------------------------------------------------

std::uint64_t leaf_seed(std::uint64_t seed, int leaf_id) {
  return seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(leaf_id) * 0xBF58476D1CE4E5B9ULL + 1;
}

void cmd_simulate(Context& ctx, const fs::path& plan_path, const fs::path& plant_path) {
  const auto doc = inspect::plan_from_json(detail::read_json_file(plan_path));
  auto plant = sim::plant_from_json(detail::read_json_file(plant_path));
  const auto& cfg = ctx.config;
  const bool perturb = cfg.pose_error_mm > 0.0 || cfg.pose_error_deg > 0.0;
  if (cfg.pose_error_mm < 0.0 || cfg.pose_error_deg < 0.0) {
    throw Error(ErrorCode::InvalidConfig, "pose error magnitudes must be non-negative");
  }
  const std::uint64_t seed = perturb ? require_seed(cfg, "simulate with pose error") : cfg.seed.value_or(0);
  sim::SimSettings settings = cfg.sim;
  settings.ring_radius = doc.ring_radius;
  sim::Simulator simulator(std::move(plant), settings);

  json leaves = json::array();
  for (const auto& p : doc.plans) {
    json j = {{"leaf_id", p.leaf_id}, {"sim_leaf", p.sim_leaf}, {"skip_reason", inspect::to_string(p.skip)}};
    if (p.skipped()) {
      j["mode"] = nullptr;
      j["outcome"] = nullptr;
      j["coverage"] = nullptr;
      j["observed"] = false;
      j["target_moved"] = false;
      leaves.push_back(std::move(j));
      continue;
    }
    const auto& seq = *p.sequence;
    const auto error = perturb ? sim::sample_pose_error(cfg.pose_error_mm * 1e-3, geom::deg2rad(cfg.pose_error_deg),
                                                        leaf_seed(seed, p.leaf_id))
                               : geom::RigidTransform::identity();
    sim::RolloutResult r;
    try {
      r = simulator.execute_sequence(seq, error, doc.camera_for(seq.mode));
    } catch (const Error& e) {
      throw Error(e.code(), "leaf " + std::to_string(p.leaf_id) + ": " + e.what());
    }
    const double c = r.coverage(p.face());
    j["mode"] = inspect::to_string(seq.mode);
    j["outcome"] = sim::to_string(r.outcome);
    j["coverage"] = c;
    j["face"] = sim::to_string(p.face());
    j["observed"] = c >= doc.success_threshold;
    j["target_moved"] = r.target_moved(simulator.rest_plant(), seq.target_leaf);
    j["snagged"] = r.snagged;
    leaves.push_back(std::move(j));
  }
  simulator.reset();
  json out = {{"version", sim::kSimVersion},
              {"kind", "rollouts"},
              {"seed", cfg.seed ? json(*cfg.seed) : json(nullptr)},
              {"pose_error", {{"translation_mm", perturb ? cfg.pose_error_mm : 0.0},
                              {"rotation_deg", perturb ? cfg.pose_error_deg : 0.0}}},
              {"success_threshold", doc.success_threshold},
              {"leaves", std::move(leaves)}};
  write(ctx.out_dir / "rollouts.json", detail::dump(out));
  ctx.out << "simulate: " << doc.plans.size() << " leaves rolled out\n";
}

// --- report ----------------------------------------------------------------

struct Summary {
  int leaves = 0;
  int planned = 0;
  int lift_planned = 0, lifted = 0;
  int push_planned = 0, pushed = 0;
  int observed = 0;
  std::map<std::string, int> skipped;
};

std::string ratio(int a, int b) { return std::to_string(a) + "/" + std::to_string(b); }

void cmd_report(Context& ctx, const fs::path& twin_path, const fs::path& rollouts_path) {
  auto tw = twin::read_twin_file(twin_path);
  const auto doc = detail::read_json_file(rollouts_path);
  detail::check_version(doc, sim::kSimVersion);
  Summary s;
  const std::string stamp = build_timestamp();
  try {
    if (detail::require(doc, "kind").get<std::string>() != "rollouts") {
      throw Error(ErrorCode::ParseError, "expected a rollouts document");
    }
    for (const auto& j : detail::require(doc, "leaves")) {
      const int id = detail::require(j, "leaf_id").get<int>();
      const twin::ComponentFeature f = tw.component(id);  // copy: tw is reassigned below
      ++s.leaves;
      twin::AnnotationRecord plan_rec;
      plan_rec.kind = twin::AnnotationKind::PlanRecord;
      plan_rec.timestamp = stamp;
      plan_rec.values = j;
      tw = twin::attach_annotation(tw, id, plan_rec);

      twin::AnnotationRecord metric_rec;
      metric_rec.kind = twin::AnnotationKind::MetricReport;
      metric_rec.timestamp = stamp;
      metric_rec.values = {{"height", metrics::leaf_height(f)},
                           {"area", f.beta.area},
                           {"length", f.beta.length},
                           {"width", f.beta.width}};
      tw = twin::attach_annotation(tw, id, metric_rec);

      const std::string reason = detail::require(j, "skip_reason").get<std::string>();
      if (reason != "NONE") {
        ++s.skipped[reason];
        continue;
      }
      ++s.planned;
      const bool moved = detail::require(j, "target_moved").get<bool>();
      const bool lift = detail::require(j, "mode").get<std::string>() == "Lift";
      (lift ? s.lift_planned : s.push_planned) += 1;
      if (moved) (lift ? s.lifted : s.pushed) += 1;
      if (detail::require(j, "observed").get<bool>()) ++s.observed;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  twin::write_twin_file(ctx.out_dir / "twin_report.json", tw);

  std::string reasons;
  for (const auto& [r, n] : s.skipped) reasons += (reasons.empty() ? "" : ";") + r + ":" + std::to_string(n);
  std::string csv = "plant_id,leaves,planned,Lifted,Pushed,Observed,skipped,skip_reasons\n";
  csv += ctx.config.plant_id + "," + std::to_string(s.leaves) + "," + std::to_string(s.planned) + "," +
         ratio(s.lifted, s.lift_planned) + "," + ratio(s.pushed, s.push_planned) + "," + ratio(s.observed, s.planned) +
         "," + std::to_string(s.leaves - s.planned) + "," + reasons + "\n";
  write(ctx.out_dir / "summary.csv", csv);
  ctx.out << csv;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Plant digital-twin pipeline", "phytotwin"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out_dir;
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--out", out_dir, "Output directory");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic plant");
  std::string leaves;
  synth->add_option("--leaves", leaves, "Leaf count range a..b");

  fs::path cloud_path, twin_path, plant_path, plan_path, rollouts_path;
  auto* twin_cmd = app.add_subcommand("twin", "Build a twin and metrics report from a labeled cloud");
  twin_cmd->add_option("cloud", cloud_path, "Labeled PLY cloud")->required();

  auto* plan_cmd = app.add_subcommand("plan", "Plan leaf inspections");
  plan_cmd->add_option("twin", twin_path, "Twin file")->required();
  plan_cmd->add_option("plant", plant_path, "Simulator plant file")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "Roll out a plan in the simulator");
  sim_cmd->add_option("plan", plan_path, "Plan file")->required();
  sim_cmd->add_option("plant", plant_path, "Simulator plant file")->required();

  auto* report_cmd = app.add_subcommand("report", "Annotate the twin and summarize rollouts");
  report_cmd->add_option("twin", twin_path, "Twin file")->required();
  report_cmd->add_option("rollouts", rollouts_path, "Rollouts file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) config = read_run_config(config_path);
    if (seed) config.seed = seed;
    if (!out_dir.empty()) config.out = out_dir;
    if (!leaves.empty()) std::tie(config.plant.leaves_min, config.plant.leaves_max) = parse_range(leaves);
    Context ctx{config, config.out.value_or(fs::path(".")), out};
    fs::create_directories(ctx.out_dir);

    if (*synth) cmd_synth(ctx);
    if (*twin_cmd) cmd_twin(ctx, cloud_path);
    if (*plan_cmd) cmd_plan(ctx, twin_path, plant_path);
    if (*sim_cmd) cmd_simulate(ctx, plan_path, plant_path);
    if (*report_cmd) cmd_report(ctx, twin_path, rollouts_path);
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace phytotwin::cli
