#include <iostream>

#include <CLI11.hpp>

#include "comix/commands.hpp"

namespace {

void add_input_options(CLI::App* app, comix::cli::InputOptions& in) {
  app->add_option("--from", in.from, "input format: auto, uca, manga109, dcm, ebd, coco, yolo")->capture_default_str();
  app->add_option("--manifest", in.manifest, "dataset manifest CSV")->check(CLI::ExistingFile);
  app->add_option("--class-map", in.class_map, "token=class lines overriding the adapter's class table")
      ->check(CLI::ExistingFile);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace comix::cli;

  CLI::App app{"Comics dataset conversion, validation and evaluation"};
  app.name("comix");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.allow_config_extras(false);

  GlobalOptions global;
  std::string format = "table";
  app.add_option("--jobs", global.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", format, "report format")->check(CLI::IsMember({"table", "json", "csv"}));
  app.add_flag("--lenient", global.lenient, "drop invalid annotations instead of failing");
  app.add_flag("--quiet", global.quiet, "suppress warnings");

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "convert a corpus to uca, coco, yolo or cvat");
  c->add_option("input", convert.input.path, "input file or directory")->required();
  c->add_option("output", convert.output, "output file or directory")->required();
  add_input_options(c, convert.input);
  c->add_option("--to", convert.to, "output format")->required()->check(CLI::IsMember({"uca", "coco", "yolo", "cvat"}));
  c->add_option("--classes", convert.classes, "comma-separated classes (default panel,character,text,face)");
  c->add_option("--split", convert.split, "keep only pages of this manifest split")
      ->check(CLI::IsMember({"train", "test", "none"}));

  ValidateArgs validate;
  auto* v = app.add_subcommand("validate", "check a corpus against the annotation rules");
  v->add_option("input", validate.input.path, "input file or directory")->required();
  add_input_options(v, validate.input);

  StatsArgs stats;
  std::vector<std::filesystem::path> stats_paths;
  InputOptions stats_common;
  auto* s = app.add_subcommand("stats", "count annotations and images");
  s->add_option("inputs", stats_paths, "input files or directories");
  add_input_options(s, stats_common);
  s->add_option("--group-by", stats.group_by, "comma list over dataset, split, class")->capture_default_str();
  s->add_option("--probe-images", stats.probe_images, "build a manifest from the image headers in this directory")
      ->check(CLI::ExistingDirectory);
  s->add_option("--write-manifest", stats.write_manifest, "where to write the probed manifest");
  s->add_option("--dataset", stats.dataset, "dataset tag for probed images")->capture_default_str();

  SplitArgs split;
  auto* sp = app.add_subcommand("split", "seeded book-level train/test split into a manifest");
  sp->add_option("input", split.input.path, "input file or directory")->required();
  sp->add_option("output", split.output, "manifest CSV to write")->required();
  add_input_options(sp, split.input);
  sp->add_option("--ratio", split.ratio, "fraction of books in train")->capture_default_str();
  sp->add_option("--seed", split.seed, "PRNG seed")->capture_default_str();

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "score detections against COCO ground truth");
  e->add_option("ground_truth", eval.ground_truth, "COCO ground-truth JSON")->required();
  e->add_option("predictions", eval.predictions, "COCO results JSON or YOLO prediction directory")->required();
  e->add_option("--json", eval.json_out, "also write the canonical JSON report here");
  e->add_option("--ap-mode", eval.ap_mode, "coco101 or paper_sum")->capture_default_str();
  e->add_option("--mask", eval.mask, "all_classes or detected_only")->capture_default_str();
  e->add_option("--classes", eval.classes, "comma-separated classes (default panel,character,text,face)");
  e->add_option("--iou-thresholds", eval.iou_thresholds, "comma list (default 0.50:0.05:0.95)");
  e->add_option("--max-dets", eval.max_dets, "comma list of detection budgets")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    int code = app.exit(err);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }
  global.format = format == "json" ? OutputFormat::json : format == "csv" ? OutputFormat::csv : OutputFormat::table;

  if (*c) return cmd_convert(convert, global, std::cout, std::cerr);
  if (*v) return cmd_validate(validate, global, std::cout, std::cerr);
  if (*s) {
    for (const auto& p : stats_paths) {
      InputOptions in = stats_common;
      in.path = p;
      stats.inputs.push_back(in);
    }
    return cmd_stats(stats, global, std::cout, std::cerr);
  }
  if (*sp) return cmd_split(split, global, std::cout, std::cerr);
  return cmd_evaluate(eval, global, std::cout, std::cerr);
}
