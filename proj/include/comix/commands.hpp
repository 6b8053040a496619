#pragma once

// Subcommand implementations behind the `comix` executable. Each returns the
// process exit status and writes its report to `out`, diagnostics to `err`.
//
// Exit codes: 0 success, 2 invalid input, 3 validation failure, 4 write
// failure, 5 schema mismatch between predictions and ground truth.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "comix/adapters/detect.hpp"
#include "comix/converters.hpp"
#include "comix/eval_io.hpp"
#include "comix/evaluator.hpp"
#include "comix/split.hpp"
#include "comix/stats.hpp"
#include "comix/uca_xml.hpp"

namespace comix::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidInput = 2;
inline constexpr int kExitValidation = 3;
inline constexpr int kExitWrite = 4;
inline constexpr int kExitSchemaMismatch = 5;

enum class OutputFormat { table, json, csv };

struct GlobalOptions {
  std::size_t jobs = default_jobs();
  OutputFormat format = OutputFormat::table;
  bool lenient = false;
  bool quiet = false;
};

/// Input selection shared by every command that reads a corpus.
struct InputOptions {
  std::filesystem::path path;
  std::string from = "auto";
  std::optional<std::filesystem::path> manifest;
  std::optional<std::filesystem::path> class_map;
};

struct ConvertArgs {
  InputOptions input;
  std::filesystem::path output;
  std::string to;
  std::string classes;  // comma list, empty = detection classes
  std::optional<std::string> split;
};

struct ValidateArgs {
  InputOptions input;
};

struct StatsArgs {
  std::vector<InputOptions> inputs;
  std::string group_by = "dataset,split,class";
  /// Builds a manifest from image headers under this directory; it is written
  /// to `write_manifest` and used for the split column.
  std::optional<std::filesystem::path> probe_images;
  std::optional<std::filesystem::path> write_manifest;
  std::string dataset = "other";
};

struct SplitArgs {
  InputOptions input;
  std::filesystem::path output;
  double ratio = 0.8;
  std::uint64_t seed = 0;
};

struct EvaluateArgs {
  std::filesystem::path ground_truth;
  std::filesystem::path predictions;
  std::optional<std::filesystem::path> json_out;
  std::string ap_mode = "coco101";
  std::string mask = "all_classes";
  std::string classes;
  std::string iou_thresholds;
  std::string max_dets = "1,10,100";
};

/// Exit status for a library error.
inline int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::unknown_image_id:
    case ErrorCode::unknown_category:
    case ErrorCode::scope_mixed: return kExitSchemaMismatch;
    case ErrorCode::serialize_invalid:
    case ErrorCode::zero_dim_page: return kExitValidation;
    case ErrorCode::schema_violation: return e.detail().empty() ? kExitInvalidInput : kExitValidation;
    default: return kExitInvalidInput;
  }
}

namespace detail {

struct WriteFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void write_output(const std::filesystem::path& path, std::string_view content) {
  try {
    text::write_file_atomic(path, content);
  } catch (const std::exception& e) {
    throw WriteFailure(e.what());
  }
}

inline std::vector<AnnotationClass> parse_classes(std::string_view list) {
  std::vector<AnnotationClass> out;
  for (const auto& raw : text::split(list, ',')) {
    auto name = text::trim(raw);
    if (name.empty()) continue;
    auto cls = class_from_name(name);
    if (!cls) throw Error(ErrorCode::invalid_argument, "unknown class '" + std::string(name) + "'");
    if (std::find(out.begin(), out.end(), *cls) == out.end()) out.push_back(*cls);
  }
  if (out.empty()) out.assign(kDetectionClasses.begin(), kDetectionClasses.end());
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(std::string_view list, Parse parse, const char* what) {
  std::vector<T> out;
  for (const auto& raw : text::split(list, ',')) {
    auto token = text::trim(raw);
    if (token.empty()) continue;
    auto v = parse(token);
    if (!v) throw Error(ErrorCode::invalid_argument, std::string("bad ") + what + " '" + std::string(token) + "'");
    out.push_back(static_cast<T>(*v));
  }
  return out;
}

struct Loaded {
  std::vector<UcaBook> books;
  std::optional<DatasetManifest> manifest;
  FormatId format = FormatId::uca;
};

/// `fallback` supplies page sizes and splits when no --manifest is given.
inline Loaded load(const InputOptions& in, const GlobalOptions& g, const DatasetManifest* fallback = nullptr) {
  Loaded l;
  l.format = in.from == "auto" ? detect_format(in.path) : [&] {
    auto f = format_from_name(in.from);
    if (!f) throw Error(ErrorCode::invalid_argument, "unknown input format '" + in.from + "'");
    return *f;
  }();
  AdapterOptions opts;
  opts.validate = false;
  opts.jobs = g.jobs;
  if (in.manifest) l.manifest = read_manifest(*in.manifest);
  else if (fallback) l.manifest = *fallback;
  if (in.class_map) opts.class_map = ClassMap::parse(text::read_file(*in.class_map));
  opts.manifest = l.manifest ? &*l.manifest : nullptr;
  l.books = load_books(in.path, l.format, opts);
  if (l.books.empty()) throw Error(ErrorCode::format_unknown, "no books found in " + in.path.string());
  return l;
}

inline std::string issue_location(const UcaBook& book, const ValidationIssue& i) {
  return book.title + "\t" + (i.page ? std::to_string(*i.page) : std::string("-")) + "\t" + i.annotation_id;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const WriteFailure& e) {
    err << "error: WRITE_FAILED: " << e.what() << "\n";
    return kExitWrite;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
  }
}

}  // namespace detail

inline int cmd_convert(const ConvertArgs& args, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  (void)out;
  return detail::guarded(err, [&] {
    auto loaded = detail::load(args.input, g);
    std::size_t dropped = 0;
    std::vector<std::string> failures;
    for (auto& book : loaded.books) {
      auto report = validate_book(book);
      if (!report.ok() && g.lenient) {
        dropped += drop_invalid_annotations(book);
        report = validate_book(book);
      }
      for (const auto& e : report.errors)
        failures.push_back(book.title + ": " + e.rule + " " + e.message);
      if (!g.quiet)
        for (const auto& w : report.warnings) err << "warning: " << book.title << ": " << w.rule << " " << w.message << "\n";
    }
    if (dropped > 0 && !g.quiet) err << "warning: dropped " << dropped << " invalid objects\n";
    if (!failures.empty()) {
      for (const auto& f : failures) err << "error: " << f << "\n";
      return kExitValidation;
    }

    ConvertOptions copts;
    copts.classes = detail::parse_classes(args.classes);
    copts.manifest = loaded.manifest ? &*loaded.manifest : nullptr;
    if (args.split) {
      auto s = split_from_name(*args.split);
      if (!s) throw Error(ErrorCode::invalid_argument, "unknown split '" + *args.split + "'");
      copts.split = *s;
      if (!copts.manifest) throw Error(ErrorCode::invalid_argument, "--split needs --manifest");
    }

    if (args.to == "uca") {
      std::vector<std::string> docs;
      for (const auto& b : loaded.books) docs.push_back(serialize_uca(b));
      bool single_file = loaded.books.size() == 1 && args.output.extension() == ".xml";
      if (single_file) {
        detail::write_output(args.output, docs.front());
      } else {
        for (std::size_t i = 0; i < docs.size(); ++i)
          detail::write_output(args.output / (text::path_component(loaded.books[i].title) + ".xml"), docs[i]);
      }
    } else if (args.to == "coco") {
      detail::write_output(args.output, to_json(to_coco(loaded.books, copts)));
    } else if (args.to == "yolo") {
      auto files = to_yolo(loaded.books, copts);
      for (const auto& [rel, content] : files) detail::write_output(args.output / rel, content);
    } else if (args.to == "cvat") {
      detail::write_output(args.output, to_cvat(loaded.books, copts));
    } else {
      throw Error(ErrorCode::invalid_argument, "unknown output format '" + args.to + "'");
    }
    return kExitOk;
  });
}

inline int cmd_validate(const ValidateArgs& args, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    auto loaded = detail::load(args.input, g);
    std::size_t n_err = 0, n_warn = 0;
    nlohmann::ordered_json issues = nlohmann::ordered_json::array();
    std::string table;
    for (const auto& book : loaded.books) {
      auto report = validate_book(book);
      auto emit = [&](const ValidationIssue& i, const char* severity) {
        table += std::string(severity) + "\t" + i.rule + "\t" + detail::issue_location(book, i) + "\t" + i.message + "\n";
        issues.push_back({{"severity", severity},
                          {"rule", i.rule},
                          {"book", book.title},
                          {"page", i.page ? nlohmann::ordered_json(*i.page) : nlohmann::ordered_json()},
                          {"annotation", i.annotation_id},
                          {"message", i.message}});
      };
      for (const auto& e : report.errors) emit(e, "error");
      for (const auto& w : report.warnings) emit(w, "warning");
      n_err += report.errors.size();
      n_warn += report.warnings.size();
    }
    if (g.format == OutputFormat::json) {
      nlohmann::ordered_json j;
      j["errors"] = n_err;
      j["warnings"] = n_warn;
      j["issues"] = issues;
      out << j.dump(2) << "\n";
    } else {
      if (!table.empty()) out << "severity\trule\tbook\tpage\tannotation\tmessage\n" << table;
      out << n_err << " errors, " << n_warn << " warnings\n";
    }
    return n_err == 0 ? kExitOk : kExitValidation;
  });
}

inline int cmd_stats(const StatsArgs& args, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (args.inputs.empty() && !args.probe_images) throw Error(ErrorCode::invalid_argument, "no inputs");
    if (args.write_manifest && !args.probe_images)
      throw Error(ErrorCode::invalid_argument, "--write-manifest needs --probe-images");
    std::vector<UcaBook> books;
    DatasetManifest manifest;
    if (args.probe_images) {
      manifest = probe_manifest(*args.probe_images, DatasetTag::from_label(args.dataset), g.jobs);
      if (args.write_manifest) detail::write_output(*args.write_manifest, to_csv(manifest));
      if (args.inputs.empty()) {
        std::map<std::pair<std::string, std::string>, std::size_t> per_group;
        for (const auto& e : manifest.entries) ++per_group[{e.dataset.label(), std::string(split_name(e.split))}];
        StatsTable t;
        for (const auto& [key, n] : per_group) t.images.push_back({key.first, key.second, n});
        t.total_images = manifest.entries.size();
        out << (g.format == OutputFormat::json ? stats_to_json(t)
                : g.format == OutputFormat::csv ? stats_to_csv(t)
                                                 : stats_to_table(t));
        return kExitOk;
      }
    }
    const DatasetManifest probed = manifest;
    manifest.entries.clear();
    for (const auto& in : args.inputs) {
      auto loaded = detail::load(in, g, args.probe_images ? &probed : nullptr);
      books.insert(books.end(), loaded.books.begin(), loaded.books.end());
      if (loaded.manifest)
        manifest.entries.insert(manifest.entries.end(), loaded.manifest->entries.begin(), loaded.manifest->entries.end());
    }
    auto table = compute_stats(books, manifest.entries.empty() ? nullptr : &manifest, parse_group_by(args.group_by));
    switch (g.format) {
      case OutputFormat::json: out << stats_to_json(table); break;
      case OutputFormat::csv: out << stats_to_csv(table); break;
      case OutputFormat::table: out << stats_to_table(table); break;
    }
    return kExitOk;
  });
}

inline int cmd_split(const SplitArgs& args, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    auto loaded = detail::load(args.input, g);
    auto manifest = make_split(loaded.books, {args.ratio, args.seed});
    detail::write_output(args.output, to_csv(manifest));
    if (!g.quiet) {
      std::set<std::string> train, test;
      for (const auto& e : manifest.entries) (e.split == Split::train ? train : test).insert(e.book);
      out << train.size() << " train books, " << test.size() << " test books\n";
    }
    return kExitOk;
  });
}

inline int cmd_evaluate(const EvaluateArgs& args, const GlobalOptions& g, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    EvalConfig config;
    if (args.ap_mode == "coco101") config.ap_mode = ApMode::coco101;
    else if (args.ap_mode == "paper_sum") config.ap_mode = ApMode::paper_sum;
    else throw Error(ErrorCode::invalid_argument, "unknown AP mode '" + args.ap_mode + "'");
    if (args.mask == "all_classes") config.class_mask_mode = MaskMode::all_classes;
    else if (args.mask == "detected_only") config.class_mask_mode = MaskMode::detected_only;
    else throw Error(ErrorCode::invalid_argument, "unknown mask mode '" + args.mask + "'");
    config.classes = detail::parse_classes(args.classes);
    if (!args.iou_thresholds.empty())
      config.iou_thresholds = detail::parse_list<double>(args.iou_thresholds, text::parse_double, "IoU threshold");
    config.max_dets = detail::parse_list<std::size_t>(
        args.max_dets,
        [](std::string_view s) {
          auto v = text::parse_int(s);
          return v && *v > 0 ? v : std::nullopt;
        },
        "max_dets value");

    auto gt = parse_coco_json(text::read_file(args.ground_truth));
    std::vector<DetectionRecord> preds;
    if (std::filesystem::is_directory(args.predictions))
      preds = read_yolo_predictions(args.predictions, gt);
    else
      preds = parse_coco_results(text::read_file(args.predictions));

    auto report = evaluate(gt, preds, config, g.jobs);
    if (args.json_out) detail::write_output(*args.json_out, report_to_json(report));
    if (g.format == OutputFormat::json) {
      out << report_to_json(report);
    } else {
      auto table = report_to_table(report);
      if (g.quiet) {
        std::string kept;
        for (const auto& line : text::split(table, '\n'))
          if (!line.empty() && line.rfind("warning: ", 0) != 0) kept += line + "\n";
        table = kept;
      }
      out << table;
    }
    return kExitOk;
  });
}

}  // namespace comix::cli
