#pragma once

// Command-line front end. Exit codes: 0 success, 2 usage error, 3 data
// error (schema, dimensions, duplicate keys, numeric failure), 4 I/O error.
// Diagnostics go to `err`; payloads to `out` or the --out file. All inputs
// are read and validated before any output is written.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vqakit/ensemble.hpp"
#include "vqakit/error.hpp"
#include "vqakit/imageops.hpp"
#include "vqakit/io.hpp"
#include "vqakit/metrics.hpp"
#include "vqakit/netpbm.hpp"
#include "vqakit/prompt.hpp"
#include "vqakit/toynet.hpp"
#include "vqakit/training.hpp"

namespace vqakit::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitIo = 4;

inline constexpr std::uint64_t kDefaultSeed = 42;

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot create '" + path + "'");
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "write failed: " + path);
}

inline void emit(const std::string& payload, const std::string& out_path,
                 std::ostream& out) {
  if (out_path.empty()) {
    out << payload;
  } else {
    write_text(out_path, payload);
  }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline ToyConfig load_toy_config(const std::string& path) {
  return path.empty() ? ToyConfig{} : parse_toy_config(load_json(path));
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out,
               std::ostream& err) {
  CLI::App app{"Answer ensembling, VQA evaluation, mask-driven image "
               "enhancement and a LoRA / cross-attention toy model"};
  app.name("vqakit");
  app.require_subcommand(1);

  // eval
  std::string ann_path, pred_path, eval_out;
  bool eval_raw = false;
  bool eval_json = false;
  auto* eval = app.add_subcommand("eval", "Score predictions per answer type");
  eval->add_option("--annotations", ann_path, "Annotation JSON")->required();
  eval->add_option("--predictions", pred_path, "Prediction JSON")->required();
  eval->add_flag("--no-normalize", eval_raw, "Compare answers verbatim");
  eval->add_option("--out", eval_out, "Write the JSON report here");
  eval->add_flag("--json", eval_json,
                 "Print the JSON report instead of the table");

  // ensemble
  std::vector<std::string> ens_paths;
  std::string ens_out;
  bool ens_raw = false;
  auto* ens = app.add_subcommand(
      "ensemble", "Merge prediction files by edit-distance consensus");
  ens->add_option("--predictions", ens_paths, "Prediction JSON files")
      ->required()
      ->expected(1, -1);
  ens->add_option("--out", ens_out, "Output prediction JSON");
  ens->add_flag("--no-normalize", ens_raw, "Compare answers verbatim");

  // enhance
  std::string img_path, mask_path, mode_name, enh_out;
  int gain = 96;
  double dim = 0.3;
  std::optional<double> threshold;
  auto* enh = app.add_subcommand("enhance",
                                 "Highlight or contrast a mask region (PPM/PGM)");
  enh->add_option("--image", img_path, "Input P6 image")->required();
  enh->add_option("--mask", mask_path, "Input P5 mask")->required();
  enh->add_option("--mode", mode_name, "highlight or contrast")
      ->required()
      ->check(CLI::IsMember({"highlight", "contrast"}));
  enh->add_option("--gain", gain, "Highlight strength")
      ->check(CLI::Range(0, 255));
  enh->add_option("--dim", dim, "Brightness kept outside the mask")
      ->check(CLI::Range(0.0, 1.0));
  enh->add_option("--threshold", threshold, "Binarize the mask at m >= X")
      ->check(CLI::Range(0.0, 1.0));
  enh->add_option("--out", enh_out, "Output P6 image")->required();

  // prompt
  std::string question;
  auto* prompt = app.add_subcommand("prompt", "Print the zero-shot instruction");
  prompt->add_option("--question", question, "Question text")->required();

  // toy
  auto* toy = app.add_subcommand("toy", "LoRA + cross-attention toy model");
  toy->require_subcommand(1);
  std::string cfg_path;
  std::uint64_t seed = kDefaultSeed;
  double eps = 1e-5;
  std::size_t steps = 200;
  double lr = 0.05;
  auto* gc = toy->add_subcommand("grad-check",
                                 "Compare analytic and finite-difference gradients");
  gc->add_option("--config", cfg_path, "Model config JSON");
  gc->add_option("--seed", seed, "Initialisation seed");
  gc->add_option("--eps", eps, "Finite-difference step")
      ->check(CLI::PositiveNumber);
  auto* fit = toy->add_subcommand("fit", "Gradient descent on a synthetic batch");
  fit->add_option("--config", cfg_path, "Model config JSON");
  fit->add_option("--steps", steps, "Number of steps")->check(CLI::PositiveNumber);
  fit->add_option("--lr", lr, "Learning rate")->check(CLI::NonNegativeNumber);
  fit->add_option("--seed", seed, "Initialisation seed");
  auto* params = toy->add_subcommand("params", "Trainable / frozen parameter counts");
  params->add_option("--config", cfg_path, "Model config JSON")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "vqakit: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (eval->parsed()) {
      const auto rules =
          eval_raw ? NormalizationRules::none() : NormalizationRules::all();
      const auto anns = parse_annotations(load_json(ann_path));
      const auto preds = parse_predictions(load_json(pred_path));
      const EvalReport report = evaluate(preds, anns, rules);
      const std::string js = detail::dump(report_to_json(report));
      if (!eval_out.empty()) detail::write_text(eval_out, js);
      out << (eval_json ? js : format_table(report));
      if (!report.unmatched.empty()) {
        err << "vqakit: " << report.unmatched.size()
            << " image id(s) present on only one side\n";
      }
    } else if (ens->parsed()) {
      EnsembleConfig cfg;
      cfg.rules = ens_raw ? NormalizationRules::none() : NormalizationRules::all();
      std::vector<std::vector<Prediction>> files;
      for (const auto& p : ens_paths) {
        files.push_back(parse_predictions(load_json(p)));
      }
      const auto results = ensemble_run(gather_candidates(files), cfg);
      std::vector<Prediction> merged;
      merged.reserve(results.size());
      for (const auto& r : results) merged.push_back({r.question_key, r.answer});
      detail::emit(detail::dump(predictions_to_json(std::move(merged))),
                   ens_out, out);
    } else if (enh->parsed()) {
      EnhanceParams p;
      p.mode = mode_name == "highlight" ? EnhanceMode::kHighlight
                                        : EnhanceMode::kContrast;
      p.gain = gain;
      p.dim = dim;
      p.threshold = threshold;
      const ImageBuffer img = read_image(img_path);
      const MaskBuffer mask = read_mask(mask_path);
      write_image(enh_out, enhance(img, mask, p));
    } else if (prompt->parsed()) {
      out << build_instruction(question) << "\n";
    } else if (gc->parsed()) {
      const ToyConfig cfg = detail::load_toy_config(cfg_path);
      ToyModel model(cfg, seed);
      warm_start_adapters(model, seed);
      const ToyBatch batch = make_batch(cfg, seed);
      const GradCheckReport r = grad_check(model, batch, eps);
      out << detail::dump({{"config", toy_config_to_json(cfg)},
                           {"seed", seed},
                           {"eps", eps},
                           {"max_relative_error", r.max_relative_error},
                           {"worst_parameter", r.worst_parameter},
                           {"checked_entries", r.checked},
                           {"absent", r.absent}});
    } else if (fit->parsed()) {
      const ToyConfig cfg = detail::load_toy_config(cfg_path);
      ToyModel model(cfg, seed);
      const ToyBatch batch = make_batch(cfg, seed);
      const FitReport r = fit_toy(model, batch, steps, lr);
      out << detail::dump({{"config", toy_config_to_json(cfg)},
                           {"seed", seed},
                           {"steps", steps},
                           {"lr", lr},
                           {"initial_loss", r.initial_loss},
                           {"final_loss", r.final_loss},
                           {"decreasing_steps", r.decreasing_steps},
                           {"trainable_changed", r.trainable_changed},
                           {"frozen_changed", r.frozen_changed},
                           {"params", param_report_to_json(count_params(model))}});
    } else if (params->parsed()) {
      const ToyConfig cfg = detail::load_toy_config(cfg_path);
      const ToyModel model(cfg, kDefaultSeed);
      out << detail::dump(param_report_to_json(count_params(model)));
    }
  } catch (const Error& e) {
    err << "vqakit: " << e.what() << "\n";
    return e.code() == ErrorCode::kIo ? kExitIo : kExitData;
  } catch (const json::exception& e) {
    err << "vqakit: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

inline int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace vqakit::cli
