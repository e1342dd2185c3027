// Copyright 2026 The otprune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver: each pipeline stage as a verb, plus the full
// pipeline, the threshold-shift sweep and the OT/NS comparison.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "otprune/complexity.hpp"
#include "otprune/errors.hpp"
#include "otprune/pipeline.hpp"
#include "otprune/serialization.hpp"
#include "otprune/surgery.hpp"

namespace {

using namespace otprune;

struct Flags {
  std::string preset = "toy_cnn";
  std::string data = "synthetic";
  int num_classes = 4;
  int samples_per_class = 500;
  int image_size = 8;
  std::string method = "OT";
  std::vector<double> lambdas;
  double delta = ThresholdConfig{}.delta;
  double ns_percent = 0.5;
  int iterations = 1;
  std::string post = "fine_tune";
  std::vector<double> shifts;
  std::uint64_t seed = 0;
  int seeds = 1;
  std::optional<int> epochs;
  std::optional<int> recover_epochs;
  std::string out;
  std::string model;
  std::string reference;
  std::string plan;
};

void add_data_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--data", f.data, "'synthetic' or a CIFAR-10 binary directory");
  cmd->add_option("--classes", f.num_classes, "Synthetic classes")->check(CLI::PositiveNumber);
  cmd->add_option("--samples-per-class", f.samples_per_class, "Synthetic samples per class")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--image-size", f.image_size, "Synthetic image side")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "Seed for data, initialization and training");
}

void add_train_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--preset", f.preset, "Model preset");
  cmd->add_option("--lambda", f.lambdas, "Sparsity coefficient(s)")->delimiter(',');
  cmd->add_option("--epochs", f.epochs, "Override the sparsity-training epoch count");
  cmd->add_option("--recover-epochs", f.recover_epochs, "Override the recovery epoch count");
  cmd->add_option("--post", f.post, "fine_tune, train_from_scratch or none");
}

void add_prune_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--method", f.method, "OT or NS");
  cmd->add_option("--delta", f.delta, "OT sum-of-squares fraction");
  cmd->add_option("--ns-percent", f.ns_percent, "NS fraction of channels to prune");
}

PipelineConfig make_config(const Flags& f, bool sweep_default) {
  PipelineConfig c;
  c.preset = f.preset;
  c.data.source = f.data;
  c.data.num_classes = f.num_classes;
  c.data.samples_per_class = f.samples_per_class;
  c.data.image_size = f.image_size;
  c.method = prune_method_from_string(f.method);
  if (!f.lambdas.empty()) {
    c.lambdas = f.lambdas;
  } else if (sweep_default) {
    c.lambdas.assign(kToyLambdaSweep.begin(), kToyLambdaSweep.end());
  }
  c.threshold.delta = f.delta;
  c.ns_percent = f.ns_percent;
  c.iterations = f.iterations;
  c.post = post_mode_from_string(f.post);
  c.shifts = f.shifts;
  c.seed = f.seed;
  c.seeds = f.seeds;
  c.out = f.out;
  if (f.epochs) c.sparse.epochs = *f.epochs;
  if (f.recover_epochs) c.recover.epochs = *f.recover_epochs;
  return c;
}

template <typename F>
auto stage(const std::string& name, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

NetworkGraph load_model(const std::string& path) {
  return stage("load", [&] { return load_graph(path); });
}

void print_reports(const std::vector<PruneReport>& reports) {
  std::cout << reports_csv(reports);
}

int cmd_train(const Flags& f) {
  const auto cfg = stage("config", [&] {
    auto c = make_config(f, false);
    c.validate();
    return c;
  });
  ArtifactWriter art(cfg.out);
  const auto data = stage("data", [&] { return load_data(cfg.data, cfg.seed); });
  const auto initial = f.model.empty()
                           ? stage("build", [&] { return initial_model(cfg, data, cfg.seed); })
                           : load_model(f.model);
  const auto r = stage("train", [&] {
    return sparse_train(initial, data, cfg, cfg.lambdas.front(), cfg.seed);
  });
  stage("report", [&] {
    art.model("sparse", r.graph);
    art.text("sparse_trace.csv", r.trace.to_csv());
    art.text("gamma_histogram.csv", histogram_csv(r.graph));
    art.manifest(cfg.to_json());
  });
  std::cout << r.trace.to_csv();
  return 0;
}

int cmd_prune(const Flags& f) {
  const auto cfg = stage("config", [&] {
    auto c = make_config(f, false);
    c.validate();
    return c;
  });
  const auto trained = load_model(f.model);
  PlanOptions opts;
  opts.method = cfg.method;
  opts.threshold = cfg.threshold;
  opts.ns_percent = cfg.ns_percent;
  opts.lambda = f.lambdas.empty() ? 0.0 : f.lambdas.front();
  auto plan = stage("prune", [&] { return plan_prune(trained, opts); });
  const auto result = stage("prune", [&] { return apply_prune(trained, plan); });
  plan.warnings.insert(plan.warnings.end(), result.warnings.begin(), result.warnings.end());
  Accuracies acc;
  if (f.data != "none") {
    const auto data = stage("data", [&] { return load_data(cfg.data, cfg.seed); });
    acc.base = stage("evaluate", [&] { return accuracy(trained, data.test); });
    acc.pre = stage("evaluate", [&] { return accuracy(result.graph, data.test); });
  }
  const auto report = make_report(trained, result.graph, plan, acc, cfg.seed);
  ArtifactWriter art(cfg.out);
  stage("report", [&] {
    art.json("plan.json", plan.to_json());
    art.model("pruned", result.graph);
    art.json("report.json", report.to_json());
    art.manifest(cfg.to_json());
  });
  for (const auto& w : plan.warnings) std::cerr << "warning: " << w << "\n";
  print_reports({report});
  return 0;
}

int cmd_finetune(const Flags& f) {
  const auto cfg = stage("config", [&] {
    auto c = make_config(f, false);
    c.validate();
    if (c.post == PostMode::None) throw ConfigError("finetune needs --post fine_tune or train_from_scratch");
    if (c.post == PostMode::TrainFromScratch && f.reference.empty()) {
      throw ConfigError("train_from_scratch needs --reference (the unpruned model)");
    }
    return c;
  });
  const auto pruned = load_model(f.model);
  const auto data = stage("data", [&] { return load_data(cfg.data, cfg.seed); });
  const std::string name(to_string(cfg.post));
  const auto r = stage(name, [&] {
    if (cfg.post == PostMode::FineTune) {
      TrainConfig c = cfg.recover;
      c.seed = cfg.seed;
      return fine_tune(pruned, data, c);
    }
    TrainConfig c = cfg.sparse;
    c.seed = cfg.seed;
    const auto flops = count_complexity(load_model(f.reference)).flops;
    return train_from_scratch(pruned, flops, data, c);
  });
  ArtifactWriter art(cfg.out);
  stage("report", [&] {
    art.model("recovered", r.graph);
    art.text("recover_trace.csv", r.trace.to_csv());
    art.manifest(cfg.to_json());
  });
  std::cout << r.trace.to_csv();
  return 0;
}

int cmd_report(const Flags& f) {
  if (f.reference.empty() || f.model.empty() || f.plan.empty()) {
    throw StageError("config", "report needs --reference, --model and --plan");
  }
  const auto before = load_model(f.reference);
  const auto after = load_model(f.model);
  const auto plan = stage("load", [&] {
    std::ifstream in(f.plan);
    if (!in) throw Error("cannot open " + f.plan);
    return PrunePlan::from_json(nlohmann::json::parse(in));
  });
  Accuracies acc;
  if (f.data != "none") {
    PipelineConfig c = make_config(f, false);
    const auto data = stage("data", [&] { return load_data(c.data, c.seed); });
    acc.base = stage("evaluate", [&] { return accuracy(before, data.test); });
    acc.pre = stage("evaluate", [&] { return accuracy(after, data.test); });
  }
  const auto report = stage("report", [&] { return make_report(before, after, plan, acc, f.seed); });
  if (!f.out.empty()) {
    ArtifactWriter art(f.out);
    art.json("report.json", report.to_json());
  }
  std::cout << report.to_json().dump(2) << "\n";
  return 0;
}

int cmd_pipeline(const Flags& f) {
  print_reports(run_pipeline(stage("config", [&] { return make_config(f, false); })));
  return 0;
}

int cmd_sweep(const Flags& f) {
  const auto cfg = stage("config", [&] {
    auto c = make_config(f, false);
    if (c.shifts.empty()) c.shifts = {-6, -5, -4, -3, -2, -1, -0.5, 0, 0.25, 0.5};
    return c;
  });
  std::cout << shift_csv(run_shift_sweep(cfg));
  return 0;
}

int cmd_compare(const Flags& f) {
  print_reports(compare_methods(stage("config", [&] { return make_config(f, true); })));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel pruning driven by batch-norm scaling factors"};
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "Sparsity-train a preset (or --model)");
  add_data_flags(train, f);
  add_train_flags(train, f);
  train->add_option("--model", f.model, "Start from a saved model");
  train->add_option("--out", f.out, "Output directory")->required();

  auto* prune = app.add_subcommand("prune", "Plan and apply pruning to a saved model");
  add_data_flags(prune, f);
  add_prune_flags(prune, f);
  prune->add_option("--lambda", f.lambdas, "Recorded in the plan")->delimiter(',');
  prune->add_option("--model", f.model, "Sparsity-trained model")->required();
  prune->add_option("--out", f.out, "Output directory")->required();

  auto* finetune = app.add_subcommand("finetune", "Recover a pruned model");
  add_data_flags(finetune, f);
  add_train_flags(finetune, f);
  finetune->add_option("--model", f.model, "Pruned model")->required();
  finetune->add_option("--reference", f.reference, "Unpruned model (train_from_scratch budget)");
  finetune->add_option("--out", f.out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Complexity and accuracy report for a pruned model");
  add_data_flags(report, f);
  report->add_option("--reference", f.reference, "Model before pruning")->required();
  report->add_option("--model", f.model, "Model after pruning")->required();
  report->add_option("--plan", f.plan, "plan.json used for the pruning")->required();
  report->add_option("--out", f.out, "Output directory");

  auto* pipeline = app.add_subcommand("pipeline", "Train, prune and recover, optionally iterated");
  add_data_flags(pipeline, f);
  add_train_flags(pipeline, f);
  add_prune_flags(pipeline, f);
  pipeline->add_option("--iterations", f.iterations, "Train-prune-recover rounds");
  pipeline->add_option("--out", f.out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep-shift", "Scale every OT threshold by 10^shift");
  add_data_flags(sweep, f);
  add_train_flags(sweep, f);
  sweep->add_option("--delta", f.delta, "OT sum-of-squares fraction");
  sweep->add_option("--shifts", f.shifts, "log10 threshold offsets")->delimiter(',');
  sweep->add_option("--out", f.out, "Output directory")->required();

  auto* compare = app.add_subcommand("compare", "OT against NS at a matched channel budget");
  add_data_flags(compare, f);
  add_train_flags(compare, f);
  compare->add_option("--delta", f.delta, "OT sum-of-squares fraction");
  compare->add_option("--seeds", f.seeds, "Seeds per lambda, counting up from --seed");
  compare->add_option("--out", f.out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(f);
    if (*prune) return cmd_prune(f);
    if (*finetune) return cmd_finetune(f);
    if (*report) return cmd_report(f);
    if (*pipeline) return cmd_pipeline(f);
    if (*sweep) return cmd_sweep(f);
    if (*compare) return cmd_compare(f);
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: [" << app.get_subcommands().front()->get_name() << "] " << e.what() << "\n";
    return 1;
  }
  return 0;
}
