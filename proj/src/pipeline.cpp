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

#include "otprune/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "otprune/complexity.hpp"
#include "otprune/presets.hpp"
#include "otprune/serialization.hpp"

namespace otprune {

namespace fs = std::filesystem;

std::string_view to_string(PostMode mode) {
  switch (mode) {
    case PostMode::FineTune: return "fine_tune";
    case PostMode::TrainFromScratch: return "train_from_scratch";
    case PostMode::None: return "none";
  }
  return "?";
}

PostMode post_mode_from_string(std::string_view name) {
  if (name == "fine_tune" || name == "finetune") return PostMode::FineTune;
  if (name == "train_from_scratch" || name == "tfs") return PostMode::TrainFromScratch;
  if (name == "none") return PostMode::None;
  throw ConfigError("unknown post-prune mode '" + std::string(name) +
                    "' (expected fine_tune, train_from_scratch or none)");
}

namespace {

template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

std::string histogram_csv(const NetworkGraph& g) {
  std::ostringstream out;
  out.precision(17);
  out << "layer,bin_low,bin_high,count\n";
  for (const auto& name : g.batchnorm_names()) {
    const auto set = GammaSet::from_scales(std::span<const float>(g.at(name).as<BatchNormParams>().gamma), name);
    const auto h = histogram(set, 20, true);
    std::istringstream rows(h.to_csv());
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) out << name << ',' << line << '\n';
  }
  return out.str();
}

namespace {

TrainResult recover(const NetworkGraph& pruned, std::int64_t flops_before, const DataSplits& data,
                    const PipelineConfig& cfg, std::uint64_t seed) {
  if (cfg.post == PostMode::FineTune) {
    TrainConfig c = cfg.recover;
    c.seed = seed;
    return fine_tune(pruned, data, c);
  }
  TrainConfig c = cfg.sparse;
  c.seed = seed;
  return train_from_scratch(pruned, flops_before, data, c);
}

PlanOptions plan_options(const PipelineConfig& cfg, PruneMethod method, double lambda) {
  PlanOptions o;
  o.method = method;
  o.threshold = cfg.threshold;
  o.ns_percent = cfg.ns_percent;
  o.lambda = lambda;
  return o;
}

}  // namespace

ArtifactWriter::ArtifactWriter(fs::path root) : root_(std::move(root)) {
  if (!root_.empty()) fs::create_directories(root_);
}

void ArtifactWriter::text(const std::string& rel, const std::string& content) {
  if (!enabled()) return;
  const fs::path p = root_ / rel;
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
  if (!out) throw Error("cannot write " + p.string());
  files_.push_back(rel);
}

void ArtifactWriter::json(const std::string& rel, const nlohmann::json& j) {
  text(rel, j.dump(2) + "\n");
}

void ArtifactWriter::model(const std::string& rel, const NetworkGraph& g) {
  if (!enabled()) return;
  const fs::path p = root_ / rel;
  fs::create_directories(p.parent_path());
  save_graph(g, p);
  require_valid(load_graph(p));
  files_.push_back(rel + ".otg.json");
  files_.push_back(rel + ".otg.bin");
}

void ArtifactWriter::manifest(const nlohmann::json& config) {
  if (!enabled()) return;
  nlohmann::json m;
  m["config"] = config;
  m["artifacts"] = files_;
  std::ofstream out(root_ / "manifest.json", std::ios::binary);
  out << m.dump(2) << "\n";
  if (!out) throw Error("cannot write " + (root_ / "manifest.json").string());
}

void PipelineConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (seeds < 1) throw ConfigError("seeds must be >= 1");
  if (lambdas.empty()) throw ConfigError("at least one lambda is required");
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("lambda must be >= 0");
  }
  if (!shifts.empty() && method != PruneMethod::OT) {
    throw ConfigError("a threshold shift sweep requires method OT");
  }
  if (!(ns_percent >= 0.0 && ns_percent < 1.0)) throw ConfigError("ns percent must lie in [0, 1)");
  if (!(ns_layer_cap > 0.0 && ns_layer_cap <= 1.0)) throw ConfigError("ns layer cap must lie in (0, 1]");
  threshold.validate();
  sparse.validate();
  TrainConfig r = recover;
  r.lambda = 0.0;
  r.validate();
}

nlohmann::json PipelineConfig::to_json() const {
  auto train_json = [](const TrainConfig& c) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : c.lr_steps) steps.push_back({{"epoch", s.epoch}, {"factor", s.factor}});
    return nlohmann::json{{"epochs", c.epochs},      {"batch_size", c.batch_size},
                          {"lr", c.lr},              {"lr_steps", steps},
                          {"momentum", c.momentum},  {"nesterov", c.nesterov},
                          {"weight_decay", c.weight_decay}, {"decay_bn_scale", c.decay_bn_scale},
                          {"augment", c.augment}};
  };
  return {{"preset", preset},
          {"data", {{"source", data.source},
                    {"num_classes", data.num_classes},
                    {"samples_per_class", data.samples_per_class},
                    {"image_size", data.image_size}}},
          {"method", std::string(to_string(method))},
          {"lambdas", lambdas},
          {"delta", threshold.delta},
          {"p", threshold.p},
          {"ns_percent", ns_percent},
          {"ns_layer_cap", ns_layer_cap},
          {"iterations", iterations},
          {"post", std::string(to_string(post))},
          {"shifts", shifts},
          {"seed", seed},
          {"seeds", seeds},
          {"sparse_train", train_json(sparse)},
          {"recover", train_json(recover)}};
}

DataSplits load_data(const DataSource& src, std::uint64_t seed) {
  if (src.synthetic()) {
    return make_synthetic(src.num_classes, src.samples_per_class, src.image_size, seed);
  }
  return load_cifar10(src.source);
}

NetworkGraph initial_model(const PipelineConfig& cfg, const DataSplits& data, std::uint64_t seed) {
  PresetOptions o;
  o.num_classes = data.train.num_classes;
  o.seed = seed;
  if (cfg.preset.rfind("toy_", 0) == 0) o.input_shape = data.train.shape;
  return build_preset(cfg.preset, o);
}

TrainResult sparse_train(const NetworkGraph& graph, const DataSplits& data,
                         const PipelineConfig& cfg, double lambda, std::uint64_t seed) {
  TrainConfig c = cfg.sparse;
  c.lambda = lambda;
  c.mode = TrainMode::SparseTrain;
  c.seed = seed;
  return train(graph, data, c);
}

std::vector<PruneReport> run_pipeline(const PipelineConfig& cfg) {
  in_stage("config", [&] { cfg.validate(); });
  const double lambda = cfg.lambdas.front();
  ArtifactWriter art(cfg.out);
  const auto data = in_stage("data", [&] { return load_data(cfg.data, cfg.seed); });
  NetworkGraph current = in_stage("build", [&] { return initial_model(cfg, data, cfg.seed); });
  in_stage("build", [&] { art.model("initial", current); });

  std::vector<PruneReport> reports;
  for (int round = 1; round <= cfg.iterations; ++round) {
    const std::string dir = "round" + std::to_string(round) + "/";
    const std::string tag = " (round " + std::to_string(round) + ")";
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(round - 1);

    auto trained = in_stage("train" + tag, [&] {
      auto r = sparse_train(current, data, cfg, lambda, seed);
      art.model(dir + "sparse", r.graph);
      art.text(dir + "sparse_trace.csv", r.trace.to_csv());
      art.text(dir + "gamma_histogram.csv", histogram_csv(r.graph));
      return r;
    });
    const double acc_base = in_stage("evaluate" + tag, [&] { return accuracy(trained.graph, data.test); });

    auto [plan, pruned] = in_stage("prune" + tag, [&] {
      auto opts = plan_options(cfg, cfg.method, lambda);
      if (cfg.method == PruneMethod::NS && cfg.iterations > 1) opts.ns_layer_cap = cfg.ns_layer_cap;
      auto p = plan_prune(trained.graph, opts);
      auto r = apply_prune(trained.graph, p);
      p.warnings.insert(p.warnings.end(), r.warnings.begin(), r.warnings.end());
      art.json(dir + "plan.json", p.to_json());
      art.model(dir + "pruned", r.graph);
      return std::make_pair(std::move(p), std::move(r.graph));
    });
    const double acc_pre = in_stage("evaluate" + tag, [&] { return accuracy(pruned, data.test); });

    Accuracies acc{acc_base, acc_pre, std::nullopt};
    NetworkGraph next = pruned;
    if (cfg.post != PostMode::None) {
      const std::string stage = std::string(to_string(cfg.post)) + tag;
      auto post = in_stage(stage, [&] {
        auto r = recover(pruned, count_complexity(trained.graph).flops, data, cfg, seed);
        art.model(dir + "recovered", r.graph);
        art.text(dir + "recover_trace.csv", r.trace.to_csv());
        return r;
      });
      acc.post = in_stage("evaluate" + tag, [&] { return accuracy(post.graph, data.test); });
      next = std::move(post.graph);
    }
    auto report = in_stage("report" + tag, [&] {
      auto r = make_report(trained.graph, pruned, plan, acc, cfg.seed);
      art.json(dir + "report.json", r.to_json());
      return r;
    });
    reports.push_back(std::move(report));
    current = std::move(next);
  }
  in_stage("report", [&] {
    art.text("reports.csv", reports_csv(reports));
    art.manifest(cfg.to_json());
  });
  return reports;
}

std::vector<ShiftPoint> shift_sweep(const NetworkGraph& trained, const DataSplits& data,
                                    const PipelineConfig& cfg) {
  const auto base_flops = count_complexity(trained).flops;
  std::vector<ShiftPoint> points;
  for (double shift : cfg.shifts) {
    const std::string tag = " (shift " + std::to_string(shift) + ")";
    auto opts = plan_options(cfg, PruneMethod::OT, cfg.lambdas.front());
    opts.shift_log10 = shift;
    const auto plan = in_stage("prune" + tag, [&] { return plan_prune(trained, opts); });
    const auto pruned = in_stage("prune" + tag, [&] { return apply_prune(trained, plan).graph; });
    const auto rep = make_report(trained, pruned, plan, {}, cfg.seed);
    ShiftPoint pt;
    pt.shift = shift;
    pt.pruned_flops_pct = rep.pruned_flops_pct();
    pt.pruned_params_pct = rep.pruned_params_pct();
    pt.pruned_channels = static_cast<std::size_t>(rep.pruned_channels);
    pt.acc_pre = in_stage("evaluate" + tag, [&] { return accuracy(pruned, data.test); });
    if (cfg.post != PostMode::None) {
      const auto post = in_stage(std::string(to_string(cfg.post)) + tag,
                                 [&] { return recover(pruned, base_flops, data, cfg, cfg.seed); });
      pt.acc_post = accuracy(post.graph, data.test);
    }
    points.push_back(pt);
  }
  return points;
}

std::vector<ShiftPoint> run_shift_sweep(const PipelineConfig& cfg) {
  in_stage("config", [&] {
    cfg.validate();
    if (cfg.method != PruneMethod::OT) throw ConfigError("a threshold shift sweep requires method OT");
    if (cfg.shifts.empty()) throw ConfigError("no shifts given");
  });
  ArtifactWriter art(cfg.out);
  const auto data = in_stage("data", [&] { return load_data(cfg.data, cfg.seed); });
  const auto initial = in_stage("build", [&] { return initial_model(cfg, data, cfg.seed); });
  const auto trained = in_stage("train", [&] {
    auto r = sparse_train(initial, data, cfg, cfg.lambdas.front(), cfg.seed);
    art.model("sparse", r.graph);
    art.text("sparse_trace.csv", r.trace.to_csv());
    art.text("gamma_histogram.csv", histogram_csv(r.graph));
    return r;
  });
  auto points = shift_sweep(trained.graph, data, cfg);
  in_stage("report", [&] {
    art.text("shift_sweep.csv", shift_csv(points));
    art.manifest(cfg.to_json());
  });
  return points;
}

std::string shift_csv(const std::vector<ShiftPoint>& points) {
  std::ostringstream out;
  out.precision(17);
  out << "shift,pruned_flops_pct,pruned_params_pct,acc_pre,acc_post\n";
  for (const auto& p : points) {
    out << p.shift << ',' << p.pruned_flops_pct << ',' << p.pruned_params_pct << ',' << p.acc_pre << ',';
    if (p.acc_post) out << *p.acc_post;
    out << '\n';
  }
  return out.str();
}

double matched_ns_percent(std::size_t ot_pruned, std::size_t total_channels) {
  if (total_channels == 0) throw ConfigError("no channels to match");
  const double pct = (static_cast<double>(ot_pruned) + 0.5) / static_cast<double>(total_channels);
  return std::min(pct, std::nextafter(1.0, 0.0));
}

std::vector<PruneReport> compare_methods(const PipelineConfig& cfg) {
  in_stage("config", [&] { cfg.validate(); });
  ArtifactWriter art(cfg.out);
  std::vector<PruneReport> rows;
  for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
    const double lambda = cfg.lambdas[li];
    for (int s = 0; s < cfg.seeds; ++s) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(s);
      std::ostringstream tag;
      tag << " (lambda " << lambda << ", seed " << seed << ")";
      std::ostringstream dir;
      dir << "lambda" << li << "/seed" << seed << "/";
      const auto data = in_stage("data" + tag.str(), [&] { return load_data(cfg.data, seed); });
      const auto trained = in_stage("train" + tag.str(), [&] {
        auto r = sparse_train(initial_model(cfg, data, seed), data, cfg, lambda, seed);
        art.model(dir.str() + "sparse", r.graph);
        return r;
      });
      const double acc_base = accuracy(trained.graph, data.test);
      const auto flops = count_complexity(trained.graph).flops;
      std::size_t total_channels = 0;
      for (const auto& name : trained.graph.batchnorm_names()) {
        total_channels += trained.graph.at(name).as<BatchNormParams>().channels();
      }
      std::size_t ot_pruned = 0;
      for (PruneMethod method : {PruneMethod::OT, PruneMethod::NS}) {
        const std::string m(to_string(method));
        auto opts = plan_options(cfg, method, lambda);
        if (method == PruneMethod::NS) opts.ns_percent = matched_ns_percent(ot_pruned, total_channels);
        auto [plan, pruned] = in_stage("prune " + m + tag.str(), [&] {
          auto p = plan_prune(trained.graph, opts);
          auto g = apply_prune(trained.graph, p).graph;
          art.json(dir.str() + m + "_plan.json", p.to_json());
          art.model(dir.str() + m + "_pruned", g);
          return std::make_pair(std::move(p), std::move(g));
        });
        Accuracies acc{acc_base, accuracy(pruned, data.test), std::nullopt};
        if (cfg.post != PostMode::None) {
          const auto post = in_stage(std::string(to_string(cfg.post)) + " " + m + tag.str(),
                                     [&] { return recover(pruned, flops, data, cfg, seed); });
          acc.post = accuracy(post.graph, data.test);
        }
        auto report = make_report(trained.graph, pruned, plan, acc, seed);
        if (method == PruneMethod::OT) ot_pruned = static_cast<std::size_t>(report.pruned_channels);
        art.json(dir.str() + m + "_report.json", report.to_json());
        rows.push_back(std::move(report));
      }
    }
  }
  in_stage("report", [&] {
    art.text("compare.csv", reports_csv(rows));
    art.manifest(cfg.to_json());
  });
  return rows;
}

std::string reports_csv(const std::vector<PruneReport>& reports) {
  std::string out = PruneReport::csv_header() + "\n";
  for (const auto& r : reports) out += r.csv_row() + "\n";
  return out;
}

}  // namespace otprune
