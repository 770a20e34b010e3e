// Copyright 2026 The STP Lab Authors
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

#include "stp/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "stp/analysis.hpp"
#include "stp/checkpoint.hpp"
#include "stp/models.hpp"
#include "stp/trainer.hpp"

namespace stp::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// Raised for bad arguments that CLI11 cannot see.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunOpts {
  std::string config;
  std::vector<std::string> sets;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  f << text;
}

TrainConfig resolve_config(const RunOpts& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  auto sets = o.sets;
  if (o.seed) sets.push_back("seed=" + std::to_string(*o.seed));
  return load_config(o.config, sets);
}

fs::path prepare_out(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

void write_network(const fs::path& dir, const std::string& stem, const CompGraph& graph,
                   const ParamStore& params) {
  write_file(dir / (stem + ".stpgraph"), to_model_spec(graph));
  write_params((dir / (stem + ".bin")).string(), params);
  write_file(dir / (stem + ".manifest.json"),
             params_manifest(graph, params, stem + ".bin", stem + ".stpgraph"));
}

Json summary_json(const std::string& mode, const TrainConfig& cfg, const RunResult& r) {
  Json j;
  j["mode"] = mode;
  j["seed"] = cfg.seed;
  j["final_arch"] = format_arch(r.final_arch);
  j["flops_ratio"] = r.flops_ratio;
  j["params_ratio"] = r.params_ratio;
  j["main_test_accuracy"] = r.main_accuracy;
  j["pruned_test_accuracy"] = r.pruned_accuracy;
  j["steps"] = r.log.size();
  if (!r.log.empty()) j["final_pool_size"] = r.log.back().pool_size;
  return j;
}

// Norm of the parameters outside the final arch's mask at every snapshot.
std::string dropped_norm_csv(const ArchSpace& space, const RunResult& r) {
  ParamStore dropped = chosen_indicator(space.graph(), space.mask(r.final_arch));
  for (Tensor* t : dropped.tensors())
    for (double& v : t->values()) v = 1.0 - v;
  std::ostringstream os;
  os << "t,dropped_norm\n";
  char buf[40];
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", masked_norm(r.snapshots[i], dropped));
    os << r.snapshot_steps[i] << ',' << buf << '\n';
  }
  return os.str();
}

int cmd_prune(const RunOpts& o, std::ostream& out) {
  const TrainConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(o.out);
  fs::create_directories(dir / "pool");
  RunHooks hooks;
  hooks.on_refine = [&](long long t, const Pool& pool) {
    write_file(dir / "pool" / ("pool_t" + std::to_string(t) + ".json"), pool.to_json());
  };
  const RunResult r = run_stp(cfg, hooks);
  const ArchSpace space = make_space(cfg);
  write_file(dir / "config.txt", format_config(cfg));
  write_file(dir / "log.csv", log_csv(r.log));
  write_file(dir / "final_arch.txt", format_arch(r.final_arch) + "\n");
  write_file(dir / "dropped_norm.csv", dropped_norm_csv(space, r));
  write_network(dir, "main", space.graph(), r.params);
  write_network(dir, "pruned", r.pruned.graph, r.pruned.params);
  const std::string summary = summary_json("prune", cfg, r).dump(2) + "\n";
  write_file(dir / "summary.json", summary);
  out << summary;
  return kOk;
}

int cmd_baseline(const RunOpts& o, bool suppressed, std::ostream& out) {
  const TrainConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(o.out);
  const RunResult r = suppressed ? run_suppressed_baseline(cfg) : run_standard(cfg);
  const ArchSpace space = make_space(cfg);
  write_file(dir / "config.txt", format_config(cfg));
  write_file(dir / "log.csv", log_csv(r.log));
  write_file(dir / "final_arch.txt", format_arch(r.final_arch) + "\n");
  write_file(dir / "dropped_norm.csv", dropped_norm_csv(space, r));
  write_network(dir, "main", space.graph(), r.params);
  write_network(dir, "pruned", r.pruned.graph, r.pruned.params);
  Json j = summary_json(suppressed ? "baseline-suppressed" : "baseline-standard", cfg, r);
  if (suppressed) j["lambda"] = cfg.lambda;
  const std::string summary = j.dump(2) + "\n";
  write_file(dir / "summary.json", summary);
  out << summary;
  return kOk;
}

Shape parse_shape(const std::string& s) {
  Shape out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto x = s.find('x', pos);
    const std::string part = s.substr(pos, x == std::string::npos ? std::string::npos : x - pos);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || p != part.data() + part.size() || v == 0) {
      throw UsageError("bad input shape '" + s + "' (expected e.g. 3x32x32)");
    }
    out.push_back(v);
    if (x == std::string::npos) break;
    pos = x + 1;
  }
  return out;
}

int cmd_estimate(const std::string& model, const std::string& arch_text,
                 const std::string& shape_text, std::ostream& out) {
  CompGraph graph = load_model(model);
  const Shape shape = shape_text.empty() ? graph.input_shape() : parse_shape(shape_text);
  const ArchSpace space(std::move(graph), WidthGrid(), shape);
  const ArchSpec arch = arch_text.empty() ? space.full() : parse_arch(arch_text);
  space.check(arch);
  const CostReport c = space.cost(arch);
  Json j;
  j["arch"] = format_arch(arch);
  j["flops"] = c.flops;
  j["params"] = c.params;
  j["flops_ratio"] = space.flops_ratio(arch);
  j["params_ratio"] = space.params_ratio(arch);
  j["full_flops"] = space.full_cost().flops;
  j["full_params"] = space.full_cost().params;
  out << j.dump() << "\n";
  return kOk;
}

int cmd_analyze(const RunOpts& o, long long lookup_steps, std::ostream& out) {
  const TrainConfig cfg = resolve_config(o);
  const fs::path dir = prepare_out(o.out);
  const ArchSpace space = make_space(cfg);
  const RunResult stp = run_stp(cfg);
  const RunResult base = run_standard(cfg, stp.final_arch);
  const MagnitudeProfile prof =
      magnitude_profile(space.graph(), stp.params, space.mask(stp.final_arch), base.params);
  write_file(dir / "magnitude.csv", magnitude_csv(prof));

  std::map<ArchSpec, double> table;
  if (lookup_steps > 0) {
    for (const auto& a : stp.initial_pool) table[a] = lookup_accuracy(cfg, a, lookup_steps);
  }
  auto mean_lookup = [&](const std::vector<ArchSpec>& archs) -> std::optional<double> {
    if (table.empty()) return std::nullopt;
    double s = 0;
    for (const auto& a : archs) s += table.at(a);
    return s / static_cast<double>(archs.size());
  };
  std::ostringstream traj;
  traj << "round,t,pool_size,pool_sse,mean_lookup_acc\n";
  auto row = [&](std::size_t round, long long t, const std::vector<ArchSpec>& archs) {
    char buf[80];
    std::snprintf(buf, sizeof buf, "%.17g", pool_sse(archs, space.graph()));
    traj << round << ',' << t << ',' << archs.size() << ',' << buf << ',';
    if (auto m = mean_lookup(archs)) {
      std::snprintf(buf, sizeof buf, "%.17g", *m);
      traj << buf;
    }
    traj << '\n';
  };
  row(0, 0, stp.initial_pool);
  for (std::size_t i = 0; i < stp.rounds.size(); ++i) {
    row(i + 1, stp.rounds[i].t, stp.rounds[i].remaining);
  }
  write_file(dir / "pool_trajectory.csv", traj.str());
  if (!table.empty()) {
    std::ostringstream lt;
    lt << "arch,accuracy\n";
    for (const auto& [a, acc] : table) lt << '"' << format_arch(a) << "\"," << acc << '\n';
    write_file(dir / "lookup_table.csv", lt.str());
  }
  Json j;
  j["final_arch"] = format_arch(stp.final_arch);
  j["initial_pool_sse"] = pool_sse(stp.initial_pool, space.graph());
  j["final_round_pool_sse"] =
      stp.rounds.empty() ? pool_sse(stp.initial_pool, space.graph())
                         : pool_sse(stp.rounds.back().remaining, space.graph());
  std::size_t front = 0, enhanced = 0;
  for (const auto& l : prof) {
    if (l.stage > 1 || l.chosen_count == 0 || l.unchosen_count == 0) continue;
    ++front;
    if (l.chosen_mean >= 1.2 * l.unchosen_mean) ++enhanced;
  }
  j["front_layers"] = front;
  j["front_layers_ratio_ge_1_2"] = enhanced;
  const std::string s = j.dump(2) + "\n";
  write_file(dir / "analysis.json", s);
  out << s;
  return kOk;
}

int cmd_pool_inspect(const std::string& pool_path, const std::string& model, std::ostream& out) {
  std::ifstream f(pool_path);
  if (!f) throw UsageError("cannot open pool file '" + pool_path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  const Pool pool = Pool::from_json(ss.str());
  const ArchSpace space(load_model(model));
  Json j;
  j["size"] = pool.size();
  j["N_p"] = pool.initial_size();
  j["N_shr"] = pool.n_shr();
  j["pool_sse"] = pool_sse(pool, space.graph());
  auto arr = Json::array();
  for (const auto& e : pool.entries()) {
    Json o;
    o["arch"] = format_arch(e.arch);
    if (e.score) o["score"] = *e.score;
    else o["score"] = nullptr;
    o["updates"] = e.updates;
    o["flops_ratio"] = space.flops_ratio(e.arch);
    o["params_ratio"] = space.params_ratio(e.arch);
    arr.push_back(std::move(o));
  }
  j["entries"] = std::move(arr);
  out << j.dump(2) << "\n";
  return kOk;
}

void error_json(std::ostream& err, const std::string& kind, const std::string& msg,
                const std::string& key = "") {
  Json j;
  j["error"] = kind;
  j["message"] = msg;
  if (!key.empty()) j["key"] = key;
  err << j.dump() << "\n";
}

void add_run_opts(CLI::App* sub, RunOpts& o) {
  sub->add_option("--config", o.config, "Config file (key = value)");
  sub->add_option("--set", o.sets, "Override KEY=VALUE (repeatable)")->take_all();
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--seed", o.seed, "Seed (overrides the config)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stimulative-training-guided structured pruning lab", "stp"};
  app.require_subcommand(1);
  RunOpts run_opts;
  auto* prune = app.add_subcommand("prune", "Run STP and extract the pruned network");
  add_run_opts(prune, run_opts);
  auto* sup = app.add_subcommand("baseline-suppressed", "L2-suppressed training of a fixed arch");
  add_run_opts(sup, run_opts);
  auto* std_ = app.add_subcommand("baseline-standard", "Plain cross-entropy training");
  add_run_opts(std_, run_opts);

  std::string model = "resnet50_cifar", arch, shape;
  auto* est = app.add_subcommand("estimate", "FLOPs and parameters of an arch");
  est->add_option("--model", model, "Builtin model name or stpgraph file");
  est->add_option("--arch", arch, "Nested-tuple arch (default: full)");
  est->add_option("--input-shape", shape, "Per-sample input shape, e.g. 3x32x32");

  long long lookup_steps = 0;
  auto* ana = app.add_subcommand("analyze", "Magnitude profile and pool trajectory");
  add_run_opts(ana, run_opts);
  ana->add_option("--lookup-steps", lookup_steps,
                  "Train every initial-pool arch for this many steps to build a look-up table");

  std::size_t trials = 100;
  std::uint64_t e_seed = 0;
  double tol = 1e-6;
  auto* ver = app.add_subcommand("verify-appendix-e", "Single-layer gradient and Taylor checks");
  ver->add_option("--trials", trials, "Random instances")->check(CLI::PositiveNumber);
  ver->add_option("--seed", e_seed, "Seed");
  ver->add_option("--tol", tol, "Max relative gradient error");

  std::string pool_path;
  auto* pin = app.add_subcommand("pool-inspect", "Summarise a pool checkpoint");
  pin->add_option("pool", pool_path, "Pool JSON")->required();
  pin->add_option("--model", model, "Builtin model name or stpgraph file");

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    error_json(err, "usage", e.what());
    return kUsage;
  }

  try {
    if (*prune) return cmd_prune(run_opts, out);
    if (*sup) return cmd_baseline(run_opts, true, out);
    if (*std_) return cmd_baseline(run_opts, false, out);
    if (*est) return cmd_estimate(model, arch, shape, out);
    if (*ana) return cmd_analyze(run_opts, lookup_steps, out);
    if (*pin) return cmd_pool_inspect(pool_path, model, out);
    if (*ver) {
      const SingleLayerReport rep = verify_appendix_e(trials, e_seed, tol);
      out << rep.to_json() << "\n";
      return rep.pass() ? kOk : kFailed;
    }
  } catch (const ConfigError& e) {
    error_json(err, "config", e.what(), e.key());
    return kUsage;
  } catch (const UsageError& e) {
    error_json(err, "usage", e.what());
    return kUsage;
  } catch (const ParseError& e) {
    error_json(err, "parse", e.what());
    return kUsage;
  } catch (const ValidationError& e) {
    error_json(err, "validation", e.what());
    return kUsage;
  } catch (const std::invalid_argument& e) {
    error_json(err, "parse", e.what());
    return kUsage;
  } catch (const ArchError& e) {
    error_json(err, "arch", e.what());
    return kUsage;
  } catch (const InfeasibleError& e) {
    error_json(err, "infeasible", e.what());
    return kUsage;
  } catch (const DataError& e) {
    error_json(err, "data", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    error_json(err, "runtime", e.what());
    return kFailed;
  }
  return kUsage;
}

}  // namespace stp::cli
