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

#include "stp/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "stp/models.hpp"

namespace stp {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_num(const std::string& key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key, "config key '" + key + "': cannot parse '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, std::string_view v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError(key, "config key '" + key + "': expected 0/1/true/false");
}

using Setter = std::function<void(TrainConfig&, const std::string&, std::string_view)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = {
      {"model", [](TrainConfig& c, auto&, auto v) { c.model = v; }},
      {"T_total", [](TrainConfig& c, auto& k, auto v) { c.T_total = parse_num<long long>(k, v); }},
      {"k", [](TrainConfig& c, auto& k, auto v) { c.k = parse_num<long long>(k, v); }},
      {"T_shr", [](TrainConfig& c, auto& k, auto v) { c.T_shr = parse_num<long long>(k, v); }},
      {"N_p", [](TrainConfig& c, auto& k, auto v) { c.N_p = parse_num<std::size_t>(k, v); }},
      {"r", [](TrainConfig& c, auto& k, auto v) { c.r = parse_num<double>(k, v); }},
      {"eps", [](TrainConfig& c, auto& k, auto v) { c.eps = parse_num<double>(k, v); }},
      {"alpha", [](TrainConfig& c, auto& k, auto v) { c.alpha = parse_num<double>(k, v); }},
      {"beta1", [](TrainConfig& c, auto& k, auto v) { c.beta1 = parse_num<double>(k, v); }},
      {"beta2", [](TrainConfig& c, auto& k, auto v) { c.beta2 = parse_num<double>(k, v); }},
      {"n_support", [](TrainConfig& c, auto& k, auto v) { c.n_support = parse_num<std::size_t>(k, v); }},
      {"literal_ema", [](TrainConfig& c, auto& k, auto v) { c.literal_ema = parse_bool(k, v); }},
      {"width_grid",
       [](TrainConfig& c, auto& k, auto v) {
         c.width_grid.clear();
         while (true) {
           const auto comma = v.find(',');
           c.width_grid.push_back(parse_num<double>(k, trim(v.substr(0, comma))));
           if (comma == std::string_view::npos) break;
           v.remove_prefix(comma + 1);
         }
       }},
      {"lr0", [](TrainConfig& c, auto& k, auto v) { c.sgd.lr0 = parse_num<double>(k, v); }},
      {"momentum", [](TrainConfig& c, auto& k, auto v) { c.sgd.momentum = parse_num<double>(k, v); }},
      {"weight_decay",
       [](TrainConfig& c, auto& k, auto v) { c.sgd.weight_decay = parse_num<double>(k, v); }},
      {"grad_clip", [](TrainConfig& c, auto& k, auto v) { c.grad_clip = parse_num<double>(k, v); }},
      {"init_gain", [](TrainConfig& c, auto& k, auto v) { c.init_gain = parse_num<double>(k, v); }},
      {"batch_size", [](TrainConfig& c, auto& k, auto v) { c.batch_size = parse_num<std::size_t>(k, v); }},
      {"seed", [](TrainConfig& c, auto& k, auto v) { c.seed = parse_num<std::uint64_t>(k, v); }},
      {"dataset", [](TrainConfig& c, auto&, auto v) { c.dataset = v; }},
      {"classes", [](TrainConfig& c, auto& k, auto v) { c.classes = parse_num<std::size_t>(k, v); }},
      {"samples", [](TrainConfig& c, auto& k, auto v) { c.samples = parse_num<std::size_t>(k, v); }},
      {"spread", [](TrainConfig& c, auto& k, auto v) { c.spread = parse_num<double>(k, v); }},
      {"data_seed", [](TrainConfig& c, auto& k, auto v) { c.data_seed = parse_num<std::uint64_t>(k, v); }},
      {"train_csv", [](TrainConfig& c, auto&, auto v) { c.train_csv = v; }},
      {"test_csv", [](TrainConfig& c, auto&, auto v) { c.test_csv = v; }},
      {"lambda", [](TrainConfig& c, auto& k, auto v) { c.lambda = parse_num<double>(k, v); }},
      {"arch", [](TrainConfig& c, auto&, auto v) { c.arch = v; }},
      {"snapshots", [](TrainConfig& c, auto& k, auto v) { c.snapshots = parse_bool(k, v); }},
  };
  return m;
}

const char* const kRequired[] = {"model", "T_total", "k", "T_shr", "N_p", "r"};

void apply(TrainConfig& cfg, std::set<std::string>& seen, std::string_view line,
           const std::string& where) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("", where + ": expected 'key = value', got '" + std::string(line) + "'");
  }
  const std::string key(trim(line.substr(0, eq)));
  const auto value = trim(line.substr(eq + 1));
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(key, where + ": unknown config key '" + key + "'");
  it->second(cfg, key, value);
  seen.insert(key);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ParamStore zero_grads(const ParamStore& params) {
  ParamStore g = params;
  for (Tensor* t : g.tensors()) t->fill(0.0);
  return g;
}

enum class Mode { kStp, kStandard, kSuppressed };

RunResult run(const TrainConfig& cfg, Mode mode, std::optional<ArchSpec> fixed,
              const RunHooks& hooks) {
  validate_config(cfg);
  const ArchSpace space = make_space(cfg);
  const CompGraph& graph = space.graph();
  Rng master(cfg.seed);
  Rng init_rng = master.fork();
  const std::uint64_t batch_seed = master.next();
  Rng pool_rng = master.fork();
  Rng step_rng = master.fork();

  RunResult res;
  res.params = init_params(graph, init_rng, cfg.init_gain);
  const auto [train, test] = load_data(cfg, graph);
  Sgd opt(cfg.sgd);
  BatchStream stream(train.size(), cfg.batch_size, batch_seed);

  std::optional<Pool> pool;
  ArchSpec arch;
  if (mode == Mode::kStp) {
    PoolSchedule sched{cfg.k, cfg.T_shr, cfg.alpha, cfg.literal_ema};
    pool = init_pool(cfg.N_p, space, cfg.r, cfg.eps, pool_rng, sched);
    for (const auto& e : pool->entries()) res.initial_pool.push_back(e.arch);
  } else if (fixed) {
    space.check(*fixed);
    arch = *fixed;
  } else if (!cfg.arch.empty()) {
    arch = parse_arch(cfg.arch);
    space.check(arch);
  } else {
    arch = space.sample(cfg.r, cfg.eps, pool_rng);
  }
  ParamStore dropped;
  if (mode == Mode::kSuppressed) {
    dropped = chosen_indicator(graph, space.mask(arch));
    for (Tensor* t : dropped.tensors())
      for (double& v : t->values()) v = 1.0 - v;
  }

  if (cfg.snapshots) {
    res.snapshots.push_back(res.params);
    res.snapshot_steps.push_back(0);
  }
  const auto per_epoch = static_cast<long long>(stream.batches_per_epoch());
  for (long long t = 1; t <= cfg.T_total; ++t) {
    const auto rows = stream.next();
    const Batch batch = gather(train, rows);
    std::vector<Removal> removed;
    StepContext ctx{space, cfg, res.params, opt, step_rng};
    if (pool) ctx.pool = &*pool;
    if (mode == Mode::kSuppressed) {
      ctx.dropped = &dropped;
      ctx.lambda = cfg.lambda;
    }
    ctx.removed = &removed;
    const std::size_t before = pool ? pool->size() : 0;
    res.log.push_back(train_step(ctx, batch, t));
    if (pool && pool->is_shrink_step(t)) {
      res.rounds.push_back({t, removed, {}});
      for (const auto& e : pool->entries()) res.rounds.back().remaining.push_back(e.arch);
    }
    if (pool && hooks.on_refine && (t % cfg.k == 0 || pool->size() != before)) {
      hooks.on_refine(t, *pool);
    }
    if (cfg.snapshots && (t % per_epoch == 0 || t == cfg.T_total)) {
      res.snapshots.push_back(res.params);
      res.snapshot_steps.push_back(t);
    }
  }
  if (pool) {
    if (pool->size() != 1) throw std::logic_error("pool did not shrink to one entry");
    arch = pool->entries().front().arch;
  }
  res.final_arch = arch;
  res.pruned = extract_pruned(space, res.params, arch);
  res.main_accuracy = accuracy(graph, res.params, test);
  res.pruned_accuracy = accuracy(res.pruned.graph, res.pruned.params, test);
  res.flops_ratio = space.flops_ratio(arch);
  res.params_ratio = space.params_ratio(arch);
  return res;
}

}  // namespace

TrainConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  TrainConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v(line);
    if (auto h = v.find('#'); h != std::string_view::npos) v = v.substr(0, h);
    v = trim(v);
    if (v.empty()) continue;
    apply(cfg, seen, v, "line " + std::to_string(line_no));
  }
  for (const auto& o : overrides) apply(cfg, seen, trim(o), "--set " + o);
  for (const char* key : kRequired) {
    if (!seen.count(key)) throw ConfigError(key, "missing required config key '" + std::string(key) + "'");
  }
  validate_config(cfg);
  return cfg;
}

TrainConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

void validate_config(const TrainConfig& c) {
  auto bad = [](const std::string& key, const std::string& why) {
    return ConfigError(key, "config key '" + key + "': " + why);
  };
  if (c.model.empty()) throw bad("model", "must name a builtin model or a file");
  if (c.T_total < 1) throw bad("T_total", "must be >= 1");
  if (c.k < 1) throw bad("k", "must be >= 1");
  if (c.T_shr < 1 || c.T_shr > c.T_total) throw bad("T_shr", "must be in [1, T_total]");
  if (c.N_p < 1) throw bad("N_p", "must be >= 1");
  if (!(c.r > 0.0 && c.r <= 1.0)) throw bad("r", "must be in (0, 1]");
  if (!(c.eps > 0.0)) throw bad("eps", "must be > 0");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw bad("alpha", "must be in (0, 1)");
  if (!(c.beta1 >= 0.0)) throw bad("beta1", "must be >= 0");
  if (!(c.beta2 >= 0.0)) throw bad("beta2", "must be >= 0");
  if (c.n_support < 1) throw bad("n_support", "must be >= 1");
  if (!(c.sgd.lr0 >= 0.0)) throw bad("lr0", "must be >= 0");
  if (!(c.sgd.weight_decay >= 0.0)) throw bad("weight_decay", "must be >= 0");
  if (!(c.init_gain > 0.0)) throw bad("init_gain", "must be > 0");
  if (!(c.grad_clip >= 0.0)) throw bad("grad_clip", "must be >= 0");
  if (c.batch_size < 1) throw bad("batch_size", "must be >= 1");
  if (!(c.lambda >= 0.0)) throw bad("lambda", "must be >= 0");
  if (c.dataset != "clusters" && c.dataset != "csv") throw bad("dataset", "must be clusters or csv");
  if (c.dataset == "csv" && (c.train_csv.empty() || c.test_csv.empty())) {
    throw bad(c.train_csv.empty() ? "train_csv" : "test_csv", "required when dataset = csv");
  }
  try {
    WidthGrid g(c.width_grid);
  } catch (const ArchError& e) {
    throw bad("width_grid", e.what());
  }
}

std::string format_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "model = " << c.model << "\nT_total = " << c.T_total << "\nk = " << c.k
     << "\nT_shr = " << c.T_shr << "\nN_p = " << c.N_p << "\nr = " << fmt17(c.r)
     << "\neps = " << fmt17(c.eps) << "\nalpha = " << fmt17(c.alpha)
     << "\nbeta1 = " << fmt17(c.beta1) << "\nbeta2 = " << fmt17(c.beta2)
     << "\nn_support = " << c.n_support << "\nliteral_ema = " << (c.literal_ema ? 1 : 0)
     << "\nwidth_grid = ";
  for (std::size_t i = 0; i < c.width_grid.size(); ++i) os << (i ? "," : "") << fmt17(c.width_grid[i]);
  os << "\nlr0 = " << fmt17(c.sgd.lr0) << "\nmomentum = " << fmt17(c.sgd.momentum)
     << "\nweight_decay = " << fmt17(c.sgd.weight_decay)
     << "\ninit_gain = " << fmt17(c.init_gain) << "\ngrad_clip = " << fmt17(c.grad_clip) << "\nbatch_size = " << c.batch_size
     << "\nseed = " << c.seed << "\ndataset = " << c.dataset << "\nclasses = " << c.classes
     << "\nsamples = " << c.samples << "\nspread = " << fmt17(c.spread)
     << "\ndata_seed = " << c.data_seed << "\n";
  if (!c.train_csv.empty()) os << "train_csv = " << c.train_csv << "\n";
  if (!c.test_csv.empty()) os << "test_csv = " << c.test_csv << "\n";
  os << "lambda = " << fmt17(c.lambda) << "\n";
  if (!c.arch.empty()) os << "arch = " << c.arch << "\n";
  os << "snapshots = " << (c.snapshots ? 1 : 0) << "\n";
  return os.str();
}

StepRecord train_step(StepContext& ctx, const Batch& batch, long long t) {
  const TrainConfig& cfg = ctx.cfg;
  const CompGraph& graph = ctx.space.graph();
  if (t < 1 || t > cfg.T_total) throw std::out_of_range("train_step: t outside [1, T_total]");
  StepRecord rec;
  rec.t = t;
  rec.lr = cosine_lr(t - 1, cfg.T_total, cfg.sgd.lr0);

  ad::Tape tape;
  const BoundParams bound = bind_params(tape, ctx.params);
  const ad::Var x = tape.constant(batch.x);
  const ad::Var z_main = interpret(tape, graph, bound, x, StructMask::full(graph));
  const ad::Var l_ce = ad::cross_entropy(tape, z_main, batch.y);
  rec.l_ce = tape.value(l_ce)[0];

  std::vector<ad::Var> terms = {l_ce};
  std::vector<double> coefs = {1.0};
  if (ctx.pool) {
    const ad::Var teacher = tape.detach(z_main);
    const std::size_t idx = sample_from_pool(*ctx.pool, ctx.rng);
    const ArchSpec target = ctx.pool->entries()[idx].arch;
    rec.arch = format_arch(target);
    const ad::Var z_s = interpret(tape, graph, bound, x, ctx.space.mask(target));
    const ad::Var l_sts = ad::normalized_kl(tape, teacher, z_s);
    rec.l_sts = tape.value(l_sts)[0];
    if (!std::isfinite(rec.l_sts)) throw TrainError("non-finite L_STS at step " + std::to_string(t), rec);
    update_score(*ctx.pool, idx, rec.l_sts);
    std::vector<ad::Var> sme;
    for (std::size_t j = 0; j < cfg.n_support; ++j) {
      const ArchSpec support = ctx.space.mutate_expand(target, ctx.rng);
      const ad::Var z_sup = interpret(tape, graph, bound, x, ctx.space.mask(support));
      sme.push_back(ad::normalized_kl(tape, teacher, z_sup));
    }
    const std::vector<double> mean(sme.size(), 1.0 / static_cast<double>(sme.size()));
    const ad::Var l_sme = ad::weighted_sum(tape, sme, mean);
    rec.l_sme = tape.value(l_sme)[0];
    terms.push_back(l_sts);
    coefs.push_back(cfg.beta1);
    terms.push_back(l_sme);
    coefs.push_back(cfg.beta2);
  }
  const ad::Var total = ad::weighted_sum(tape, terms, coefs);
  rec.l_total = tape.value(total)[0];
  tape.backward(total);

  ParamStore grads = zero_grads(ctx.params);
  collect_grads(tape, bound, grads);
  if (ctx.dropped) {
    // (lambda / 2) ||theta_d||^2 contributes lambda * theta_d.
    auto ps = ctx.params.tensors();
    auto gs = grads.tensors();
    auto ds = ctx.dropped->tensors();
    double sq = 0.0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      for (std::size_t j = 0; j < ps[i]->numel(); ++j) {
        const double d = (*ds[i])[j] * (*ps[i])[j];
        sq += d * d;
        (*gs[i])[j] += ctx.lambda * d;
      }
    }
    rec.l_total += 0.5 * ctx.lambda * sq;
  }
  if (!std::isfinite(rec.l_total)) throw TrainError("non-finite loss at step " + std::to_string(t), rec);
  auto ps = ctx.params.tensors();
  clip_grad_norm(grads.tensors(), ctx.cfg.grad_clip);
  std::vector<const Tensor*> gs;
  for (Tensor* g : grads.tensors()) gs.push_back(g);
  ctx.opt.step(ps, gs, rec.lr);

  if (ctx.pool) {
    if (ctx.pool->is_shrink_step(t)) {
      const bool final_round = ctx.pool->is_final_shrink_step(t);
      auto removed = shrink(*ctx.pool, static_cast<std::size_t>(ctx.pool->n_shr()), ctx.rng,
                            final_round);
      if (ctx.removed) *ctx.removed = std::move(removed);
    }
    rec.pool_size = ctx.pool->size();
  }
  return rec;
}

std::pair<Dataset, Dataset> load_data(const TrainConfig& cfg, const CompGraph& graph) {
  if (cfg.dataset == "csv") {
    Dataset train = load_csv(cfg.train_csv, graph.input_shape(), cfg.classes);
    Dataset test = load_csv(cfg.test_csv, graph.input_shape(), cfg.classes);
    train.split = "train";
    test.split = "test";
    return {std::move(train), std::move(test)};
  }
  return gen_gaussian_clusters(cfg.classes, cfg.samples, graph.input_shape(), cfg.spread,
                               cfg.data_seed);
}

ArchSpace make_space(const TrainConfig& cfg) {
  return ArchSpace(load_model(cfg.model), WidthGrid(cfg.width_grid));
}

RunResult run_stp(const TrainConfig& cfg, const RunHooks& hooks) {
  return run(cfg, Mode::kStp, std::nullopt, hooks);
}

RunResult run_standard(const TrainConfig& cfg, std::optional<ArchSpec> arch) {
  return run(cfg, Mode::kStandard, std::move(arch), {});
}

RunResult run_suppressed_baseline(const TrainConfig& cfg, std::optional<ArchSpec> arch) {
  return run(cfg, Mode::kSuppressed, std::move(arch), {});
}

double lookup_accuracy(const TrainConfig& cfg, const ArchSpec& arch, long long steps) {
  validate_config(cfg);
  if (steps < 1) throw std::invalid_argument("lookup_accuracy: steps must be >= 1");
  const ArchSpace space = make_space(cfg);
  const PrunedNet shape = extract_pruned(space, ParamStore(space.graph()), arch);
  const CompGraph& graph = shape.graph;
  Rng master(cfg.seed);
  Rng init_rng = master.fork();
  const std::uint64_t batch_seed = master.next();
  ParamStore params = init_params(graph, init_rng, cfg.init_gain);
  const auto [train, test] = load_data(cfg, space.graph());
  Sgd opt(cfg.sgd);
  BatchStream stream(train.size(), cfg.batch_size, batch_seed);
  const StructMask full = StructMask::full(graph);
  for (long long t = 1; t <= steps; ++t) {
    const auto rows = stream.next();
    const Batch batch = gather(train, rows);
    ad::Tape tape;
    const BoundParams bound = bind_params(tape, params);
    const ad::Var z = interpret(tape, graph, bound, tape.constant(batch.x), full);
    const ad::Var loss = ad::cross_entropy(tape, z, batch.y);
    if (!std::isfinite(tape.value(loss)[0])) {
      throw std::runtime_error("lookup_accuracy: non-finite loss for " + format_arch(arch));
    }
    tape.backward(loss);
    ParamStore grads = zero_grads(params);
    collect_grads(tape, bound, grads);
    auto ps = params.tensors();
    clip_grad_norm(grads.tensors(), cfg.grad_clip);
    std::vector<const Tensor*> gs;
    for (Tensor* g : grads.tensors()) gs.push_back(g);
    opt.step(ps, gs, cosine_lr(t - 1, steps, cfg.sgd.lr0));
  }
  return accuracy(graph, params, test);
}

double accuracy(const CompGraph& graph, const ParamStore& params, const Dataset& data,
                const StructMask* mask, std::size_t batch) {
  const StructMask full = StructMask::full(graph);
  std::size_t correct = 0;
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += batch) {
    rows.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch); ++i) rows.push_back(i);
    const Batch b = gather(data, rows);
    const Tensor z = interpret(graph, params, b.x, mask ? *mask : full);
    const std::size_t K = z.dim(1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < K; ++c)
        if (z[i * K + c] > z[i * K + best]) best = c;
      if (static_cast<int>(best) == b.y[i]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double masked_norm(const ParamStore& params, const ParamStore& indicator) {
  auto ps = params.tensors();
  auto is = indicator.tensors();
  if (ps.size() != is.size()) throw ShapeError("masked_norm: layouts differ");
  double sq = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i]->shape() != is[i]->shape()) throw ShapeError("masked_norm: layouts differ");
    for (std::size_t j = 0; j < ps[i]->numel(); ++j) {
      const double d = (*ps[i])[j] * (*is[i])[j];
      sq += d * d;
    }
  }
  return std::sqrt(sq);
}

std::string log_csv(const std::vector<StepRecord>& log) {
  std::ostringstream os;
  os << "t,lr,L_CE,L_STS,L_SME,L_total,pool_size,sampled_arch\n";
  for (const auto& r : log) {
    os << r.t << ',' << fmt17(r.lr) << ',' << fmt17(r.l_ce) << ',' << fmt17(r.l_sts) << ','
       << fmt17(r.l_sme) << ',' << fmt17(r.l_total) << ',' << r.pool_size << ",\"" << r.arch
       << "\"\n";
  }
  return os.str();
}

}  // namespace stp
