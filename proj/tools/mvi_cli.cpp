// mvi: experiment runner.
//
//   mvi generate     --config probit.ini --out data/
//   mvi compare      --config two_moon.ini --seed-list 0,1,2 --out runs/
//   mvi theory-check --out report/
//
// Exit codes: 0 success, 1 usage or config error, 2 numeric failure,
// 3 theory-check failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvi/checkpoint.hpp"
#include "mvi/config.hpp"
#include "mvi/dataset_io.hpp"
#include "mvi/error.hpp"
#include "mvi/experiments.hpp"
#include "mvi/format.hpp"
#include "mvi/theory.hpp"

namespace fs = std::filesystem;
using namespace mvi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitTheory = 3;

struct Args {
  std::string config;
  std::string seed_list;
  std::string out;
  std::vector<std::string> overrides;
  std::string method;
};

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') out += c;
    else if (c == '/' || c == ',') out += '_';
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ParseError("--seed-list: '" + item + "' is not a seed");
    }
  }
  if (seeds.empty()) throw ParseError("--seed-list: empty");
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  return seeds;
}

struct Context {
  Config cfg;
  std::string experiment;
  std::vector<std::uint64_t> seeds;
  fs::path out;
};

// Loads the config file (if any) and applies --set, --seed-list and --out.
Context open_context(const Args& a, bool need_config, const std::string& default_experiment = "") {
  Context c;
  if (!a.config.empty()) c.cfg = Config::load(a.config);
  else if (need_config) throw ParseError("--config is required");
  for (const std::string& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("--set expects key=value, got '" + kv + "'");
    c.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!a.seed_list.empty()) c.cfg.set("seeds", a.seed_list);
  if (!a.out.empty()) c.cfg.set("output.dir", a.out);
  c.experiment = c.cfg.get_string("experiment", default_experiment);
  c.seeds = parse_seeds(join(c.cfg.get_list("seeds", {"0", "1", "2"})));
  c.out = c.cfg.get_string("output.dir", "out");
  return c;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write " + p.string());
  os << text;
  if (!os) throw Error("write failed: " + p.string());
}

// Records every emitted data file with its hash.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> files;

  void add(const fs::path& root, const fs::path& file) {
    files.emplace_back(fs::relative(file, root).generic_string(), file_hash(file.string()));
  }
  void write(const fs::path& root, const std::vector<std::uint64_t>& seeds,
             const std::string& experiment) const {
    std::ostringstream os;
    os << "experiment " << experiment << "\nseeds";
    for (std::uint64_t s : seeds) os << ' ' << s;
    os << '\n';
    for (const auto& [f, h] : files) os << h << "  " << f << '\n';
    write_text(root / "manifest.txt", os.str());
    std::cout << os.str();
  }
};

void finish_config(Context& c) {
  c.cfg.reject_unused();
  fs::create_directories(c.out);
  write_text(c.out / "config.ini", c.cfg.effective());
}

// Settings for every sweep value of an experiment, one list per seed.
struct Plan {
  std::vector<std::vector<Setting>> per_seed;
  bool dynamics = false;
};

Plan plan_experiment(Context& c, bool recover_command) {
  Plan p;
  const std::string& e = c.experiment;
  if (e == "probit") {
    ProbitOptions o = probit_options(c.cfg);
    finish_config(c);
    for (std::uint64_t s : c.seeds) {
      std::vector<Setting> v;
      for (std::size_t d : o.dims) v.push_back(probit_setting(o, d, s));
      p.per_seed.push_back(std::move(v));
    }
  } else if (e == "two-moon") {
    TwoMoonOptions o = two_moon_options(c.cfg);
    finish_config(c);
    for (std::uint64_t s : c.seeds) {
      std::vector<Setting> v;
      for (std::size_t h : o.hidden) v.push_back(two_moon_setting(o, h, s));
      p.per_seed.push_back(std::move(v));
    }
  } else if (e == "gcn-recover") {
    const bool explicit_dynamics = c.cfg.has("output.dynamics");
    RecoverOptions o = recover_options(c.cfg);
    if (recover_command && !explicit_dynamics)
      o.dynamics = o.layers == 2 && o.out_channels == 1;
    finish_config(c);
    p.dynamics = o.dynamics;
    for (std::uint64_t s : c.seeds) {
      std::vector<Setting> v;
      for (const std::string& g : o.graphs) {
        if (g != "known" && g != "perturbed")
          throw ParseError("graph.variants: unknown variant '" + g + "'");
        for (std::size_t h : o.hidden) v.push_back(recover_setting(o, h, g == "perturbed", s));
      }
      p.per_seed.push_back(std::move(v));
    }
  } else if (e == "panel") {
    PanelOptions o = panel_options(c.cfg);
    finish_config(c);
    const Panel panel = panel_data(o);
    for (std::uint64_t s : c.seeds) {
      std::vector<Setting> v;
      for (std::size_t h : o.hidden) v.push_back(panel_setting(o, panel, h, s));
      p.per_seed.push_back(std::move(v));
    }
  } else {
    throw ParseError(c.cfg.source() + ": key 'experiment': expected probit, two-moon, gcn-recover or panel, got '" + e + "'");
  }
  return p;
}

struct Job {
  const Setting* setting;
  Method method;
  std::uint64_t seed;
};

std::vector<RunResult> run_jobs(const Plan& plan, const std::vector<std::uint64_t>& seeds,
                                const std::vector<Method>& methods) {
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < seeds.size(); ++k)
    for (const Setting& s : plan.per_seed[k])
      for (Method m : methods) jobs.push_back({&s, m, seeds[k]});
  std::vector<RunResult> runs(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::vector<char> numeric(jobs.size(), 0);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(jobs.size()); ++i) {
    const Job& j = jobs[static_cast<std::size_t>(i)];
    try {
      runs[static_cast<std::size_t>(i)] = run_setting(*j.setting, j.method, j.seed);
    } catch (const NumericError& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
      numeric[static_cast<std::size_t>(i)] = 1;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (errors[i].empty()) continue;
    const std::string where = jobs[i].setting->name + " " + to_string(jobs[i].method) +
                              " seed " + std::to_string(jobs[i].seed) + ": ";
    if (numeric[i]) throw NumericError(where + errors[i]);
    throw Error(where + errors[i]);
  }
  // Stable report order: by setting (plan order), then method, then seed.
  std::vector<std::size_t> order(runs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t per_seed = plan.per_seed.empty() ? 0 : plan.per_seed[0].size() * methods.size();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const std::size_t ia = a % per_seed, ib = b % per_seed;
    if (ia != ib) return ia < ib;
    return jobs[a].seed < jobs[b].seed;
  });
  std::vector<RunResult> sorted;
  for (std::size_t i : order) sorted.push_back(std::move(runs[i]));
  return sorted;
}

void emit_runs(const Context& c, const std::vector<RunResult>& runs, bool dynamics,
               bool checkpoints, Manifest& m) {
  for (const RunResult& r : runs) {
    const std::string stem = slug(r.setting) + "_" + to_string(r.method) + "_seed" +
                             std::to_string(r.seed);
    std::ostringstream os;
    write_history_csv(os, r.history);
    const fs::path hist = c.out / ("history_" + stem + ".csv");
    write_text(hist, os.str());
    m.add(c.out, hist);
    if (checkpoints) {
      std::ostringstream cp;
      write_checkpoint(cp, r.final_net);
      const fs::path model = c.out / ("model_" + stem + ".txt");
      write_text(model, cp.str());
      m.add(c.out, model);
    }
  }
  std::ostringstream summary;
  write_summary_csv(summary, summarize(runs));
  write_text(c.out / "summary.csv", summary.str());
  m.add(c.out, c.out / "summary.csv");

  if (dynamics) {
    std::ostringstream dyn;
    dyn << "setting,method,seed,snapshot,neuron,signed_norm,out_weight\n";
    for (const RunResult& r : runs) {
      std::ostringstream one;
      write_dynamics_csv(one, r.history, false);
      std::istringstream lines(one.str());
      std::string line;
      while (std::getline(lines, line))
        dyn << r.setting << ',' << to_string(r.method) << ',' << r.seed << ',' << line << '\n';
    }
    write_text(c.out / "dynamics.csv", dyn.str());
    m.add(c.out, c.out / "dynamics.csv");
    std::ostringstream disp;
    disp << "setting,method,seed,displacement\n";
    for (const RunResult& r : runs)
      disp << r.setting << ',' << to_string(r.method) << ',' << r.seed << ','
           << format_real(total_displacement(r.history)) << '\n';
    write_text(c.out / "displacement.csv", disp.str());
    m.add(c.out, c.out / "displacement.csv");
  }
}

void print_table(const std::vector<RunResult>& runs) {
  for (const RunResult& r : runs) {
    const MetricReport& t = r.history.points.back().test;
    std::cout << r.setting << ' ' << to_string(r.method) << " seed " << r.seed;
    for (const char* k : {"mse", "model_linf", "param_l2_rel", "class_error"})
      if (t.has(k)) std::cout << ' ' << k << '=' << format_real(t.get(k));
    std::cout << '\n';
  }
}

int cmd_generate(const Args& a) {
  Context c = open_context(a, true);
  Plan plan = plan_experiment(c, false);
  Manifest m;
  for (std::size_t k = 0; k < c.seeds.size(); ++k) {
    std::vector<std::string> seen;
    for (const Setting& s : plan.per_seed[k]) {
      // Sweeps over model width share one dataset per seed.
      const std::string key = c.experiment == "probit" ? s.name : std::string("data");
      if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
      seen.push_back(key);
      const fs::path dir = c.out / slug(key) / ("seed" + std::to_string(c.seeds[k]));
      const std::vector<std::pair<std::string, std::string>> meta{
          {"experiment", c.experiment}, {"seed", std::to_string(c.seeds[k])}};
      for (const auto& [part, data] : {std::pair{"train", &s.train}, std::pair{"test", &s.test}}) {
        save_dataset((dir / part).string(), *data, meta);
        for (const auto& f : fs::directory_iterator(dir / part)) m.add(c.out, f.path());
      }
      if (s.student.graph() && !(s.train.graph && *s.train.graph == *s.student.graph())) {
        const fs::path g = dir / "student_graph.txt";
        save_edge_list(g.string(), *s.student.graph());
        m.add(c.out, g);
      }
    }
  }
  std::sort(m.files.begin(), m.files.end());
  m.write(c.out, c.seeds, c.experiment);
  return kExitOk;
}

// train runs one method; compare, recover and panel run compare.methods.
int cmd_runs(const Args& a, bool single_method, const std::string& required, bool checkpoints) {
  Context c = open_context(a, true, required);
  if (!required.empty() && c.experiment != required)
    throw ParseError(c.cfg.source() + ": key 'experiment': expected " + required + ", got '" +
                     c.experiment + "'");
  std::vector<Method> methods;
  if (single_method) {
    if (!a.method.empty()) c.cfg.set("train.method", a.method);
    methods.push_back(parse_method(c.cfg.get_string("train.method", "svi")));
  } else {
    for (const std::string& name : c.cfg.get_list("compare.methods", {"svi", "sgd"})) {
      const Method m = parse_method(name);
      if (std::find(methods.begin(), methods.end(), m) == methods.end()) methods.push_back(m);
    }
  }
  Plan plan = plan_experiment(c, required == "gcn-recover");
  std::vector<RunResult> runs = run_jobs(plan, c.seeds, methods);
  Manifest m;
  emit_runs(c, runs, plan.dynamics, checkpoints, m);
  print_table(runs);
  m.write(c.out, c.seeds, c.experiment);
  return kExitOk;
}

int cmd_theory(const Args& a) {
  Context c = open_context(a, false, "theory-check");
  if (c.experiment != "theory-check")
    throw ParseError(c.cfg.source() + ": key 'experiment': theory-check expected, got '" +
                     c.experiment + "'");
  TheoryOptions o;
  o.seed = c.cfg.get_u64("theory.seed", c.seeds.front());
  o.rates = c.cfg.get_bool("theory.rates", true);
  finish_config(c);
  std::vector<CheckResult> checks = run_theory_checks(o);
  std::ostringstream os;
  write_check_report(os, checks);
  write_text(c.out / "theory_report.csv", os.str());
  bool ok = true;
  for (const CheckResult& r : checks) {
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << " measured=" << format_real(r.measured)
              << " bounds=[" << format_real(r.lower) << ", " << format_real(r.upper) << "]\n";
    ok = ok && r.pass;
  }
  return ok ? kExitOk : kExitTheory;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational-inequality training engine for (graph) neural networks"};
  app.require_subcommand(1);
  Args args;
  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", args.config, "experiment config file");
    if (config_required) opt->required();
    sub->add_option("--seed-list", args.seed_list, "comma-separated seeds (overrides 'seeds')");
    sub->add_option("--out", args.out, "output directory (overrides 'output.dir')");
    sub->add_option("--set", args.overrides, "config override section.key=value")
        ->allow_extra_args(false);
  };
  CLI::App* gen = app.add_subcommand("generate", "write datasets and a hash manifest");
  CLI::App* train = app.add_subcommand("train", "train one method over the seed list");
  CLI::App* compare = app.add_subcommand("compare", "SVI vs SGD with shared data, init and batches");
  CLI::App* recover = app.add_subcommand("recover", "GCN teacher-student recovery sweep");
  CLI::App* panel = app.add_subcommand("panel", "panel (lagged node labels) experiment");
  CLI::App* theory = app.add_subcommand("theory-check", "run the invariant battery");
  for (CLI::App* s : {gen, train, compare, recover, panel}) add_common(s, true);
  add_common(theory, false);
  train->add_option("--method", args.method, "svi, sgd or oe (overrides train.method)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(args);
    if (train->parsed()) return cmd_runs(args, true, "", true);
    if (compare->parsed()) return cmd_runs(args, false, "", false);
    if (recover->parsed()) return cmd_runs(args, false, "gcn-recover", false);
    if (panel->parsed()) return cmd_runs(args, false, "panel", false);
    if (theory->parsed()) return cmd_theory(args);
  } catch (const NumericError& e) {
    std::cerr << "mvi: numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "mvi: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
