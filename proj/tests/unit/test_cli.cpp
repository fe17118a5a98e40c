#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "mvi/dataset_io.hpp"
#include "mvi/experiments.hpp"

namespace fs = std::filesystem;
using namespace mvi;

namespace {

struct Run {
  int code = -1;
  std::string output;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MVI_CLI_PATH + "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t got = 0;
  while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string config(const std::string& name) { return std::string(MVI_CONFIG_DIR) + "/" + name; }

fs::path fresh(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("mvi_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Every regular file under dir except config.ini, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "config.ini")
      out[fs::relative(e.path(), dir).string()] = read_file(e.path());
  return out;
}

const std::string tiny_moons =
    " --seed-list 0,1 --set data.n_train=40 --set data.n_test=40 --set train.epochs=3"
    " --set train.batch_size=10 --set model.hidden=8";
const std::string tiny_recover =
    " --seed-list 0 --set data.n_train=50 --set data.n_test=50 --set train.epochs=2"
    " --set train.batch_size=25";

}  // namespace

TEST_CASE("usage and config errors exit with 1") {
  CHECK(cli("").code == 1);
  CHECK(cli("frobnicate").code == 1);
  CHECK(cli("train --out " + fresh("u").string()).code == 1);
  const Run unknown = cli("generate --config \"" + config("probit.ini") + "\" --set data.bogus=1 --out " +
                          fresh("u").string());
  CHECK(unknown.code == 1);
  CHECK(unknown.output.find("data.bogus") != std::string::npos);
  const Run bad = cli("train --config \"" + config("probit.ini") + "\" --set train.epochs=abc --out " +
                      fresh("u").string());
  CHECK(bad.code == 1);
  CHECK(bad.output.find("train.epochs") != std::string::npos);
  CHECK(cli("train --config /nonexistent.ini --out " + fresh("u").string()).code == 1);
}

TEST_CASE("numeric failures exit with 2") {
  const Run r = cli("train --config \"" + config("two_moon.ini") + "\"" + tiny_moons +
                    " --set train.lr=1e200 --out " + fresh("n").string());
  CHECK(r.code == 2);
  CHECK(r.output.find("diverged") != std::string::npos);
}

TEST_CASE("generate writes the probit split and is reproducible") {
  const fs::path a = fresh("gen_a"), b = fresh("gen_b");
  const std::string args = "generate --config \"" + config("probit.ini") + "\" --seed-list 0 --out ";
  const Run ra = cli(args + a.string());
  REQUIRE(ra.code == 0);
  REQUIRE(cli(args + b.string()).code == 0);
  const Dataset train = load_dataset((a / "dim50" / "seed0" / "train").string());
  const Dataset test = load_dataset((a / "dim50" / "seed0" / "test").string());
  CHECK(train.count() + test.count() == 2500);
  CHECK(train.x.cols() == 50);
  CHECK(read_file(a / "manifest.txt") == read_file(b / "manifest.txt"));
  CHECK(ra.output.find(file_hash((a / "dim50" / "seed0" / "train" / "features.bin").string())) !=
        std::string::npos);
}

TEST_CASE("compare is deterministic and reruns from its echoed config") {
  const fs::path a = fresh("cmp_a"), b = fresh("cmp_b"), c = fresh("cmp_c");
  const std::string args = "compare --config \"" + config("two_moon.ini") + "\"" + tiny_moons;
  REQUIRE(cli(args + " --out " + a.string()).code == 0);
  REQUIRE(cli(args + " --out " + b.string()).code == 0);
  CHECK(tree(a) == tree(b));
  REQUIRE(cli("compare --config \"" + (a / "config.ini").string() + "\" --out " + c.string()).code == 0);
  CHECK(tree(a) == tree(c));

  const std::string summary = read_file(a / "summary.csv");
  CHECK(summary.rfind("setting,method,metric,split,mean,stderr\n", 0) == 0);
  CHECK(summary.find("hidden=8,svi,mse,test,") != std::string::npos);
  CHECK(summary.find("hidden=8,sgd,mse,test,") != std::string::npos);
  for (const char* f : {"history_hidden8_svi_seed0.csv", "history_hidden8_sgd_seed1.csv"})
    CHECK(fs::exists(a / f));
}

TEST_CASE("recover sweeps widths and an unperturbed estimate matches the known graph") {
  const fs::path a = fresh("rec");
  REQUIRE(cli("recover --config \"" + config("gcn_recover.ini") + "\"" + tiny_recover +
              " --set graph.perturb=0 --out " + a.string())
              .code == 0);
  std::set<std::string> groups;
  std::istringstream is(read_file(a / "summary.csv"));
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) groups.insert(line.substr(0, line.find(',')));
  CHECK(groups.size() == 10);
  for (const char* h : {"2", "4", "8", "16", "32"})
    for (const char* m : {"svi", "sgd"}) {
      const std::string tail = std::string("hidden") + h + "_" + m + "_seed0.csv";
      CHECK(read_file(a / ("history_known_" + tail)) == read_file(a / ("history_perturbed_" + tail)));
    }
  CHECK(fs::exists(a / "dynamics.csv"));
}

TEST_CASE("the teacher has zero model-recovery error") {
  RecoverOptions o;
  o.n_train = 20;
  o.n_test = 20;
  const Setting s = recover_setting(o, 2, false, 0);
  const Network teacher = recover_teacher(o);
  EvalSets eval;
  eval.metrics = s.metrics;
  const MetricReport r = evaluate(teacher, s.test, eval);
  CHECK(r.get("model_l2") == 0.0);
  CHECK(r.get("model_linf") == 0.0);
}

TEST_CASE("panel runs on the synthetic panel and rejects a too-long lag") {
  const fs::path a = fresh("panel");
  const std::string base = "panel --config \"" + config("panel.ini") +
                           "\" --seed-list 0 --set synthetic.steps=60 --set model.hidden=8"
                           " --set train.epochs=2";
  REQUIRE(cli(base + " --out " + a.string()).code == 0);
  std::istringstream is(read_file(a / "summary.csv"));
  std::string line;
  std::size_t rows = 0;
  std::getline(is, line);
  while (std::getline(is, line)) {
    ++rows;
    if (line.find(",weighted_f1,") != std::string::npos) {
      std::stringstream ss(line);
      std::string cell;
      for (int k = 0; k < 5; ++k) std::getline(ss, cell, ',');
      const double mean = std::stod(cell);
      CHECK(mean >= 0.0);
      CHECK(mean <= 1.0);
    }
  }
  CHECK(rows > 0);
  const Run too_long = cli(base + " --set data.lag=59 --out " + fresh("panel_b").string());
  CHECK(too_long.code != 0);
  CHECK(too_long.output.find("lag") != std::string::npos);
}

TEST_CASE("theory-check reports every check and passes") {
  const fs::path a = fresh("theory");
  const Run r = cli("theory-check --set theory.rates=false --out " + a.string());
  CHECK(r.code == 0);
  const std::string report = read_file(a / "theory_report.csv");
  CHECK(report.rfind("check,measured,lower,upper,pass,detail\n", 0) == 0);
  CHECK(report.find("FAIL") == std::string::npos);
  std::istringstream is(report);
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("softmax_kappa,", 0) == 0) CHECK(line.rfind("softmax_kappa,0,", 0) == 0);
  }
}
