#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "bidro_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args) {
  const std::string cmd = std::string(BIDRO_CLI) + " " + args + " >" +
                          (work_dir() / "stdout.txt").string() + " 2>" +
                          (work_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string path(const char* name) { return (work_dir() / name).string(); }

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("end-to-end on the two-node fixture") {
  REQUIRE(run("gen-instance --topology Tiny2 --out " + path("t2.json")) == 0);
  CHECK(run("solve --instance " + path("t2.json") + " --eps 0.1 --n-samples 20 --report " +
            path("traj.csv") + " --plan " + path("dro.json")) == 0);
  const auto out = nlohmann::json::parse(slurp(path("stdout.txt")));
  CHECK(out.contains("objective"));
  CHECK(slurp(path("traj.csv")).rfind("iter,upper,lower,primal_res,dual_res,lambda,mu_norm,tau,ms\n", 0) == 0);

  for (const char* kind : {"det", "sp", "ro"}) {
    CAPTURE(kind);
    CHECK(run(std::string("baseline --kind ") + kind + " --instance " + path("t2.json") + " --out " +
              path("base.json")) == 0);
  }
  CHECK(run("eval --plan " + path("dro.json") + " --instance " + path("t2.json") + " --eval-n 200 --shift 0.2") == 0);
  const auto ev = nlohmann::json::parse(slurp(path("stdout.txt")));
  for (const char* key : {"out_sample_mean_cost", "out_sample_p95_cost", "worst_case_cost",
                          "service_level_pct", "robustness_metric"}) {
    CHECK(ev.contains(key));
  }
}

TEST_CASE("experiment subcommand writes results and plots") {
  write(path("matrix.json"),
        R"({"format":"bidro-matrix-v1","topology":"Tiny2","seeds":[1],"eps":[0.1],"n_samples":10})");
  REQUIRE(run("experiment --matrix " + path("matrix.json") + " --out-dir " + path("res")) == 0);
  CHECK(slurp(path("res/results.csv")).rfind("run_id,method,eps,N,seed,bias,size,status", 0) == 0);
  CHECK(fs::exists(path("res/costs_vs_eps.svg")));
  CHECK(run("experiment --matrix " + path("missing.json") + " --out-dir " + path("res")) == 2);
  write(path("bad_matrix.json"), R"({"format":"bidro-matrix-v1","colour":"red"})");
  CHECK(run("experiment --matrix " + path("bad_matrix.json")) == 2);
}

TEST_CASE("validation errors exit with 2") {
  REQUIRE(run("gen-instance --topology Tiny2 --out " + path("t2.json")) == 0);
  auto inst = nlohmann::json::parse(slurp(path("t2.json")));
  inst["colour"] = 1;
  write(path("extra.json"), inst.dump());
  CHECK(run("solve --instance " + path("extra.json")) == 2);
  CHECK(run("solve --instance " + path("t2.json") + " --metric cosine") == 2);
  CHECK(run("solve --instance " + path("t2.json") + " --eps -1") == 2);
  CHECK(run("solve --no-such-flag") == 2);
  CHECK(run("gen-instance --topology Grid --out " + path("g.json")) == 2);
  CHECK(run("baseline --kind mip --instance " + path("t2.json")) == 2);
}

TEST_CASE("solver failures exit with 3") {
  // Valid but enormous costs overflow inside the solve.
  auto inst = nlohmann::json::parse(slurp(path("t2.json")));
  inst["p"] = {1e308, 1e308};
  inst["c"] = {1e307, 1e307};
  write(path("huge.json"), inst.dump());
  CHECK(run("solve --instance " + path("huge.json") + " --n-samples 5") == 3);
  CHECK(slurp(path("stderr.txt")).find("solver failure") != std::string::npos);
}
