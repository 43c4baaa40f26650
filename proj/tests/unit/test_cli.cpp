#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "../support/oracles.hpp"
#include "marginfilter/cli.hpp"
#include "marginfilter/io.hpp"

using namespace marginfilter;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const fs::path& path) { return path.string(); }

void make_toys(const fs::path& dir) {
  REQUIRE(run({"generate-toy", "--n", "600", "--lag", "3", "--seed", "11", "-o", p(dir / "train.csv")}).code == 0);
  REQUIRE(run({"generate-toy", "--n", "600", "--lag", "3", "--seed", "12", "--lag-seed", "11", "-o",
               p(dir / "val.csv")})
              .code == 0);
  REQUIRE(run({"generate-toy", "--n", "1000", "--lag", "3", "--seed", "13", "--lag-seed", "11", "-o",
               p(dir / "test.csv")})
              .code == 0);
}

}  // namespace

TEST_CASE("generate, train, predict and decode") {
  const fs::path dir = oracle::scratch_dir("cli_pipeline");
  make_toys(dir);
  const io::Dataset test = io::load_dataset(dir / "test.csv");
  REQUIRE(test.y.has_value());
  CHECK(test.x.rows() == 1000);
  CHECK(test.x.cols() == 2);

  const Run tr = run({"train", "--train", p(dir / "train.csv"), "--validation", p(dir / "val.csv"), "--method",
                      "kf-svm", "--C", "100", "--lambda", "10", "--max-cg-iters", "30", "-o", p(dir / "model")});
  REQUIRE(tr.code == 0);
  for (const char* name : {"model.json", "filter.json", "transitions.json", "history.csv"})
    CHECK(fs::exists(dir / "model" / name));
  const FilterBank filter = io::load_filter(dir / "model" / "filter.json");
  CHECK(filter.length() == 11);
  CHECK(filter.n0 == 6);

  const Run pr = run({"predict", "--model", p(dir / "model" / "model.json"), "--data", p(dir / "test.csv"), "-o",
                      p(dir / "online.csv"), "--probabilities", p(dir / "probs.csv")});
  REQUIRE(pr.code == 0);
  CHECK(pr.out.find("error_rate") != std::string::npos);
  const LabelSequence online = io::load_labels(dir / "online.csv");
  CHECK(online.size() == 1000);
  CHECK(error_rate(online, *test.y) < 0.25);

  const io::Dataset probs = io::parse_dataset(io::read_file(dir / "probs.csv"));
  REQUIRE(probs.x.cols() == 2);
  for (std::size_t i = 0; i < probs.x.rows(); ++i) CHECK(probs.x(i, 0) + probs.x(i, 1) == doctest::Approx(1.0));

  REQUIRE(run({"decode", "--model", p(dir / "model" / "model.json"), "--data", p(dir / "test.csv"), "--mode",
               "viterbi", "-o", p(dir / "viterbi.csv")})
              .code == 0);
  REQUIRE(run({"decode", "--model", p(dir / "model" / "model.json"), "--data", p(dir / "test.csv"), "--mode",
               "online", "-o", p(dir / "online2.csv")})
              .code == 0);
  CHECK(io::read_file(dir / "online2.csv") == io::read_file(dir / "online.csv"));

  // The saved model reproduces the in-memory decision.
  const SequenceLabeler l = io::load_labeler(dir / "model" / "model.json");
  CHECK(io::load_labels(dir / "viterbi.csv") == predict(l, test.x, DecodeMode::viterbi));
  fs::remove_all(dir);
}

TEST_CASE("a one-tap average filter is the plain SVM") {
  const fs::path dir = oracle::scratch_dir("cli_avg");
  make_toys(dir);
  for (const char* m : {"svm", "avg-svm"}) {
    REQUIRE(run({"train", "--train", p(dir / "train.csv"), "--method", m, "--f", "1", "--n0", "0", "-o",
                 p(dir / m)})
                .code == 0);
    REQUIRE(run({"predict", "--model", p(dir / m / "model.json"), "--data", p(dir / "test.csv"), "-o",
                 p(dir / (std::string(m) + ".csv"))})
                .code == 0);
  }
  CHECK(io::read_file(dir / "svm.csv") == io::read_file(dir / "avg-svm.csv"));
  fs::remove_all(dir);
}

TEST_CASE("reruns are byte-identical and inputs are untouched") {
  const fs::path dir = oracle::scratch_dir("cli_rerun");
  make_toys(dir);
  const std::string train_before = io::read_file(dir / "train.csv");
  const std::vector<std::string> args{"train", "--train", p(dir / "train.csv"), "--method", "skf-svm",
                                      "--f", "5", "--n0", "2", "--C", "100", "--lambda", "10",
                                      "--max-cg-iters", "10", "--mm-max-outer", "3", "-o"};
  auto with_out = [&](const std::string& out) {
    auto a = args;
    a.push_back(out);
    return a;
  };
  REQUIRE(run(with_out(p(dir / "a"))).code == 0);
  REQUIRE(run(with_out(p(dir / "b"))).code == 0);
  for (const char* name : {"model.json", "filter.json", "transitions.json", "history.csv"})
    CHECK(io::read_file(dir / "a" / name) == io::read_file(dir / "b" / name));
  CHECK(io::read_file(dir / "train.csv") == train_before);

  const std::string model_before = io::read_file(dir / "a" / "model.json");
  REQUIRE(run({"decode", "--model", p(dir / "a" / "model.json"), "--data", p(dir / "train.csv"), "--mode", "viterbi",
               "-o", p(dir / "y.csv")})
              .code == 0);
  CHECK(io::read_file(dir / "a" / "model.json") == model_before);
  CHECK(io::read_file(dir / "train.csv") == train_before);
  fs::remove_all(dir);
}

TEST_CASE("grid search writes the selected model and the grid") {
  const fs::path dir = oracle::scratch_dir("cli_grid");
  make_toys(dir);
  const Run r = run({"grid-search", "--train", p(dir / "train.csv"), "--validation", p(dir / "val.csv"), "--method",
                     "avg-svm", "--C", "0.001,100", "--f", "5", "--n0", "2", "-o", p(dir / "g")});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("C=100") != std::string::npos);
  CHECK(fs::exists(dir / "g" / "model.json"));
  const std::string grid = io::read_file(dir / "g" / "grid.csv");
  CHECK(grid.rfind("C,lambda,sigma_k,f,n0,validation_error,status\n", 0) == 0);
  CHECK(std::count(grid.begin(), grid.end(), '\n') == 3);
  fs::remove_all(dir);
}

TEST_CASE("sweep and compare") {
  const fs::path dir = oracle::scratch_dir("cli_sweep");
  const std::vector<std::string> common{"sweep", "--axis", "lag", "--values", "2", "--seeds", "5", "--seed", "1",
                                        "--n-train", "400", "--n-validation", "300", "--n-test", "500",
                                        "--max-cg-iters", "5"};
  auto a = common;
  a.insert(a.end(), {"--methods", "svm", "-o", p(dir / "a.csv"), "--summary", p(dir / "a_summary.csv")});
  auto b = common;
  b.insert(b.end(), {"--methods", "avg-svm", "-o", p(dir / "b.csv")});
  const Run ra = run(a);
  REQUIRE(ra.code == 0);
  CHECK(ra.out.rfind("axis_value,method,decode,mean_error,seeds\n", 0) == 0);
  REQUIRE(run(b).code == 0);
  CHECK(io::load_sweep(dir / "a.csv").size() == 10);
  CHECK(io::read_file(dir / "a_summary.csv") == ra.out);

  const Run c = run({"compare", p(dir / "a.csv"), p(dir / "b.csv"), "--decode", "online"});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("pairs 5") != std::string::npos);
  CHECK(c.out.find("p_value") != std::string::npos);

  const Run same = run({"compare", p(dir / "a.csv"), p(dir / "a.csv"), "--decode", "online"});
  REQUIRE(same.code == 0);
  CHECK(same.out.find("p_value 1\n") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("usage errors exit nonzero") {
  const fs::path dir = oracle::scratch_dir("cli_usage");
  CHECK(run({}).code != 0);
  const Run unknown = run({"frobnicate"});
  CHECK(unknown.code != 0);
  CHECK_FALSE((unknown.out + unknown.err).empty());
  CHECK(run({"generate-toy", "--bogus", "1", "-o", p(dir / "x.csv")}).code != 0);
  CHECK(run({"generate-toy"}).code != 0);
  CHECK(run({"train", "--train", p(dir / "missing.csv"), "-o", p(dir / "m")}).code != 0);
  CHECK_FALSE(fs::exists(dir / "m"));

  REQUIRE(run({"generate-toy", "--n", "200", "-o", p(dir / "t.csv")}).code == 0);
  CHECK(run({"train", "--train", p(dir / "t.csv"), "--method", "nope", "-o", p(dir / "m")}).code == 2);
  CHECK(run({"train", "--train", p(dir / "t.csv"), "--f", "3", "--n0", "5", "-o", p(dir / "m")}).code == 2);
  io::write_file_atomic(dir / "bad.csv", "t,ch1,ch2\n0,1\n");
  const Run bad = run({"train", "--train", p(dir / "bad.csv"), "-o", p(dir / "m")});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bad.csv:2") != std::string::npos);
  fs::remove_all(dir);
}
