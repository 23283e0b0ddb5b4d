#include <doctest.h>

#include "mcdn/cli.hpp"
#include "mcdn/dataset.hpp"
#include "mcdn/metrics.hpp"
#include "oracles.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace mcdn;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// One generated dataset and trained model shared by the cases below.
struct Workspace {
  fs::path root = fs::temp_directory_path() / ("mcdn_test_cli_" + std::to_string(::getpid()));
  fs::path data = root / "data";
  fs::path config = root / "config.json";
  fs::path model = root / "model" / "mcdn.bin";
  Run train;

  Workspace() {
    fs::remove_all(root);
    fs::create_directories(root);
    const Run g = cli({"generate", "--count", "40", "--subjects", "20", "--closure-fraction", "0.5", "--seed", "7",
                       "--noise-sigma", "4", "--out", data.string()});
    REQUIRE(g.code == 0);
    spit(config, R"({
      "seed": 3,
      "train": {"iterationCount": 25, "batchSize": 8},
      "globalStream": {"inputSidePx": 32, "featureDim": 16, "convUnits": [[4, 3, 2], [8, 3, 2]]},
      "localStream": {"inputSidePx": 32, "featureDim": 16, "convUnits": [[4, 3, 2], [8, 3, 2]]}
    })");
    train = cli({"train", "--config", config.string(), "--data", data.string(), "--out", model.string()});
  }
  ~Workspace() { fs::remove_all(root); }
};

Workspace& workspace() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_SUITE("cli generate") {
  TEST_CASE("writes the requested images and a manifest") {
    const auto& w = workspace();
    std::size_t pgm = 0;
    for (const auto& e : fs::directory_iterator(w.data)) pgm += e.path().extension() == ".pgm";
    CHECK(pgm == 40);
    CHECK(fs::exists(w.data / "manifest.json"));
  }

  TEST_CASE("count 20, subjects 10 and a rerun gives the same manifest") {
    const fs::path a = workspace().root / "gen_a", b = workspace().root / "gen_b";
    const std::vector<std::string> common{"generate", "--count", "20", "--subjects", "10", "--closure-fraction", "0.5",
                                          "--seed", "7", "--out"};
    auto args = common;
    args.push_back(a.string());
    const Run r = cli(args);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("20 samples") != std::string::npos);
    args.back() = b.string();
    REQUIRE(cli(args).code == 0);
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    std::size_t pgm = 0;
    for (const auto& e : fs::directory_iterator(a)) pgm += e.path().extension() == ".pgm";
    CHECK(pgm == 20);
  }

  TEST_CASE("invalid arguments exit 2 with usage") {
    const auto dir = (workspace().root / "bad").string();
    const Run r = cli({"generate", "--count", "20", "--subjects", "10", "--closure-fraction", "1.5", "--seed", "7", "--out", dir});
    CHECK(r.code == 2);
    CHECK(r.err.find("--closure-fraction") != std::string::npos);
    CHECK(cli({"generate", "--count", "20", "--subjects", "10", "--closure-fraction", "0", "--seed", "7", "--out", dir}).code == 2);
    CHECK(cli({"generate", "--count", "21", "--subjects", "10", "--closure-fraction", "0.5", "--seed", "7", "--out", dir}).code == 2);
    CHECK(cli({"generate", "--count", "20"}).code == 2);
    CHECK(cli({"frobnicate"}).code == 2);
    CHECK(cli({}).code == 2);
  }
}

TEST_SUITE("cli train") {
  TEST_CASE("writes the model and one loss row per iteration") {
    const auto& w = workspace();
    INFO(w.train.err);
    REQUIRE(w.train.code == 0);
    CHECK(fs::exists(w.model));
    const auto trace = lines(slurp(w.model.parent_path() / "loss_trace.csv"));
    REQUIRE(trace.size() == 26);
    CHECK(trace[0] == "iteration,loss");
    CHECK(trace[1].rfind("1,", 0) == 0);
    CHECK(trace[25].rfind("25,", 0) == 0);
    CHECK(w.train.out.find("final train loss") != std::string::npos);
  }

  TEST_CASE("a second run gives identical model bytes") {
    const auto& w = workspace();
    const fs::path again = w.root / "again" / "mcdn.bin";
    REQUIRE(cli({"train", "--config", w.config.string(), "--data", w.data.string(), "--out", again.string()}).code == 0);
    CHECK(slurp(again) == slurp(w.model));
    CHECK(slurp(again.parent_path() / "loss_trace.csv") == slurp(w.model.parent_path() / "loss_trace.csv"));
  }

  TEST_CASE("a missing or malformed config exits 1") {
    const auto& w = workspace();
    const auto out = (w.root / "x" / "m.bin").string();
    const Run missing = cli({"train", "--config", (w.root / "missing.json").string(), "--data", w.data.string(), "--out", out});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("missing.json") != std::string::npos);
    spit(w.root / "bad.json", R"({"train": {"iterations": 5}})");
    const Run bad = cli({"train", "--config", (w.root / "bad.json").string(), "--data", w.data.string(), "--out", out});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("iterations") != std::string::npos);
  }
}

TEST_SUITE("cli eval") {
  TEST_CASE("writes five method rows and self-consistent ROC files") {
    const auto& w = workspace();
    REQUIRE(w.train.code == 0);
    const fs::path out = w.root / "eval";
    const Run r = cli({"eval", "--model", w.model.string(), "--data", w.data.string(), "--out", out.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto rows = lines(slurp(out / "results.csv"));
    REQUIRE(rows.size() == 6);
    CHECK(rows[0] == "method,auc,bacc,sen,spe");
    const std::string fused = rows[5];
    CHECK(fused.rfind("Our MCDN,", 0) == 0);
    const double reported = std::stod(fused.substr(fused.find(',') + 1));

    // Recompute the trapezoid from the emitted curve.
    const auto roc = lines(slurp(out / roc_filename("Our MCDN")));
    REQUIRE(roc.size() >= 3);
    double area = 0.0, pf = 0.0, pt = 0.0;
    for (std::size_t i = 1; i < roc.size(); ++i) {
      std::istringstream ls(roc[i]);
      std::string f, t;
      std::getline(ls, f, ',');
      std::getline(ls, t, ',');
      const double fpr = std::stod(f), tpr = std::stod(t);
      if (i > 1) area += (fpr - pf) * (tpr + pt) / 2.0;
      pf = fpr;
      pt = tpr;
    }
    CHECK(area == doctest::Approx(reported).epsilon(1e-12));
    for (const auto& name : {"Global Image", "Local Region", "Clinical Parameter", "Our MCDN w/o CP"})
      CHECK(fs::exists(out / roc_filename(name)));
    CHECK(r.out.find("Clinical Parameter") != std::string::npos);
  }

  TEST_CASE("a missing model exits 1 naming the path") {
    const auto& w = workspace();
    const auto missing = (w.root / "nope.bin").string();
    const Run r = cli({"eval", "--model", missing, "--data", w.data.string(), "--out", (w.root / "e2").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find(missing) != std::string::npos);
  }

  TEST_CASE("a corrupted model exits 1") {
    const auto& w = workspace();
    const fs::path broken = w.root / "broken.bin";
    spit(broken, "MCDX" + slurp(w.model).substr(4));
    const Run r = cli({"eval", "--model", broken.string(), "--data", w.data.string(), "--out", (w.root / "e3").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("MCDN") != std::string::npos);
  }
}

TEST_SUITE("cli screen") {
  TEST_CASE("prints one JSON line with probabilities in range and dumps the patch") {
    const auto& w = workspace();
    REQUIRE(w.train.code == 0);
    const auto ds = load_dataset(w.data);
    const fs::path patch = w.root / "patch.pgm";
    const Run r = cli({"screen", "--model", w.model.string(), "--image", (w.data / ds.manifest.records[0].imagePath).string(),
                       "--dump-patch", patch.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    REQUIRE(lines(r.out).size() == 1);
    const auto j = nlohmann::json::parse(r.out);
    for (const char* key : {"pFused", "pDeep", "pClinical"}) {
      CHECK(j.at(key).get<double>() >= 0.0);
      CHECK(j.at(key).get<double>() <= 1.0);
    }
    CHECK(j.at("degraded") == false);
    CHECK(j.at("clinicalParams").size() == 5);
    CHECK(j.contains("acaX"));
    CHECK(j.contains("acaY"));
    const Image p = read_pgm(patch);
    CHECK(p.rows() == 120);
    CHECK(p.cols() == 120);
  }

  TEST_CASE("a blank image is reported as degraded") {
    const auto& w = workspace();
    REQUIRE(w.train.code == 0);
    const fs::path blank = w.root / "blank.pgm";
    write_pgm(blank, Image::Constant(200, 400, 40));
    const Run r = cli({"screen", "--model", w.model.string(), "--image", blank.string()});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("degraded") == true);
    CHECK(j.at("pClinical").is_null());
    CHECK(j.at("pFused") == j.at("pDeep"));
  }

  TEST_CASE("an undecodable image exits 1") {
    const auto& w = workspace();
    const fs::path junk = w.root / "junk.pgm";
    spit(junk, "P2\n1 1\n255\n0");
    CHECK(cli({"screen", "--model", w.model.string(), "--image", junk.string()}).code == 1);
  }
}

TEST_SUITE("cli gradcheck") {
  TEST_CASE("default tiny config passes and lists each parameter once") {
    const Run r = cli({"gradcheck"});
    INFO(r.out << r.err);
    CHECK(r.code == 0);
    std::vector<std::string> names;
    for (const auto& l : lines(r.out))
      if (l.rfind("worst", 0) != 0) names.push_back(l.substr(0, l.find(' ')));
    // 2 streams x 2 units x 4 tensors + 2 projections x 2 + head x 2
    CHECK(names.size() == 22);
    std::sort(names.begin(), names.end());
    CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
    CHECK(std::find(names.begin(), names.end(), "global/unit0/weights") != names.end());
    CHECK(std::find(names.begin(), names.end(), "head/bias") != names.end());
  }

  TEST_CASE("a corrupted backward fails naming the parameter") {
    const fs::path cfg = workspace().root / "gc.json";
    spit(cfg, R"({"corruptParameter": "local/unit1/weights"})");
    const Run r = cli({"gradcheck", "--config", cfg.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("local/unit1/weights") != std::string::npos);
  }
}
