// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include "mcdn/cli.hpp"
#include "mcdn/layers.hpp"
#include "mcdn/pipeline.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

using namespace mcdn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome table_arithmetic() {
  // published B-Acc, Sen, Spe
  const struct {
    const char* name;
    double bacc, sen, spe;
  } rows[] = {
      {"Clinical Parameter", 0.8198, 0.7914, 0.8483}, {"Visual Feature", 0.8688, 0.8503, 0.8872},
      {"Multi-Column", 0.8802, 0.8821, 0.8783},       {"Global Image", 0.8286, 0.7846, 0.8726},
      {"Local Region", 0.8790, 0.8526, 0.9055},       {"Global + Clinical", 0.8508, 0.8322, 0.8694},
      {"Local + Clinical", 0.8657, 0.8322, 0.8992},   {"Global + Local", 0.8786, 0.8617, 0.8955},
      {"Our MCDN", 0.8926, 0.8889, 0.8963},
  };
  double worst = 0.0;
  for (const auto& r : rows) worst = std::max(worst, std::abs(sen_spe_bacc(r.sen, r.spe).bacc - r.bacc));
  return {worst <= 5e-4, "9 rows, max |diff| " + fmt("%.2e", worst) + " (tol 5e-4)"};
}

Outcome gradient_integrity() {
  std::ostringstream out, err;
  const int code = run_cli({"gradcheck"}, out, err);
  std::string worst = "?";
  const std::string text = out.str();
  if (const auto at = text.find("worst relative error "); at != std::string::npos)
    worst = text.substr(at + 21, text.find(' ', at + 21) - at - 21);
  return {code == 0, "2 conv units, 16x16, worst " + worst + " (tol 1e-4)" + (code ? ": " + err.str() : "")};
}

Outcome conv_oracle() {
  oracle::Gen gen(2024);
  double worst = 0.0;
  int shapes = 0;
  while (shapes < 200) {
    const long n = gen.integer(1, 2), c = gen.integer(1, 3), h = gen.integer(1, 8), w = gen.integer(1, 8);
    const long k = gen.integer(1, 5), pad = gen.integer(0, k / 2), stride = gen.integer(1, 2), oc = gen.integer(1, 4);
    if (h + 2 * pad < k || w + 2 * pad < k) continue;
    ++shapes;
    TensorD x({n, c, h, w}), wt({oc, c, k, k}), b({oc});
    for (auto* t : {&x, &wt, &b})
      for (Index i = 0; i < t->size(); ++i) (*t)[i] = gen.normal();
    long oh = 0, ow = 0;
    const auto expect = oracle::direct_conv(std::vector<double>(x.data(), x.data() + x.size()), n, c, h, w,
                                            std::vector<double>(wt.data(), wt.data() + wt.size()), oc, k,
                                            std::vector<double>(b.data(), b.data() + b.size()), stride, pad, oh, ow);
    const TensorD y = conv2d(x, wt, b, stride, pad, ConvAlgorithm::Im2col);
    if (y.size() != static_cast<Index>(expect.size())) return {false, "output size mismatch"};
    for (Index i = 0; i < y.size(); ++i) worst = std::max(worst, oracle::relative_error(y[i], expect[static_cast<std::size_t>(i)]));
  }
  return {worst <= 1e-6, "200 shapes <= (2,3,8,8), max rel err " + fmt("%.2e", worst) + " (tol 1e-6)"};
}

Outcome overfit() {
  const auto ds = generate_dataset(16, 8, 0.5, 11);
  std::vector<LabeledSample> samples;
  for (const auto& s : ds.samples) {
    LabeledSample l;
    l.image = s.image;
    l.aca = locate_aca(s.image);
    l.label = static_cast<int>(s.label);
    l.subjectId = s.subjectId;
    samples.push_back(std::move(l));
  }
  TrainConfig cfg;
  cfg.iterationCount = 500;
  const auto r = train_mcdn(make_mcdn<float>(StreamConfig{}, StreamConfig{}, StreamLayout::Both, 1), samples, cfg);
  const double last = r.lossTrace.back();
  return {last < 0.01, "16 noise-free phantoms, 500 iterations, final loss " + fmt("%.2e", last) + " (< 0.01)"};
}

Outcome desk_scale() {
  SpecRanges ranges;
  ranges.noiseSigma = 8.0;
  auto ds = generate_dataset(400, 200, 0.3, 42, ranges);
  split_by_subject(ds.manifest, 0.5, 42);
  PipelineConfig pc;
  pc.train.rngSeed = 42;
  const unsigned threads = thread_budget();
  const auto trained = train_pipeline(prepare_split(ds, Split::Train, threads), pc);
  const auto rows = evaluate_variants(score_variants(trained.bundle, prepare_split(ds, Split::Test, threads), threads));
  std::map<std::string, double> auc_of;
  for (const auto& r : rows) auc_of[r.method] = r.auc;
  const double fused = auc_of.at("Our MCDN");
  bool pass = fused >= 0.95;
  std::string detail = "Our MCDN AUC " + fmt("%.4f", fused) + " (>= 0.95)";
  for (const char* other : {"Global Image", "Local Region", "Clinical Parameter", "Our MCDN w/o CP"}) {
    pass = pass && fused >= auc_of.at(other) - 0.02;
    detail += std::string(", ") + other + " " + fmt("%.4f", auc_of.at(other));
  }
  return {pass, detail};
}

Outcome auc_oracle() {
  oracle::Gen gen(7);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const long n = gen.integer(2, 100), levels = gen.integer(1, 30);
    std::vector<double> scores;
    std::vector<int> labels;
    for (long i = 0; i < n; ++i) {
      scores.push_back(static_cast<double>(gen.integer(0, levels)) / static_cast<double>(levels));
      labels.push_back(static_cast<int>(gen.integer(0, 1)));
    }
    labels[0] = 1;
    labels[1] = 0;
    worst = std::max(worst, std::abs(auc(roc_curve(scores, labels)) - oracle::mann_whitney(scores, labels)));
  }
  return {worst <= 1e-12, "1000 sets <= 100 scores, max |diff| " + fmt("%.1e", worst) + " (tol 1e-12)"};
}

Outcome augmentation_identities() {
  oracle::Gen gen(5);
  std::vector<LabeledSample> samples(10);
  bool identity = true, flip = true;
  for (auto& s : samples) {
    s.image.resize(200, 400);
    for (Index i = 0; i < s.image.size(); ++i) s.image.data()[i] = static_cast<std::uint8_t>(gen.integer(0, 255));
    s.aca.x = 200;
    s.aca.y = 100;
    identity = identity && intensity_rescale(s.image, 1.0) == s.image;
    flip = flip && flip_horizontal(flip_horizontal(s.image)) == s.image;
  }
  const std::size_t expanded = expand_training_set(samples, AugmentConfig{}).size();
  return {identity && flip && expanded == 270, std::string("k=1 identity ") + (identity ? "yes" : "no") +
                                                   ", double flip identity " + (flip ? "yes" : "no") + ", 10 -> " +
                                                   std::to_string(expanded) + " (270)"};
}

Outcome split_invariant() {
  oracle::Gen gen(3);
  int violations = 0, unbalanced = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    DatasetManifest m;
    const long subjects = gen.integer(2, 60);
    for (long i = 0; i < subjects; ++i)
      for (int side = 0; side < 2; ++side) {
        ManifestRecord r;
        r.subjectId = "S" + std::to_string(i);
        r.imagePath = r.subjectId + "_" + std::to_string(side);
        m.records.push_back(r);
      }
    split_by_subject(m, 0.5, seed);
    std::map<std::string, std::set<Split>> seen;
    for (const auto& r : m.records) seen[r.subjectId].insert(r.split);
    long train = 0;
    for (const auto& [id, s] : seen) {
      violations += s.size() != 1;
      train += s.count(Split::Train);
    }
    unbalanced += std::abs(train - (subjects - train)) > 1;
  }
  return {violations == 0 && unbalanced == 0, "100 seeds, " + std::to_string(violations) + " spanning subjects, " +
                                                  std::to_string(unbalanced) + " unbalanced splits"};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("mcdn_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  fs::create_directories(root);
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return run_cli(args, sink, sink); };
  const auto data = (root / "data").string();
  {
    std::ofstream(root / "config.json") << "{\"seed\": 5}";
  }
  bool ok = run({"generate", "--count", "40", "--subjects", "20", "--closure-fraction", "0.3", "--seed", "5",
                 "--noise-sigma", "8", "--out", data}) == 0;
  ok = ok && run({"train", "--config", (root / "config.json").string(), "--data", data, "--out", (root / "a/model.bin").string()}) == 0;
  ok = ok && run({"train", "--config", (root / "config.json").string(), "--data", data, "--out", (root / "b/model.bin").string()}) == 0;
  const bool model = ok && slurp(root / "a/model.bin") == slurp(root / "b/model.bin");
  const bool trace = ok && slurp(root / "a/loss_trace.csv") == slurp(root / "b/loss_trace.csv");
  fs::remove_all(root);
  if (!ok) return {false, "command failed: " + sink.str()};
  return {model && trace, std::string("two train runs: model bytes ") + (model ? "identical" : "differ") +
                              ", loss traces " + (trace ? "identical" : "differ")};
}

Outcome localization() {
  oracle::Gen gen(17);
  auto spec = [&](double sigma) {
    PhantomSpec s;
    s.irisAngleDeg = gen.coin() ? gen.uniform(15.0, 45.0) : gen.uniform(3.0, 11.0);
    s.lensVaultPx = gen.uniform(10.0, 35.0);
    s.irisBowPx = gen.uniform(0.0, 5.0);
    s.corneaThickness = gen.uniform(16.0, 22.0);
    s.noiseSigma = sigma;
    s.rngSeed = static_cast<std::uint64_t>(gen.integer(0, 1L << 40));
    return s;
  };
  auto error = [](const PhantomSpec& s) {
    const auto p = generate_phantom(s);
    try {
      return distance(locate_aca(p.image).point(), p.acaTruth);
    } catch (const StructureNotFound&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  double worst_clean = 0.0;
  for (int i = 0; i < 50; ++i) worst_clean = std::max(worst_clean, error(spec(0.0)));
  int hits = 0;
  for (int i = 0; i < 100; ++i) hits += error(spec(10.0)) <= 6.0;
  return {worst_clean <= 3.0 && hits >= 95, "noise-free worst " + fmt("%.2f", worst_clean) + " px (<= 3), sigma 10 " +
                                                std::to_string(hits) + "/100 within 6 px (>= 95)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"bacc-arithmetic", table_arithmetic},
      {"gradient-integrity", gradient_integrity},
      {"convolution-oracle", conv_oracle},
      {"overfit-probe", overfit},
      {"desk-scale-screening", desk_scale},
      {"auc-oracle", auc_oracle},
      {"augmentation-identities", augmentation_identities},
      {"split-invariant", split_invariant},
      {"determinism", determinism},
      {"localization", localization},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %-24s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
