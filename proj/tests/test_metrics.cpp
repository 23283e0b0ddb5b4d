#include <doctest.h>

#include "mcdn/metrics.hpp"
#include "mcdn/tensor.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace mcdn;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

struct ScoreSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Both classes present; coarse score grid so ties are common.
ScoreSet random_set(oracle::Gen& gen, long max_n = 100) {
  ScoreSet s;
  const long n = gen.integer(2, max_n);
  const long levels = gen.integer(1, 20);
  for (long i = 0; i < n; ++i) {
    s.scores.push_back(static_cast<double>(gen.integer(0, levels)) / static_cast<double>(levels));
    s.labels.push_back(gen.coin() ? 1 : 0);
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  return s;
}

}  // namespace

TEST_SUITE("confusion") {
  TEST_CASE("worked examples") {
    CHECK(confusion_at_threshold({0.9, 0.1}, {1, 0}, 0.5) == ConfusionCounts{1, 1, 0, 0});
    const auto above = confusion_at_threshold({0.9, 0.1, 0.4}, {1, 0, 1}, 0.95);
    CHECK(above.tp == 0);
    CHECK(above.fp == 0);
    CHECK(confusion_at_threshold({0.5, 0.5}, {1, 0}, 0.5) == ConfusionCounts{1, 0, 1, 0});
  }

  TEST_CASE("counts always sum to the sample count") {
    oracle::Gen gen(601);
    for (int trial = 0; trial < 200; ++trial) {
      const auto s = random_set(gen);
      const auto c = confusion_at_threshold(s.scores, s.labels, gen.uniform(-0.1, 1.1));
      CHECK(c.total() == static_cast<long>(s.scores.size()));
    }
  }

  TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(confusion_at_threshold({}, {}, 0.5), ContractError);
    CHECK_THROWS_AS(confusion_at_threshold({0.1, 0.2}, {1}, 0.5), ContractError);
    CHECK_THROWS_AS(confusion_at_threshold({0.1}, {2}, 0.5), ContractError);
  }
}

TEST_SUITE("rates") {
  TEST_CASE("every published B-Acc follows from its Sen and Spe") {
    struct Row {
      const char* method;
      double bacc, sen, spe;
    };
    const Row rows[] = {
        {"Clinical Parameter", 0.8198, 0.7914, 0.8483}, {"Visual Feature", 0.8688, 0.8503, 0.8872},
        {"Multi-Column", 0.8802, 0.8821, 0.8783},       {"Global Image", 0.8286, 0.7846, 0.8726},
        {"Local Region", 0.8790, 0.8526, 0.9055},       {"Global + Clinical", 0.8508, 0.8322, 0.8694},
        {"Local + Clinical", 0.8657, 0.8322, 0.8992},   {"Global + Local", 0.8786, 0.8617, 0.8955},
        {"Our MCDN", 0.8926, 0.8889, 0.8963},
    };
    for (const auto& r : rows) {
      INFO(r.method);
      CHECK(std::abs(sen_spe_bacc(r.sen, r.spe).bacc - r.bacc) <= 5e-4);
    }
    CHECK(sen_spe_bacc(0.7914, 0.8483).bacc == doctest::Approx(0.81985).epsilon(1e-12));
    CHECK(sen_spe_bacc(0.8889, 0.8963).bacc == doctest::Approx(0.8926).epsilon(1e-12));
  }

  TEST_CASE("counts to rates") {
    const auto r = sen_spe_bacc(ConfusionCounts{10, 3, 1, 0});
    CHECK(r.sen == 1.0);
    CHECK(r.spe == 0.75);
    CHECK(r.bacc == 0.875);
  }

  TEST_CASE("an absent class gives NaN, never 0") {
    const auto no_neg = sen_spe_bacc(ConfusionCounts{3, 0, 0, 1});
    CHECK(no_neg.sen == 0.75);
    CHECK(std::isnan(no_neg.spe));
    CHECK(std::isnan(no_neg.bacc));
    CHECK(std::isnan(sen_spe_bacc(ConfusionCounts{0, 2, 1, 0}).sen));
    CHECK_THROWS_AS(sen_spe_bacc(ConfusionCounts{}), ContractError);
  }
}

TEST_SUITE("roc") {
  TEST_CASE("perfect separation passes through (0,1) with AUC 1") {
    const auto c = roc_curve({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    bool corner = false;
    for (const auto& p : c) corner |= p.fpr == 0.0 && p.tpr == 1.0;
    CHECK(corner);
    CHECK(auc(c) == 1.0);
  }

  TEST_CASE("all scores equal gives two points and AUC 0.5") {
    const auto c = roc_curve({0.3, 0.3, 0.3}, {1, 0, 1});
    REQUIRE(c.size() == 2);
    CHECK(c[0].fpr == 0.0);
    CHECK(c[0].tpr == 0.0);
    CHECK(c[1].fpr == 1.0);
    CHECK(c[1].tpr == 1.0);
    CHECK(auc(c) == 0.5);
  }

  TEST_CASE("n distinct scores give n points plus the origin") {
    oracle::Gen gen(611);
    for (int trial = 0; trial < 50; ++trial) {
      const long n = gen.integer(2, 60);
      std::vector<double> scores;
      std::vector<int> labels;
      for (long i = 0; i < n; ++i) {
        scores.push_back(static_cast<double>(i) + gen.uniform(0.0, 0.5));
        labels.push_back(i % 2);
      }
      CHECK(roc_curve(scores, labels).size() == static_cast<std::size_t>(n + 1));
    }
  }

  TEST_CASE("curve invariants on random sets") {
    oracle::Gen gen(612);
    for (int trial = 0; trial < 300; ++trial) {
      const auto s = random_set(gen);
      const auto c = roc_curve(s.scores, s.labels);
      REQUIRE(c.size() >= 2);
      CHECK(c.front().fpr == 0.0);
      CHECK(c.front().tpr == 0.0);
      CHECK(c.back().fpr == 1.0);
      CHECK(c.back().tpr == 1.0);
      CHECK(c.front().threshold == *std::max_element(s.scores.begin(), s.scores.end()) + 1.0);
      for (std::size_t i = 1; i < c.size(); ++i) {
        CHECK(c[i].threshold < c[i - 1].threshold);
        CHECK(c[i].fpr >= c[i - 1].fpr);
        CHECK(c[i].tpr >= c[i - 1].tpr);
        CHECK(c[i].fpr <= 1.0);
        CHECK(c[i].tpr <= 1.0);
      }
      const double a = auc(c);
      CHECK(a >= 0.0);
      CHECK(a <= 1.0);
    }
  }

  TEST_CASE("AUC equals the Mann-Whitney pair statistic") {
    oracle::Gen gen(613);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto s = random_set(gen);
      CHECK(std::abs(auc(roc_curve(s.scores, s.labels)) - oracle::mann_whitney(s.scores, s.labels)) <= 1e-12);
    }
  }

  TEST_CASE("single-class input is rejected") {
    CHECK_THROWS_AS(roc_curve({0.1, 0.2}, {1, 1}), ContractError);
    CHECK_THROWS_AS(roc_curve({0.1, 0.2}, {0, 0}), ContractError);
  }
}

TEST_SUITE("results") {
  TEST_CASE("perfect scores give all-one metrics") {
    const auto r = evaluate_method("M", {0.9, 0.8, 0.3, 0.1}, {1, 1, 0, 0});
    CHECK(r.auc == 1.0);
    CHECK(r.bacc == 1.0);
    CHECK(r.sen == 1.0);
    CHECK(r.spe == 1.0);
    CHECK(r.threshold == 0.8);
  }

  TEST_CASE("the operating point maximizes B-Acc over the curve thresholds") {
    oracle::Gen gen(621);
    for (int trial = 0; trial < 100; ++trial) {
      const auto s = random_set(gen, 40);
      const auto r = evaluate_method("M", s.scores, s.labels);
      const long pos = std::count(s.labels.begin(), s.labels.end(), 1);
      const long neg = static_cast<long>(s.labels.size()) - pos;
      long best = -1;
      double lowest_best = 0.0;
      for (const auto& p : r.roc) {
        const auto c = confusion_at_threshold(s.scores, s.labels, p.threshold);
        const long key = c.tp * neg + c.tn * pos;  // exact multiple of B-Acc
        if (key >= best) {  // thresholds decrease along the curve
          best = key;
          lowest_best = p.threshold;
        }
      }
      CHECK(r.bacc == doctest::Approx(static_cast<double>(best) / (2.0 * pos * neg)).epsilon(1e-14));
      CHECK(r.threshold == lowest_best);
      const auto c = confusion_at_threshold(s.scores, s.labels, r.threshold);
      CHECK(r.sen == doctest::Approx(sen_spe_bacc(c).sen).epsilon(1e-12));
      CHECK(r.spe == doctest::Approx(sen_spe_bacc(c).spe).epsilon(1e-12));
    }
  }

  TEST_CASE("results CSV round-trips through a parser") {
    oracle::Gen gen(622);
    std::vector<MethodResult> rows;
    for (const char* name : {"Global Image", "Our MCDN w/o CP", "Our MCDN"}) {
      const auto s = random_set(gen);
      rows.push_back(evaluate_method(name, s.scores, s.labels));
    }
    const auto table = parse_csv(results_csv(rows));
    REQUIRE(table.size() == 4);
    CHECK(table[0] == std::vector<std::string>{"method", "auc", "bacc", "sen", "spe"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      REQUIRE(table[i + 1].size() == 5);
      CHECK(table[i + 1][0] == rows[i].method);
      CHECK(std::stod(table[i + 1][1]) == rows[i].auc);
      CHECK(std::stod(table[i + 1][2]) == rows[i].bacc);
      CHECK(std::stod(table[i + 1][3]) == rows[i].sen);
      CHECK(std::stod(table[i + 1][4]) == rows[i].spe);
    }
    CHECK(results_table(rows).find("Our MCDN w/o CP") != std::string::npos);
  }

  TEST_CASE("commas in method names are rejected") {
    const auto r = evaluate_method("a,b", {0.9, 0.1}, {1, 0});
    CHECK_THROWS_AS(results_csv({r}), ContractError);
  }

  TEST_CASE("ROC CSV carries every point") {
    const auto c = roc_curve({0.9, 0.4, 0.4, 0.1}, {1, 0, 1, 0});
    const auto table = parse_csv(roc_csv(c));
    REQUIRE(table.size() == c.size() + 1);
    CHECK(table[0] == std::vector<std::string>{"fpr", "tpr", "threshold"});
    for (std::size_t i = 0; i < c.size(); ++i) {
      CHECK(std::stod(table[i + 1][0]) == c[i].fpr);
      CHECK(std::stod(table[i + 1][1]) == c[i].tpr);
      CHECK(std::stod(table[i + 1][2]) == c[i].threshold);
    }
  }

  TEST_CASE("two methods give two ROC files named after them") {
    CHECK(roc_filename("Our MCDN") == "roc_our_mcdn.csv");
    CHECK(roc_filename("Our MCDN w/o CP") == "roc_our_mcdn_w_o_cp.csv");
    CHECK(roc_filename("Global Image") == "roc_global_image.csv");
    const fs::path dir = fs::temp_directory_path() / ("mcdn_test_results_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    const auto a = evaluate_method("Global Image", {0.9, 0.1}, {1, 0});
    const auto b = evaluate_method("Local Region", {0.2, 0.7}, {1, 0});
    write_results({a, b}, dir);
    CHECK(fs::exists(dir / "results.csv"));
    CHECK(fs::exists(dir / "roc_global_image.csv"));
    CHECK(fs::exists(dir / "roc_local_region.csv"));
    std::size_t count = 0;
    for (const auto& e : fs::directory_iterator(dir)) count += e.path().filename().string().rfind("roc_", 0) == 0;
    CHECK(count == 2);
    fs::remove_all(dir);
  }
}
