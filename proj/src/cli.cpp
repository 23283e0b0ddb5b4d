#include "mcdn/cli.hpp"

#include "mcdn/config.hpp"
#include "mcdn/gradcheck.hpp"
#include "mcdn/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace mcdn {

namespace fs = std::filesystem;
using nlohmann::json;

unsigned thread_budget() {
  const char* env = std::getenv("MCDN_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) return 1;
  return static_cast<unsigned>(std::min<unsigned long>(v, 256));
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  Index count = 0;
  Index subjects = 0;
  double closureFraction = 0.0;
  std::uint64_t seed = 0;
  double noiseSigma = 0.0;
  double trainFraction = 0.5;
  std::string out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  SpecRanges ranges;
  ranges.noiseSigma = a.noiseSigma;
  Dataset ds;
  try {
    ds = generate_dataset(a.count, a.subjects, a.closureFraction, a.seed, ranges);
    split_by_subject(ds.manifest, a.trainFraction, a.seed);
  } catch (const ContractError& e) {
    throw UsageError(e.what());
  }
  save_dataset(ds, a.out);
  std::size_t closure = 0;
  for (const auto& r : ds.manifest.records) closure += r.label == 1;
  auto subjects_in = [&](Split s) {
    std::set<std::string> ids;
    for (const auto& r : ds.manifest.records)
      if (r.split == s) ids.insert(r.subjectId);
    return ids.size();
  };
  const auto train = indices_in_split(ds.manifest, Split::Train).size();
  const auto test = indices_in_split(ds.manifest, Split::Test).size();
  out << "generated " << ds.manifest.records.size() << " samples (" << closure << " closure) for " << a.subjects
      << " subjects in " << a.out << "\n"
      << "train: " << train << " samples, " << subjects_in(Split::Train) << " subjects\n"
      << "test:  " << test << " samples, " << subjects_in(Split::Test) << " subjects\n";
  return 0;
}

// ---------------------------------------------------------------- train

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& model_path,
              std::ostream& out, std::ostream& err) {
  const RunConfig config = load_run_config(config_path);
  const Dataset ds = load_dataset(data);
  const auto train = prepare_split(ds, Split::Train, thread_budget());
  if (train.empty()) throw std::runtime_error(data + ": dataset has no train split");
  const PipelineTrainResult r = train_pipeline(train, config.pipeline);
  for (const auto& w : r.warnings) err << "warning: " << w << "\n";

  const fs::path model(model_path);
  if (model.has_parent_path()) fs::create_directories(model.parent_path());
  save_model(r.bundle, model);
  std::ostringstream trace;
  trace << "iteration,loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < r.lossTrace.size(); ++i) trace << i + 1 << ',' << r.lossTrace[i] << '\n';
  write_text(model.parent_path() / "loss_trace.csv", trace.str());
  out << "trained on " << train.size() << " samples; final train loss " << std::setprecision(6)
      << r.lossTrace.back() << "\n"
      << "model: " << model.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& out_dir, std::ostream& out) {
  const ScreeningBundle bundle = load_model(model_path);
  const Dataset ds = load_dataset(data);
  const auto test = prepare_split(ds, Split::Test, thread_budget());
  if (test.empty()) throw std::runtime_error(data + ": dataset has no test split");
  const auto positives = std::count_if(test.begin(), test.end(), [](const PreparedSample& p) { return p.sample.label == 1; });
  if (positives == 0 || positives == static_cast<long>(test.size()))
    throw std::runtime_error(data + ": test split holds a single class");
  const auto rows = evaluate_variants(score_variants(bundle, test, thread_budget()));
  write_results(rows, out_dir);
  out << results_table(rows);
  return 0;
}

// ---------------------------------------------------------------- screen

int cmd_screen(const std::string& model_path, const std::string& image_path, const std::string* dump_patch,
               std::ostream& out) {
  const ScreeningBundle bundle = load_model(model_path);
  const Image image = read_pgm(image_path);
  const ScreeningResult r = screen_sample(bundle.mcdn, bundle.svm, image);
  json line = {{"pFused", r.pFused}, {"pDeep", r.pDeep},   {"pClinical", nullptr},   {"acaX", r.aca.x},
               {"acaY", r.aca.y},    {"confidence", r.aca.confidence}, {"clinicalParams", nullptr}, {"degraded", r.degraded}};
  if (r.pClinical) line["pClinical"] = *r.pClinical;
  if (r.clinical) {
    json params = json::object();
    const Eigen::VectorXd v = r.clinical->as_vector();
    for (int i = 0; i < ClinicalParams::kCount; ++i) params[ClinicalParams::name(i)] = v(i);
    line["clinicalParams"] = params;
  }
  if (r.degraded) line["degradation"] = r.degradation;
  if (dump_patch) write_pgm(*dump_patch, crop_patch(image, r.aca));
  out << line.dump() << "\n";
  return 0;
}

// ---------------------------------------------------------------- gradcheck

int cmd_gradcheck(const std::string& config_path, std::ostream& out, std::ostream& err) {
  GradcheckConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + config_path);
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    cfg = gradcheck_config_from_json(text, config_path);
  }
  auto model = make_mcdn<double>(cfg.stream, cfg.stream, StreamLayout::Both, cfg.seed);
  // A larger head than the training init keeps stream gradients well above the floor.
  std::mt19937_64 rng(mix_seed(cfg.seed, 1));
  fill_normal(model.head.weights, 1.0 / std::sqrt(static_cast<double>(model.head.in_features())), rng);
  const Index side = cfg.stream.inputSidePx;
  TensorD g({cfg.batch, 1, side, side}), l({cfg.batch, 1, side, side}), y({cfg.batch, 1});
  fill_normal(g, 1.0, rng);
  fill_normal(l, 1.0, rng);
  for (Index i = 0; i < cfg.batch; ++i) y[i] = static_cast<double>(i % 2);
  McdnLossFragment fragment(std::move(model), std::move(g), std::move(l), std::move(y));
  if (!cfg.corruptParameter.empty()) fragment.corrupt_gradient(cfg.corruptParameter);

  const GradCheckReport report = finite_diff_check(fragment, cfg.step, cfg.tolerance);
  std::size_t width = 0;
  for (const auto& e : report.entries) width = std::max(width, e.name.size());
  std::vector<std::string> failed;
  for (const auto& e : report.entries) {
    const bool ok = e.max_relative_error < cfg.tolerance;
    out << std::left << std::setw(static_cast<int>(width)) << e.name << "  " << std::scientific << std::setprecision(3)
        << e.max_relative_error << "  " << (ok ? "ok" : "FAIL") << "\n";
    if (!ok) failed.push_back(e.name);
  }
  out << std::defaultfloat << "worst relative error " << std::scientific << std::setprecision(3) << report.worst()
      << " (tolerance " << cfg.tolerance << ")\n" << std::defaultfloat;
  if (failed.empty()) return 0;
  err << "gradient check failed for:";
  for (const auto& f : failed) err << ' ' << f;
  err << "\n";
  return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Angle-closure screening on synthetic AS-OCT phantoms", "mcdn"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a phantom dataset (PGM images + manifest.json)");
  generate->add_option("--count", gen.count, "Number of ACA images")->required();
  generate->add_option("--subjects", gen.subjects, "Number of subjects")->required();
  generate->add_option("--closure-fraction", gen.closureFraction, "Fraction of closure samples")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  generate->add_option("--seed", gen.seed, "Generator and split seed")->required();
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--noise-sigma", gen.noiseSigma, "Gaussian noise standard deviation")->check(CLI::NonNegativeNumber);
  generate->add_option("--train-fraction", gen.trainFraction, "Fraction of subjects in the train split")
      ->check(CLI::Range(0.0, 1.0));

  std::string config, data, model, out_dir, image, dump_patch;
  auto* train = app.add_subcommand("train", "Train the SVM, the MCDN and the single-stream models");
  train->add_option("--config", config, "JSON run configuration")->required();
  train->add_option("--data", data, "Dataset directory")->required();
  train->add_option("--out", model, "Model file to write")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate every method variant on the test split");
  eval->add_option("--model", model, "Model file")->required();
  eval->add_option("--data", data, "Dataset directory")->required();
  eval->add_option("--out", out_dir, "Directory for results.csv and ROC files")->required();

  auto* screen = app.add_subcommand("screen", "Screen one ACA image and print a JSON line");
  screen->add_option("--model", model, "Model file")->required();
  screen->add_option("--image", image, "PGM image")->required();
  auto* dump = screen->add_option("--dump-patch", dump_patch, "Also write the 120x120 patch (default patch.pgm)")
                   ->expected(0, 1)
                   ->default_str("patch.pgm");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of a tiny two-stream model");
  gradcheck->add_option("--config", config, "JSON gradcheck configuration");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 2;
  }

  try {
    if (generate->parsed()) return cmd_generate(gen, out);
    if (train->parsed()) return cmd_train(config, data, model, out, err);
    if (eval->parsed()) return cmd_eval(model, data, out_dir, out);
    if (screen->parsed()) {
      if (dump->count() > 0 && dump_patch.empty()) dump_patch = "patch.pgm";
      return cmd_screen(model, image, dump->count() > 0 ? &dump_patch : nullptr, out);
    }
    if (gradcheck->parsed()) return cmd_gradcheck(config, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.get_subcommands().front()->help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mcdn
