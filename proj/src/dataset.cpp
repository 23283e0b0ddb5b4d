#include "mcdn/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace mcdn {

using nlohmann::json;

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    default: return "unassigned";
  }
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  if (s == "unassigned") return Split::Unassigned;
  throw ContractError("split must be train, test or unassigned, got '" + s + "'");
}

void SpecRanges::validate() const {
  auto ordered = [](const Range& r, const char* name) {
    if (!(r.lo <= r.hi)) throw ContractError(std::string("SpecRanges.") + name + " has lo > hi");
  };
  ordered(openAngleDeg, "openAngleDeg");
  ordered(closedAngleDeg, "closedAngleDeg");
  ordered(lensVaultPx, "lensVaultPx");
  ordered(irisBowPx, "irisBowPx");
  ordered(corneaThicknessPx, "corneaThicknessPx");
  if (!(closedAngleDeg.hi < closureThresholdDeg && openAngleDeg.lo >= closureThresholdDeg))
    throw ContractError("SpecRanges: closed range must lie below and open range at/above the closure threshold");
  if (closedAngleDeg.lo <= 0.0 || openAngleDeg.hi >= 90.0)
    throw ContractError("SpecRanges: angles must lie in (0, 90)");
}

namespace {

double draw(std::mt19937_64& rng, const Range& r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

std::string image_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%04zu.pgm", i);
  return buf;
}

std::string subject_name(Index i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "S%04ld", static_cast<long>(i));
  return buf;
}

}  // namespace

Dataset generate_dataset(Index count, Index subjectCount, double closureFraction, std::uint64_t baseSeed,
                         const SpecRanges& ranges) {
  ranges.validate();
  if (subjectCount < 2) throw ContractError("generate_dataset: need at least 2 subjects");
  if (count < 2 * subjectCount)
    throw ContractError("generate_dataset: count " + std::to_string(count) + " cannot give each of " +
                        std::to_string(subjectCount) + " subjects a left/right pair");
  if (count % 2 != 0) throw ContractError("generate_dataset: count must be even (left/right pairs)");
  if (!(closureFraction > 0.0 && closureFraction < 1.0))
    throw ContractError("generate_dataset: closureFraction must lie in (0,1)");
  const Index closures = static_cast<Index>(std::floor(closureFraction * static_cast<double>(count) + 0.5));
  if (closures <= 0 || closures >= count)
    throw ContractError("generate_dataset: closureFraction " + std::to_string(closureFraction) + " with count " +
                        std::to_string(count) + " leaves one class empty");

  std::vector<std::size_t> order(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 label_rng(mix_seed(baseSeed, 0xC105EULL));
  std::shuffle(order.begin(), order.end(), label_rng);
  std::vector<char> is_closure(static_cast<std::size_t>(count), 0);
  for (Index i = 0; i < closures; ++i) is_closure[order[static_cast<std::size_t>(i)]] = 1;

  Dataset ds;
  ds.samples.resize(static_cast<std::size_t>(count));
  ds.manifest.records.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
    // Each sample depends only on (baseSeed, i), so generation order is irrelevant.
    const std::uint64_t seed = mix_seed(baseSeed, i);
    std::mt19937_64 rng(seed);
    PhantomSpec spec;
    spec.imageWidth = ranges.imageWidth;
    spec.imageHeight = ranges.imageHeight;
    spec.closureThresholdDeg = ranges.closureThresholdDeg;
    spec.noiseSigma = ranges.noiseSigma;
    spec.irisAngleDeg = draw(rng, is_closure[i] ? ranges.closedAngleDeg : ranges.openAngleDeg);
    spec.lensVaultPx = draw(rng, ranges.lensVaultPx);
    spec.irisBowPx = draw(rng, ranges.irisBowPx);
    spec.corneaThickness = draw(rng, ranges.corneaThicknessPx);
    spec.rngSeed = mix_seed(seed, 1);

    PhantomSample s = generate_phantom(spec);
    const Index pair = static_cast<Index>(i / 2);
    s.subjectId = subject_name(pair % subjectCount);
    s.eyeSide = (i % 2 == 0) ? EyeSide::Left : EyeSide::Right;

    ManifestRecord& r = ds.manifest.records[i];
    r.imagePath = image_name(i);
    r.subjectId = s.subjectId;
    r.eyeSide = s.eyeSide;
    r.label = static_cast<int>(s.label);
    r.acaTruthX = s.acaTruth.x;
    r.acaTruthY = s.acaTruth.y;
    r.irisAngleDeg = spec.irisAngleDeg;
    r.spec = spec;
    ds.samples[i] = std::move(s);
  }
  return ds;
}

Index train_subject_count(Index subjects, double trainFraction) {
  return static_cast<Index>(std::floor(trainFraction * static_cast<double>(subjects) + 0.5));
}

void split_by_subject(DatasetManifest& manifest, double trainFraction, std::uint64_t seed) {
  require(trainFraction > 0.0 && trainFraction < 1.0, "split_by_subject: trainFraction must lie in (0,1)");
  for (const auto& r : manifest.records)
    if (r.split != Split::Unassigned) throw ContractError("split_by_subject: record '" + r.imagePath + "' is already assigned");
  std::vector<std::string> subjects;
  std::set<std::string> seen;
  for (const auto& r : manifest.records)
    if (seen.insert(r.subjectId).second) subjects.push_back(r.subjectId);
  if (subjects.size() < 2) throw ContractError("split_by_subject: fewer than 2 subjects");

  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  const Index n_train = train_subject_count(static_cast<Index>(subjects.size()), trainFraction);
  std::unordered_map<std::string, Split> assignment;
  for (std::size_t i = 0; i < subjects.size(); ++i)
    assignment[subjects[i]] = static_cast<Index>(i) < n_train ? Split::Train : Split::Test;
  for (auto& r : manifest.records) r.split = assignment.at(r.subjectId);
  manifest.splitSeed = seed;
}

std::vector<std::size_t> indices_in_split(const DatasetManifest& manifest, Split split) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.records.size(); ++i)
    if (manifest.records[i].split == split) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------- persistence

namespace {

json spec_to_json(const PhantomSpec& s) {
  return {{"imageWidth", s.imageWidth},     {"imageHeight", s.imageHeight},
          {"corneaThickness", s.corneaThickness}, {"irisAngleDeg", s.irisAngleDeg},
          {"lensVaultPx", s.lensVaultPx},   {"irisBowPx", s.irisBowPx},
          {"noiseSigma", s.noiseSigma},     {"closureThresholdDeg", s.closureThresholdDeg},
          {"rngSeed", s.rngSeed}};
}

PhantomSpec spec_from_json(const json& j) {
  PhantomSpec s;
  s.imageWidth = j.at("imageWidth").get<Index>();
  s.imageHeight = j.at("imageHeight").get<Index>();
  s.corneaThickness = j.at("corneaThickness").get<double>();
  s.irisAngleDeg = j.at("irisAngleDeg").get<double>();
  s.lensVaultPx = j.at("lensVaultPx").get<double>();
  s.irisBowPx = j.at("irisBowPx").get<double>();
  s.noiseSigma = j.at("noiseSigma").get<double>();
  s.closureThresholdDeg = j.at("closureThresholdDeg").get<double>();
  s.rngSeed = j.at("rngSeed").get<std::uint64_t>();
  return s;
}

}  // namespace

std::string manifest_to_json(const DatasetManifest& manifest) {
  json samples = json::array();
  for (const auto& r : manifest.records) {
    samples.push_back({{"imagePath", r.imagePath},
                       {"subjectId", r.subjectId},
                       {"eyeSide", to_string(r.eyeSide)},
                       {"label", r.label},
                       {"acaTruthX", r.acaTruthX},
                       {"acaTruthY", r.acaTruthY},
                       {"irisAngleDeg", r.irisAngleDeg},
                       {"split", to_string(r.split)},
                       {"spec", spec_to_json(r.spec)}});
  }
  json doc = {{"generatorVersion", manifest.generatorVersion},
              {"splitSeed", manifest.splitSeed},
              {"samples", std::move(samples)}};
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, const std::string& source) {
  DatasetManifest m;
  try {
    const json doc = json::parse(text);
    m.generatorVersion = doc.at("generatorVersion").get<int>();
    m.splitSeed = doc.at("splitSeed").get<std::uint64_t>();
    for (const auto& s : doc.at("samples")) {
      ManifestRecord r;
      r.imagePath = s.at("imagePath").get<std::string>();
      r.subjectId = s.at("subjectId").get<std::string>();
      r.eyeSide = eye_side_from_string(s.at("eyeSide").get<std::string>());
      r.label = s.at("label").get<int>();
      if (r.label != 0 && r.label != 1) throw ContractError("label must be 0 or 1");
      r.acaTruthX = s.at("acaTruthX").get<double>();
      r.acaTruthY = s.at("acaTruthY").get<double>();
      r.irisAngleDeg = s.at("irisAngleDeg").get<double>();
      r.split = split_from_string(s.at("split").get<std::string>());
      if (s.contains("spec")) r.spec = spec_from_json(s.at("spec"));
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw DatasetError(source + ": manifest schema violation: " + e.what());
  } catch (const ContractError& e) {
    throw DatasetError(source + ": manifest schema violation: " + e.what());
  }
  return m;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  require(dataset.samples.size() == dataset.manifest.records.size(), "save_dataset: samples and records differ in count");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DatasetError(dir.string() + ": cannot create directory: " + ec.message());
  for (std::size_t i = 0; i < dataset.samples.size(); ++i)
    write_pgm(dir / dataset.manifest.records[i].imagePath, dataset.samples[i].image);
  const auto path = dir / "manifest.json";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DatasetError(path.string() + ": cannot open for writing");
  os << manifest_to_json(dataset.manifest);
  if (!os) throw DatasetError(path.string() + ": write failed");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError(path.string() + ": cannot open manifest");
  std::ostringstream ss;
  ss << is.rdbuf();
  Dataset ds;
  ds.manifest = manifest_from_json(ss.str(), path.string());
  for (const auto& r : ds.manifest.records) {
    PhantomSample s;
    try {
      s.image = read_pgm(dir / r.imagePath);
    } catch (const ImageIoError& e) {
      throw DatasetError(e.what());
    }
    s.label = r.label ? AngleLabel::Closure : AngleLabel::Open;
    s.subjectId = r.subjectId;
    s.eyeSide = r.eyeSide;
    s.acaTruth = {r.acaTruthX, r.acaTruthY};
    s.spec = r.spec;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace mcdn
