#pragma once

#include "mcdn/phantom.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mcdn {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Sampling ranges for dataset generation. Open and closed angle ranges must be
/// disjoint and sit on opposite sides of the closure threshold.
struct SpecRanges {
  Range openAngleDeg{15.0, 45.0};
  Range closedAngleDeg{3.0, 11.0};
  Range lensVaultPx{10.0, 35.0};
  Range irisBowPx{0.0, 5.0};
  Range corneaThicknessPx{16.0, 22.0};
  double noiseSigma = 0.0;
  double closureThresholdDeg = 12.0;
  Index imageWidth = 400;
  Index imageHeight = 200;

  void validate() const;
};

enum class Split { Unassigned, Train, Test };

std::string to_string(Split split);
Split split_from_string(const std::string& s);

struct ManifestRecord {
  std::string imagePath;  // relative to the dataset directory
  std::string subjectId;
  EyeSide eyeSide = EyeSide::Left;
  int label = 0;
  double acaTruthX = 0.0;
  double acaTruthY = 0.0;
  double irisAngleDeg = 0.0;
  Split split = Split::Unassigned;
  PhantomSpec spec;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;
  std::uint64_t splitSeed = 0;
  int generatorVersion = 1;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct Dataset {
  std::vector<PhantomSample> samples;
  DatasetManifest manifest;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Generates `count` ACA images for `subjectCount` subjects. Samples come in
/// left/right pairs sharing a subject id; pairs are dealt to subjects round-robin,
/// so `count` must be even and at least 2 * subjectCount. The number of closure
/// samples is round-half-up(closureFraction * count). Images are stored in
/// canonical orientation (right-side ACAs already mirrored).
Dataset generate_dataset(Index count, Index subjectCount, double closureFraction, std::uint64_t baseSeed,
                         const SpecRanges& ranges = {});

/// Shuffles subjects by `seed` and assigns round-half-up(trainFraction * subjects)
/// of them to train, the rest to test.
void split_by_subject(DatasetManifest& manifest, double trainFraction, std::uint64_t seed);

/// Train subjects for a given subject total (round half up).
Index train_subject_count(Index subjects, double trainFraction);

/// Writes `<dir>/img_NNNN.pgm` plus `<dir>/manifest.json`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text, const std::string& source = "manifest.json");

/// Indices of records in the given split.
std::vector<std::size_t> indices_in_split(const DatasetManifest& manifest, Split split);

}  // namespace mcdn
