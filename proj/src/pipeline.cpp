#include "mcdn/pipeline.hpp"

#include <algorithm>
#include <thread>

namespace mcdn {

ScreeningResult screen_sample(const McdnModel<float>& mcdn, const LinearSvmModel& svm, const Image& image) {
  ScreeningResult r;
  try {
    r.aca = locate_aca(image);
    r.clinical = extract_clinical_params(image, r.aca);
  } catch (const StructureNotFound& e) {
    r.degraded = true;
    r.degradation = e.what();
    r.aca = AcaLocation{static_cast<double>(image.cols() / 2), static_cast<double>(image.rows() / 2), EyeSide::Left, 0.0};
    r.clinical.reset();
  }
  r.pDeep = predict_mcdn(mcdn, image, r.aca);
  if (r.clinical) {
    r.pClinical = svm_probability(svm, *r.clinical);
    r.pFused = fuse_probabilities(r.pDeep, *r.pClinical);
  } else {
    r.pFused = r.pDeep;
  }
  return r;
}

std::vector<PreparedSample> prepare_split(const Dataset& dataset, Split split, unsigned threads) {
  const auto idx = indices_in_split(dataset.manifest, split);
  std::vector<PreparedSample> out(idx.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t i = idx[k];
      const auto& rec = dataset.manifest.records[i];
      PreparedSample& p = out[k];
      p.sample.image = dataset.samples[i].image;
      p.sample.label = rec.label;
      p.sample.subjectId = rec.subjectId;
      p.sample.split = rec.split;
      try {
        p.sample.aca = locate_aca(p.sample.image);
        p.clinical = extract_clinical_params(p.sample.image, p.sample.aca);
        p.localized = true;
      } catch (const StructureNotFound&) {
        p.sample.aca = AcaLocation{static_cast<double>(p.sample.image.cols() / 2),
                                   static_cast<double>(p.sample.image.rows() / 2), EyeSide::Left, 0.0};
      }
    }
  };
  const std::size_t n = out.size();
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (workers == 1) {
    work(0, n);
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t per = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * per, e = std::min(n, b + per);
    if (b < e) pool.emplace_back(work, b, e);
  }
  for (auto& t : pool) t.join();
  return out;
}

PipelineTrainResult train_pipeline(const std::vector<PreparedSample>& train, const PipelineConfig& config) {
  config.train.validate();
  require(!train.empty(), "train_pipeline: empty training split");
  PipelineTrainResult result;

  std::vector<Eigen::VectorXd> features;
  std::vector<int> labels;
  for (const auto& p : train)
    if (p.clinical) {
      features.push_back(p.clinical->as_vector());
      labels.push_back(p.sample.label);
    }
  if (features.size() < train.size())
    result.warnings.push_back(std::to_string(train.size() - features.size()) +
                              " training samples could not be localized and are excluded from the SVM");
  SvmConfig svm_cfg;
  svm_cfg.lambda = config.train.svmRegularization;
  result.bundle.svm = train_svm(features, labels, svm_cfg);

  std::vector<LabeledSample> samples;
  samples.reserve(train.size());
  for (const auto& p : train) samples.push_back(p.sample);

  auto train_one = [&](StreamLayout layout, std::uint64_t k) {
    TrainConfig tc = config.train;
    tc.rngSeed = mix_seed(config.train.rngSeed, 2 * k + 1);
    auto model = make_mcdn<float>(config.globalStream, config.localStream, layout, mix_seed(config.train.rngSeed, 2 * k));
    return train_mcdn(std::move(model), samples, tc);
  };
  TrainResult main = train_one(StreamLayout::Both, 0);
  result.lossTrace = main.lossTrace;
  result.warnings.insert(result.warnings.end(), main.warnings.begin(), main.warnings.end());
  result.bundle.mcdn = std::move(main.model);
  if (config.trainAblations) {
    result.bundle.globalOnly = train_one(StreamLayout::GlobalOnly, 1).model;
    result.bundle.localOnly = train_one(StreamLayout::LocalOnly, 2).model;
  }
  return result;
}

VariantScores score_variants(const ScreeningBundle& bundle, const std::vector<PreparedSample>& samples,
                             unsigned threads) {
  require(bundle.globalOnly && bundle.localOnly, "score_variants: model file lacks the single-stream models");
  VariantScores v;
  std::vector<Image> images;
  std::vector<AcaLocation> acas;
  for (const auto& p : samples) {
    v.labels.push_back(p.sample.label);
    images.push_back(p.sample.image);
    acas.push_back(p.sample.aca);
  }
  const auto global = predict_mcdn(*bundle.globalOnly, images, acas, threads);
  const auto local = predict_mcdn(*bundle.localOnly, images, acas, threads);
  const auto deep = predict_mcdn(bundle.mcdn, images, acas, threads);
  std::vector<double> clinical(samples.size(), 0.5), fused(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].clinical) {
      clinical[i] = svm_probability(bundle.svm, *samples[i].clinical);
      fused[i] = fuse_probabilities(deep[i], clinical[i]);
    } else {
      fused[i] = deep[i];
    }
  }
  v.scores = {global, local, clinical, deep, fused};
  return v;
}

std::vector<MethodResult> evaluate_variants(const VariantScores& scores) {
  std::vector<MethodResult> rows;
  for (std::size_t k = 0; k < variant_names().size(); ++k)
    rows.push_back(evaluate_method(variant_names()[k], scores.scores[k], scores.labels));
  return rows;
}

}  // namespace mcdn
