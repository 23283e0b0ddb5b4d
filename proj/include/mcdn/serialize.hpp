#pragma once

#include "mcdn/mcdn_model.hpp"
#include "mcdn/svm.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcdn {

/// Container layout (all integers little-endian):
///   "MCDN" | u32 version | records until end of file
///   record: u16 name length | UTF-8 name | u8 rank | u32 dims[rank] | f32 payload
inline constexpr std::uint32_t kContainerVersion = 1;

struct NamedTensor {
  std::string name;
  TensorF tensor;
};

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string encode_container(const std::vector<NamedTensor>& records);
std::vector<NamedTensor> decode_container(const std::string& bytes, const std::string& source = "<memory>");

/// Everything `train` produces: the two-stream MCDN, the single-stream ablations
/// and the clinical-parameter SVM.
struct ScreeningBundle {
  McdnModel<float> mcdn;
  std::optional<McdnModel<float>> globalOnly;
  std::optional<McdnModel<float>> localOnly;
  LinearSvmModel svm;
};

/// Records `<prefix>/layout`, `<prefix>/<stream>/config`, `<prefix>/<stream>/unitN/...`,
/// `<prefix>/<stream>/projection/...`, `<prefix>/head/...` with prefixes mcdn,
/// global_only, local_only; the SVM under svm/weights|bias|platt|mean|scale.
std::vector<NamedTensor> bundle_records(const ScreeningBundle& bundle);
ScreeningBundle bundle_from_records(const std::vector<NamedTensor>& records, const std::string& source = "<memory>");

void save_model(const ScreeningBundle& bundle, const std::filesystem::path& path);
ScreeningBundle load_model(const std::filesystem::path& path);

}  // namespace mcdn
