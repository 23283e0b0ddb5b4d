#include "mcdn/mcdn_model.hpp"

namespace mcdn {

void StreamConfig::validate(const std::string& what) const {
  require(inputSidePx > 0, what + ".inputSidePx must be positive");
  require(!convUnits.empty(), what + ".convUnits must hold at least one unit");
  require(featureDim > 0, what + ".featureDim must be positive");
  Index side = inputSidePx;
  for (std::size_t i = 0; i < convUnits.size(); ++i) {
    const auto& u = convUnits[i];
    const std::string at = what + ".convUnits[" + std::to_string(i) + "]";
    require(u.outChannels > 0, at + ".outChannels must be positive");
    require(u.kernel > 0, at + ".kernel must be positive");
    require(u.stride > 0, at + ".stride must be positive");
    const Index span = side + 2 * (u.kernel / 2) - u.kernel;
    require(span >= 0, at + ": kernel " + std::to_string(u.kernel) + " exceeds padded input " + std::to_string(side));
    side = span / u.stride + 1;
  }
}

Shape StreamConfig::conv_output_dims() const {
  validate();
  Index side = inputSidePx;
  for (const auto& u : convUnits) side = (side + 2 * (u.kernel / 2) - u.kernel) / u.stride + 1;
  return {convUnits.back().outChannels, side, side};
}

std::string to_string(StreamLayout layout) {
  switch (layout) {
    case StreamLayout::Both: return "both";
    case StreamLayout::GlobalOnly: return "global_only";
    case StreamLayout::LocalOnly: return "local_only";
  }
  return "both";
}

StreamLayout stream_layout_from_string(const std::string& s) {
  if (s == "both") return StreamLayout::Both;
  if (s == "global_only") return StreamLayout::GlobalOnly;
  if (s == "local_only") return StreamLayout::LocalOnly;
  throw ContractError("unknown stream layout '" + s + "'");
}

}  // namespace mcdn
