#include "mcdn/config.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <iterator>

namespace mcdn {

using nlohmann::json;

namespace {

class Parser {
 public:
  explicit Parser(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& where, const std::string& what) const {
    throw ConfigError(source_ + ": " + where + ": " + what);
  }

  void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(where, "expected an object");
    for (const auto& [key, _] : obj.items()) {
      bool known = false;
      for (const char* k : keys) known = known || key == k;
      if (!known) fail(where, "unknown key '" + key + "'");
    }
  }

  template <typename T>
  void read(const json& obj, const char* key, const std::string& where, T& dest) const {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
      dest = it->template get<T>();
    } catch (const json::exception&) {
      fail(where + "." + key, "has the wrong type");
    }
  }

  void read_index(const json& obj, const char* key, const std::string& where, Index& dest) const {
    const auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number_integer()) fail(where + "." + key, "must be an integer");
    dest = it->get<Index>();
  }

  void read_stream(const json& obj, const std::string& where, StreamConfig& s) const {
    only_keys(obj, where, {"inputSidePx", "featureDim", "convUnits"});
    read_index(obj, "inputSidePx", where, s.inputSidePx);
    read_index(obj, "featureDim", where, s.featureDim);
    if (const auto it = obj.find("convUnits"); it != obj.end()) {
      if (!it->is_array()) fail(where + ".convUnits", "must be an array of [out, kernel, stride]");
      s.convUnits.clear();
      for (const auto& u : *it) {
        if (!u.is_array() || u.size() != 3 || !u[0].is_number_integer() || !u[1].is_number_integer() ||
            !u[2].is_number_integer())
          fail(where + ".convUnits", "entries must be [out, kernel, stride] integer triples");
        s.convUnits.push_back({u[0].get<Index>(), u[1].get<Index>(), u[2].get<Index>()});
      }
    }
  }

  const std::string& source() const { return source_; }

 private:
  std::string source_;
};

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source + ": not valid JSON: " + e.what());
  }
}

template <typename Fn>
void wrap_contract(const std::string& source, Fn&& fn) {
  try {
    fn();
  } catch (const ContractError& e) {
    throw ConfigError(source + ": " + e.what());
  }
}

json stream_json(const StreamConfig& s) {
  json units = json::array();
  for (const auto& u : s.convUnits) units.push_back({u.outChannels, u.kernel, u.stride});
  return {{"inputSidePx", s.inputSidePx}, {"featureDim", s.featureDim}, {"convUnits", units}};
}

}  // namespace

void RunConfig::validate() const {
  pipeline.globalStream.validate("globalStream");
  pipeline.localStream.validate("localStream");
  pipeline.train.validate();
}

RunConfig run_config_from_json(const std::string& text, const std::string& source) {
  const json root = parse_json(text, source);
  Parser p(source);
  p.only_keys(root, "config", {"seed", "dataDir", "outDir", "train", "augment", "globalStream", "localStream"});
  RunConfig c;
  p.read(root, "seed", "config", c.seed);
  if (root.contains("dataDir")) {
    std::string d;
    p.read(root, "dataDir", "config", d);
    c.dataDir = d;
  }
  if (root.contains("outDir")) {
    std::string d;
    p.read(root, "outDir", "config", d);
    c.outDir = d;
  }
  TrainConfig& t = c.pipeline.train;
  if (const auto it = root.find("train"); it != root.end()) {
    p.only_keys(*it, "train", {"learningRate", "momentumCoeff", "batchSize", "iterationCount", "svmRegularization",
                               "classWeighting", "trainAblations"});
    p.read(*it, "learningRate", "train", t.learningRate);
    p.read(*it, "momentumCoeff", "train", t.momentumCoeff);
    p.read_index(*it, "batchSize", "train", t.batchSize);
    p.read_index(*it, "iterationCount", "train", t.iterationCount);
    p.read(*it, "svmRegularization", "train", t.svmRegularization);
    p.read(*it, "classWeighting", "train", t.classWeighting);
    p.read(*it, "trainAblations", "train", c.pipeline.trainAblations);
  }
  if (const auto it = root.find("augment"); it != root.end()) {
    p.only_keys(*it, "augment", {"intensityFactors", "shiftOffsetsPx", "intensityEnabled", "shiftEnabled"});
    p.read(*it, "intensityFactors", "augment", t.augment.intensityFactors);
    p.read(*it, "intensityEnabled", "augment", t.augment.intensityEnabled);
    p.read(*it, "shiftEnabled", "augment", t.augment.shiftEnabled);
    if (const auto s = it->find("shiftOffsetsPx"); s != it->end()) {
      if (!s->is_array()) p.fail("augment.shiftOffsetsPx", "must be an array of [dx, dy]");
      t.augment.shiftOffsetsPx.clear();
      for (const auto& o : *s) {
        if (!o.is_array() || o.size() != 2 || !o[0].is_number_integer() || !o[1].is_number_integer())
          p.fail("augment.shiftOffsetsPx", "entries must be [dx, dy] integer pairs");
        t.augment.shiftOffsetsPx.push_back({o[0].get<int>(), o[1].get<int>()});
      }
    }
  }
  if (const auto it = root.find("globalStream"); it != root.end()) p.read_stream(*it, "globalStream", c.pipeline.globalStream);
  if (const auto it = root.find("localStream"); it != root.end()) p.read_stream(*it, "localStream", c.pipeline.localStream);
  t.rngSeed = c.seed;
  wrap_contract(source, [&] { c.validate(); });
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return run_config_from_json(text, path.string());
}

std::string run_config_to_json(const RunConfig& c) {
  const TrainConfig& t = c.pipeline.train;
  json offsets = json::array();
  for (const auto& o : t.augment.shiftOffsetsPx) offsets.push_back({o.dx, o.dy});
  json root = {{"seed", c.seed},
               {"train",
                {{"learningRate", t.learningRate},
                 {"momentumCoeff", t.momentumCoeff},
                 {"batchSize", t.batchSize},
                 {"iterationCount", t.iterationCount},
                 {"svmRegularization", t.svmRegularization},
                 {"classWeighting", t.classWeighting},
                 {"trainAblations", c.pipeline.trainAblations}}},
               {"augment",
                {{"intensityFactors", t.augment.intensityFactors},
                 {"shiftOffsetsPx", offsets},
                 {"intensityEnabled", t.augment.intensityEnabled},
                 {"shiftEnabled", t.augment.shiftEnabled}}},
               {"globalStream", stream_json(c.pipeline.globalStream)},
               {"localStream", stream_json(c.pipeline.localStream)}};
  if (c.dataDir) root["dataDir"] = c.dataDir->string();
  if (c.outDir) root["outDir"] = c.outDir->string();
  return root.dump(2) + "\n";
}

void GradcheckConfig::validate() const {
  stream.validate("gradcheck");
  require(batch >= 2, "gradcheck.batch must be at least 2");
  require(step > 0 && step < 1, "gradcheck.step must lie in (0,1)");
  require(tolerance > 0, "gradcheck.tolerance must be positive");
}

GradcheckConfig gradcheck_config_from_json(const std::string& text, const std::string& source) {
  const json root = parse_json(text, source);
  Parser p(source);
  p.only_keys(root, "gradcheck",
              {"inputSidePx", "featureDim", "convUnits", "batch", "seed", "step", "tolerance", "corruptParameter"});
  GradcheckConfig g;
  json stream_part = json::object();
  for (const char* k : {"inputSidePx", "featureDim", "convUnits"})
    if (root.contains(k)) stream_part[k] = root[k];
  p.read_stream(stream_part, "gradcheck", g.stream);
  p.read_index(root, "batch", "gradcheck", g.batch);
  p.read(root, "seed", "gradcheck", g.seed);
  p.read(root, "step", "gradcheck", g.step);
  p.read(root, "tolerance", "gradcheck", g.tolerance);
  p.read(root, "corruptParameter", "gradcheck", g.corruptParameter);
  wrap_contract(source, [&] { g.validate(); });
  return g;
}

}  // namespace mcdn
