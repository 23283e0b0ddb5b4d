#include "mcdn/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

namespace mcdn {

namespace {

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u16(std::string& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t offset() const { return pos_; }

  std::uint32_t uint(int width, const char* what) {
    need(static_cast<std::size_t>(width), what);
    std::uint32_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  [[noreturn]] void fail(const std::string& message, std::size_t at) const {
    throw ModelFormatError(source_ + ": " + message + " at byte offset " + std::to_string(at));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n)
      fail(std::string("truncated ") + what + " (need " + std::to_string(n) + " bytes, " +
               std::to_string(bytes_.size() - pos_) + " remain)",
           pos_);
  }

  const std::string& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_container(const std::vector<NamedTensor>& records) {
  std::string out = "MCDN";
  put_u32(out, kContainerVersion);
  std::set<std::string> seen;
  for (const auto& r : records) {
    require(!r.name.empty() && r.name.size() <= 0xffff, "container: record name length out of range");
    require(seen.insert(r.name).second, "container: duplicate record '" + r.name + "'");
    require(r.tensor.rank() >= 1 && r.tensor.rank() <= 255, "container: record '" + r.name + "' has unsupported rank");
    put_u16(out, static_cast<std::uint16_t>(r.name.size()));
    out += r.name;
    put_u8(out, static_cast<std::uint8_t>(r.tensor.rank()));
    for (const Index d : r.tensor.dims()) put_u32(out, static_cast<std::uint32_t>(d));
    for (Index i = 0; i < r.tensor.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(r.tensor[i]));
  }
  return out;
}

std::vector<NamedTensor> decode_container(const std::string& bytes, const std::string& source) {
  Reader in(bytes, source);
  const std::string magic = in.text(std::min<std::size_t>(4, bytes.size()), "magic");
  if (magic != "MCDN") in.fail("bad magic, expected \"MCDN\"", 0);
  const std::uint32_t version = in.uint(4, "version");
  if (version != kContainerVersion)
    in.fail("unsupported container version " + std::to_string(version) + " (supported: " +
                std::to_string(kContainerVersion) + ")",
            4);
  std::vector<NamedTensor> records;
  std::set<std::string> seen;
  while (!in.done()) {
    const std::size_t start = in.offset();
    const std::uint32_t len = in.uint(2, "record name length");
    if (len == 0) in.fail("empty record name", start);
    NamedTensor r;
    r.name = in.text(len, "record name");
    if (!seen.insert(r.name).second) in.fail("duplicate record '" + r.name + "'", start);
    const std::uint32_t rank = in.uint(1, "record rank");
    if (rank == 0) in.fail("record '" + r.name + "' has rank 0", start);
    Shape dims;
    std::uint64_t count = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const std::uint32_t d = in.uint(4, "record dims");
      if (d == 0) in.fail("record '" + r.name + "' has a zero dimension", start);
      dims.push_back(static_cast<Index>(d));
      count *= d;
      if (count > (bytes.size() / 4) + 1) in.fail("record '" + r.name + "' payload exceeds the file", start);
    }
    TensorF::Storage values(static_cast<Index>(count));
    for (std::uint64_t i = 0; i < count; ++i) values[static_cast<Index>(i)] = std::bit_cast<float>(in.uint(4, "record payload"));
    r.tensor = TensorF(std::move(dims), std::move(values));
    records.push_back(std::move(r));
  }
  return records;
}

// ---------------------------------------------------------------- bundle mapping

namespace {

TensorF vector_tensor(const std::vector<float>& v) {
  TensorF t({static_cast<Index>(v.size())});
  for (std::size_t i = 0; i < v.size(); ++i) t[static_cast<Index>(i)] = v[i];
  return t;
}

TensorF eigen_tensor(const Eigen::VectorXf& v) { return TensorF({v.size()}, v); }

void add_stream(std::vector<NamedTensor>& out, const std::string& prefix, const StreamParams<float>& s) {
  std::vector<float> cfg{static_cast<float>(s.config.inputSidePx), static_cast<float>(s.config.featureDim),
                         static_cast<float>(s.config.convUnits.size())};
  for (const auto& u : s.config.convUnits) {
    cfg.push_back(static_cast<float>(u.outChannels));
    cfg.push_back(static_cast<float>(u.kernel));
    cfg.push_back(static_cast<float>(u.stride));
  }
  out.push_back({prefix + "config", vector_tensor(cfg)});
  for (std::size_t i = 0; i < s.units.size(); ++i) {
    const auto& u = s.units[i];
    const std::string p = prefix + "unit" + std::to_string(i) + "/";
    out.push_back({p + "weights", u.weights});
    out.push_back({p + "bias", u.bias});
    out.push_back({p + "gamma", u.gamma});
    out.push_back({p + "beta", u.beta});
    out.push_back({p + "running_mean", u.running_mean});
    out.push_back({p + "running_var", u.running_var});
    out.push_back({p + "bn", vector_tensor({u.epsilon, u.momentum})});
  }
  out.push_back({prefix + "projection/weights", s.projection.weights});
  out.push_back({prefix + "projection/bias", s.projection.bias});
}

void add_model(std::vector<NamedTensor>& out, const std::string& prefix, const McdnModel<float>& m) {
  out.push_back({prefix + "/layout", vector_tensor({static_cast<float>(static_cast<int>(m.layout))})});
  if (m.uses_global()) add_stream(out, prefix + "/global/", m.global);
  if (m.uses_local()) add_stream(out, prefix + "/local/", m.local);
  out.push_back({prefix + "/head/weights", m.head.weights});
  out.push_back({prefix + "/head/bias", m.head.bias});
}

class RecordTable {
 public:
  RecordTable(const std::vector<NamedTensor>& records, const std::string& source) : source_(source) {
    for (const auto& r : records) table_.emplace(r.name, &r.tensor);
  }

  bool has(const std::string& name) const { return table_.count(name) != 0; }

  const TensorF& get(const std::string& name, const Shape& dims = {}) {
    const auto it = table_.find(name);
    if (it == table_.end()) throw ModelFormatError(source_ + ": missing record '" + name + "'");
    if (!dims.empty() && it->second->dims() != dims)
      throw ModelFormatError(source_ + ": record '" + name + "' has dims " + shape_string(it->second->dims()) +
                             ", expected " + shape_string(dims));
    used_.insert(name);
    return *it->second;
  }

  Index integer(const TensorF& t, Index i, const std::string& name) const {
    const float v = t[i];
    if (!(v >= 0.0f && v < 16777216.0f) || v != std::floor(v))
      throw ModelFormatError(source_ + ": record '" + name + "' holds a non-integer configuration value");
    return static_cast<Index>(v);
  }

  void check_all_used() const {
    for (const auto& [name, _] : table_)
      if (!used_.count(name)) throw ModelFormatError(source_ + ": unexpected record '" + name + "'");
  }

  const std::string& source() const { return source_; }

 private:
  std::map<std::string, const TensorF*> table_;
  std::set<std::string> used_;
  std::string source_;
};

StreamParams<float> read_stream(RecordTable& table, const std::string& prefix) {
  const std::string cfg_name = prefix + "config";
  const TensorF& cfg = table.get(cfg_name);
  if (cfg.rank() != 1 || cfg.size() < 3)
    throw ModelFormatError(table.source() + ": record '" + cfg_name + "' is malformed");
  StreamConfig config;
  config.inputSidePx = table.integer(cfg, 0, cfg_name);
  config.featureDim = table.integer(cfg, 1, cfg_name);
  const Index n = table.integer(cfg, 2, cfg_name);
  if (cfg.size() != 3 + 3 * n) throw ModelFormatError(table.source() + ": record '" + cfg_name + "' is malformed");
  config.convUnits.clear();
  for (Index i = 0; i < n; ++i)
    config.convUnits.push_back({table.integer(cfg, 3 + 3 * i, cfg_name), table.integer(cfg, 4 + 3 * i, cfg_name),
                                table.integer(cfg, 5 + 3 * i, cfg_name)});
  StreamParams<float> s;
  try {
    s = StreamParams<float>::make(config);
  } catch (const ContractError& e) {
    throw ModelFormatError(table.source() + ": record '" + cfg_name + "' is invalid: " + e.what());
  }
  for (std::size_t i = 0; i < s.units.size(); ++i) {
    auto& u = s.units[i];
    const std::string p = prefix + "unit" + std::to_string(i) + "/";
    const Index oc = u.out_channels();
    u.weights = table.get(p + "weights", u.weights.dims());
    u.bias = table.get(p + "bias", {oc});
    u.gamma = table.get(p + "gamma", {oc});
    u.beta = table.get(p + "beta", {oc});
    u.running_mean = table.get(p + "running_mean", {oc});
    u.running_var = table.get(p + "running_var", {oc});
    const TensorF& bn = table.get(p + "bn", {2});
    u.epsilon = bn[0];
    u.momentum = bn[1];
    try {
      u.validate();
    } catch (const ContractError& e) {
      throw ModelFormatError(table.source() + ": " + p + ": " + e.what());
    }
  }
  s.projection.weights = table.get(prefix + "projection/weights", s.projection.weights.dims());
  s.projection.bias = table.get(prefix + "projection/bias", s.projection.bias.dims());
  return s;
}

McdnModel<float> read_model(RecordTable& table, const std::string& prefix) {
  const std::string layout_name = prefix + "/layout";
  const TensorF& layout = table.get(layout_name, {1});
  const Index code = table.integer(layout, 0, layout_name);
  if (code > 2) throw ModelFormatError(table.source() + ": record '" + layout_name + "' holds an unknown layout");
  McdnModel<float> m;
  m.layout = static_cast<StreamLayout>(code);
  if (m.uses_global()) m.global = read_stream(table, prefix + "/global/");
  if (m.uses_local()) m.local = read_stream(table, prefix + "/local/");
  const Index width = m.global.feature_dim() + m.local.feature_dim();
  m.head.weights = table.get(prefix + "/head/weights", {1, width});
  m.head.bias = table.get(prefix + "/head/bias", {1});
  return m;
}

}  // namespace

std::vector<NamedTensor> bundle_records(const ScreeningBundle& bundle) {
  std::vector<NamedTensor> out;
  add_model(out, "mcdn", bundle.mcdn);
  if (bundle.globalOnly) add_model(out, "global_only", *bundle.globalOnly);
  if (bundle.localOnly) add_model(out, "local_only", *bundle.localOnly);
  const LinearSvmModel& svm = bundle.svm;
  svm.validate();
  out.push_back({"svm/weights", eigen_tensor(svm.weights)});
  out.push_back({"svm/bias", vector_tensor({svm.biasTerm})});
  if (svm.calibrated) out.push_back({"svm/platt", vector_tensor({svm.plattA, svm.plattB})});
  out.push_back({"svm/mean", eigen_tensor(svm.featureMeans)});
  out.push_back({"svm/scale", eigen_tensor(svm.featureScales)});
  return out;
}

ScreeningBundle bundle_from_records(const std::vector<NamedTensor>& records, const std::string& source) {
  RecordTable table(records, source);
  ScreeningBundle b;
  b.mcdn = read_model(table, "mcdn");
  if (table.has("global_only/layout")) b.globalOnly = read_model(table, "global_only");
  if (table.has("local_only/layout")) b.localOnly = read_model(table, "local_only");
  const TensorF& w = table.get("svm/weights");
  const Index d = w.size();
  b.svm.weights = w.values();
  b.svm.biasTerm = table.get("svm/bias", {1})[0];
  b.svm.featureMeans = table.get("svm/mean", {d}).values();
  b.svm.featureScales = table.get("svm/scale", {d}).values();
  if (table.has("svm/platt")) {
    const TensorF& platt = table.get("svm/platt", {2});
    b.svm.plattA = platt[0];
    b.svm.plattB = platt[1];
    b.svm.calibrated = true;
  }
  try {
    b.svm.validate();
  } catch (const ContractError& e) {
    throw ModelFormatError(source + ": " + e.what());
  }
  table.check_all_used();
  return b;
}

void save_model(const ScreeningBundle& bundle, const std::filesystem::path& path) {
  const std::string bytes = encode_container(bundle_records(bundle));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

ScreeningBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFormatError("cannot open model file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bundle_from_records(decode_container(bytes, path.string()), path.string());
}

}  // namespace mcdn
