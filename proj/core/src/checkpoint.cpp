#include "waferseg/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "waferseg/binio.hpp"

namespace waferseg {

namespace {
constexpr char kMagic[4] = {'W', 'C', 'P', '1'};
constexpr uint16_t kVersion = 1;

std::string config_text(const ModelConfig& c) {
  std::ostringstream os;
  os << "variant=" << to_string(c.variant) << "\n"
     << "skipCount=" << c.skipCount << "\n"
     << "residualShortcuts=" << (c.residualShortcuts ? 1 : 0) << "\n"
     << "initMode=" << to_string(c.initMode) << "\n"
     << "numClasses=" << c.numClasses << "\n"
     << "decoderWidth=" << c.decoderWidth << "\n";
  return os.str();
}

ModelConfig config_from_text(const std::string& text) {
  ModelConfig c;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string k = line.substr(0, eq), v = line.substr(eq + 1);
    if (k == "variant") c.variant = variant_from_string(v);
    else if (k == "skipCount") c.skipCount = std::stoi(v);
    else if (k == "residualShortcuts") c.residualShortcuts = v == "1";
    else if (k == "initMode") c.initMode = init_mode_from_string(v);
    else if (k == "numClasses") c.numClasses = std::stoi(v);
    else if (k == "decoderWidth") c.decoderWidth = std::stoi(v);
  }
  return c;
}

void put_record(std::ostream& os, const std::string& name, const Tensor& t) {
  binio::put_u16(os, static_cast<uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  const Shape4 s = t.shape();
  binio::put_u32(os, s.n);
  binio::put_u32(os, s.c);
  binio::put_u32(os, s.h);
  binio::put_u32(os, s.w);
  for (long long i = 0; i < t.size(); ++i) binio::put_f32(os, static_cast<float>(t[i]));
}

ParamRecord get_record(std::istream& is) {
  ParamRecord r;
  const uint16_t n = binio::get_u16(is);
  r.name.resize(n);
  is.read(r.name.data(), n);
  r.shape.n = static_cast<int>(binio::get_u32(is));
  r.shape.c = static_cast<int>(binio::get_u32(is));
  r.shape.h = static_cast<int>(binio::get_u32(is));
  r.shape.w = static_cast<int>(binio::get_u32(is));
  r.data.resize(static_cast<size_t>(r.shape.size()));
  for (auto& v : r.data) v = binio::get_f32(is);
  return r;
}
}  // namespace

void quantize_f32(Tensor& t) {
  for (long long i = 0; i < t.size(); ++i) t[i] = static_cast<double>(static_cast<float>(t[i]));
}

const ParamRecord* CheckpointData::find(const std::string& name) const {
  for (const auto& r : params)
    if (r.name == name) return &r;
  return nullptr;
}

void save_checkpoint(const std::string& path, Model& model, const OptimizerBlob* opt,
                     uint32_t epoch) {
  for (auto& p : model.params()) quantize_f32(p.var->value);
  auto bns = model.bn_states();
  for (auto& b : bns) {
    quantize_f32(b.state->running_mean);
    quantize_f32(b.state->running_var);
  }

  std::ostringstream os(std::ios::binary);
  os.write(kMagic, 4);
  binio::put_u16(os, kVersion);
  binio::put_str(os, config_text(model.config()));
  binio::put_u32(os, static_cast<uint32_t>(model.params().size() + 2 * bns.size()));
  for (const auto& p : model.params()) put_record(os, p.name, p.var->value);
  for (const auto& b : bns) {
    put_record(os, b.name + ".running_mean", b.state->running_mean);
    put_record(os, b.name + ".running_var", b.state->running_var);
  }
  if (opt) {
    OptimizerBlob& o = const_cast<OptimizerBlob&>(*opt);
    for (auto& t : o.m) quantize_f32(t);
    for (auto& t : o.v) quantize_f32(t);
    os.put(1);
    binio::put_u64(os, o.step);
    binio::put_f64(os, o.lr);
    binio::put_u32(os, static_cast<uint32_t>(o.m.size()));
    for (size_t i = 0; i < o.m.size(); ++i) {
      put_record(os, "adam.m." + std::to_string(i), o.m[i]);
      put_record(os, "adam.v." + std::to_string(i), o.v[i]);
    }
  } else {
    os.put(0);
  }
  binio::put_u32(os, epoch);
  binio::atomic_write(path, os.str());
}

CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("'" + path + "' is not a checkpoint (bad magic)");
  if (binio::get_u16(is) != kVersion)
    throw std::runtime_error("checkpoint '" + path + "': unsupported version");
  CheckpointData d;
  d.config = config_from_text(binio::get_str(is));
  const uint32_t n = binio::get_u32(is);
  d.params.reserve(n);
  for (uint32_t i = 0; i < n; ++i) d.params.push_back(get_record(is));
  d.has_optimizer = is.get() == 1;
  if (d.has_optimizer) {
    d.optimizer.step = binio::get_u64(is);
    d.optimizer.lr = binio::get_f64(is);
    const uint32_t k = binio::get_u32(is);
    for (uint32_t i = 0; i < k; ++i) {
      ParamRecord m = get_record(is);
      ParamRecord v = get_record(is);
      d.optimizer.m.emplace_back(m.shape, std::move(m.data));
      d.optimizer.v.emplace_back(v.shape, std::move(v.data));
    }
  }
  d.epoch = binio::get_u32(is);
  if (!is) throw std::runtime_error("checkpoint '" + path + "': truncated");
  return d;
}

Model model_from_checkpoint(const CheckpointData& data) {
  ModelConfig build_cfg = data.config;
  build_cfg.initMode = InitMode::he;  // parameters are overwritten below
  Model m = Model::build(build_cfg, 0);
  m.config_ = data.config;
  for (auto& p : m.params()) {
    const ParamRecord* r = data.find(p.name);
    if (!r) throw std::runtime_error("checkpoint is missing parameter '" + p.name + "'");
    if (!(r->shape == p.var->value.shape()))
      throw std::runtime_error("checkpoint parameter '" + p.name + "' has shape " +
                               r->shape.str() + ", model expects " + p.var->value.shape().str());
    p.var->value = Tensor(r->shape, r->data);
  }
  for (auto& b : m.bn_states()) {
    const ParamRecord* rm = data.find(b.name + ".running_mean");
    const ParamRecord* rv = data.find(b.name + ".running_var");
    if (!rm || !rv)
      throw std::runtime_error("checkpoint is missing running statistics for '" + b.name + "'");
    b.state->running_mean = Tensor(rm->shape, rm->data);
    b.state->running_var = Tensor(rv->shape, rv->data);
  }
  return m;
}

}  // namespace waferseg
