#include "prolt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "prolt/errors.hpp"

namespace prolt {
namespace {

using nlohmann::json;

constexpr std::string_view kMagic = "PROLTCK1";

std::uint64_t to_le64(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap64(v);
  return v;
}

std::uint32_t to_le32(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  return v;
}

json describe(const Mlp& net) {
  json layers = json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({{"in", l.in_dim()},
                      {"out", l.out_dim()},
                      {"activation", l.activation == Activation::relu ? "relu" : "identity"},
                      {"dropout", l.dropout}});
  }
  return layers;
}

void put_doubles(std::string& out, std::span<const double> values) {
  for (double v : values) {
    const std::uint64_t raw = to_le64(std::bit_cast<std::uint64_t>(v));
    char buf[8];
    std::memcpy(buf, &raw, 8);
    out.append(buf, 8);
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw ValidationError("checkpoint is truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  double f64() {
    std::uint64_t raw = 0;
    std::memcpy(&raw, take(8).data(), 8);
    return std::bit_cast<double>(to_le64(raw));
  }
  std::uint32_t u32() {
    std::uint32_t raw = 0;
    std::memcpy(&raw, take(4).data(), 4);
    return to_le32(raw);
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

Mlp read_net(const json& layers, Reader& r) {
  std::vector<DenseLayer> out;
  for (const auto& spec : layers) {
    DenseLayer l;
    const auto in = spec.at("in").get<std::size_t>();
    const auto outd = spec.at("out").get<std::size_t>();
    l.weight = Matrix(outd, in);
    for (double& v : l.weight.values()) v = r.f64();
    l.bias.resize(outd);
    for (double& v : l.bias) v = r.f64();
    l.activation = spec.at("activation").get<std::string>() == "relu" ? Activation::relu : Activation::identity;
    l.dropout = spec.at("dropout").get<double>();
    out.push_back(std::move(l));
  }
  return Mlp(std::move(out));
}

std::vector<double> read_vec(std::size_t n, Reader& r) {
  std::vector<double> v(n);
  for (double& x : v) x = r.f64();
  return v;
}

}  // namespace

std::string serialize_checkpoint(const Model& m) {
  const PrototypeClassifier* clfs[] = {&m.state_clf, &m.object_clf, &m.composition_clf};
  const char* names[] = {"state", "object", "composition"};
  json header;
  header["format_version"] = 1;
  header["space_hash"] = m.space_hash;
  header["prior_mode"] = to_string(m.prior_mode);
  header["k_form"] = to_string(m.k_form);
  header["eta"] = m.eta;
  header["lambda"] = m.lambda;
  header["prior"] = {{"epoch", m.prior.epoch},
                     {"states", m.prior.state_prior.size()},
                     {"objects", m.prior.object_prior.size()},
                     {"pairs", m.prior.k.size()}};
  for (int i = 0; i < 3; ++i) {
    header["classifiers"][names[i]] = {{"temperature", clfs[i]->temperature()},
                                       {"embedder", describe(clfs[i]->embedder())},
                                       {"prototype", describe(clfs[i]->prototype_learner())}};
  }
  const std::string head = header.dump();
  std::string out(kMagic);
  const std::uint32_t len = to_le32(static_cast<std::uint32_t>(head.size()));
  char buf[4];
  std::memcpy(buf, &len, 4);
  out.append(buf, 4);
  out += head;
  for (const auto* c : clfs) {
    for (auto block : c->parameters()) put_doubles(out, block);
  }
  put_doubles(out, m.prior.state_prior);
  put_doubles(out, m.prior.object_prior);
  put_doubles(out, m.prior.k);
  return out;
}

Model deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < kMagic.size() || r.take(kMagic.size()) != kMagic) {
    throw ValidationError("not a prolt checkpoint");
  }
  const std::uint32_t len = r.u32();
  json header;
  try {
    header = json::parse(r.take(len));
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("checkpoint header is corrupt: ") + e.what());
  }
  Model m;
  try {
    if (header.at("format_version").get<int>() != 1) throw ValidationError("unsupported checkpoint version");
    m.space_hash = header.at("space_hash").get<std::string>();
    m.prior_mode = prior_mode_from_string(header.at("prior_mode").get<std::string>());
    m.k_form = k_form_from_string(header.at("k_form").get<std::string>());
    m.eta = header.at("eta").get<double>();
    m.lambda = header.at("lambda").get<double>();
    PrototypeClassifier* clfs[] = {&m.state_clf, &m.object_clf, &m.composition_clf};
    const char* names[] = {"state", "object", "composition"};
    for (int i = 0; i < 3; ++i) {
      const auto& c = header.at("classifiers").at(names[i]);
      Mlp embedder = read_net(c.at("embedder"), r);
      Mlp prototype = read_net(c.at("prototype"), r);
      *clfs[i] = PrototypeClassifier(std::move(embedder), std::move(prototype), c.at("temperature").get<double>());
    }
    const auto& p = header.at("prior");
    m.prior.epoch = p.at("epoch").get<std::size_t>();
    m.prior.state_prior = read_vec(p.at("states").get<std::size_t>(), r);
    m.prior.object_prior = read_vec(p.at("objects").get<std::size_t>(), r);
    m.prior.k = read_vec(p.at("pairs").get<std::size_t>(), r);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("checkpoint header is malformed: ") + e.what());
  }
  if (!r.done()) throw ValidationError("checkpoint has trailing bytes");
  return m;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Model load_checkpoint(const std::filesystem::path& path, const std::string& expected_space_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  Model m = deserialize_checkpoint(ss.str());
  if (m.space_hash != expected_space_hash) {
    throw ValidationError("checkpoint was trained on composition space " + m.space_hash.substr(0, 12) +
                          "..., bundle has " + expected_space_hash.substr(0, 12) + "...; refusing to evaluate");
  }
  return m;
}

}  // namespace prolt
