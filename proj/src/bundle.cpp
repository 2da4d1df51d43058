#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "pgmsc/detail/byteio.hpp"
#include "pgmsc/error.hpp"
#include "pgmsc/pipeline.hpp"

// Bundle layout (little-endian):
//   8-byte magic "PGMSCBN\0", u32 version, u64 json length, JSON text,
//   u64 count, count f64 values, u64 FNV-1a over every preceding byte.
// The JSON holds structure; every real number lives in the f64 array and is
// referenced by {"off", "len"} so values round-trip bit for bit.

namespace pgmsc {

using nlohmann::json;

namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'P', 'G', 'M', 'S', 'C', 'B', 'N', 0};

class DoublePool {
 public:
  json add(std::span<const double> values) {
    json ref{{"off", data_.size()}, {"len", values.size()}};
    data_.insert(data_.end(), values.begin(), values.end());
    return ref;
  }
  json add(double v) { return add(std::span<const double>(&v, 1)); }
  const std::vector<double>& data() const { return data_; }

 private:
  std::vector<double> data_;
};

class DoubleView {
 public:
  explicit DoubleView(std::vector<double> data) : data_(std::move(data)) {}

  std::vector<double> get(const json& ref) const {
    const auto off = ref.at("off").get<std::size_t>();
    const auto len = ref.at("len").get<std::size_t>();
    if (off > data_.size() || len > data_.size() - off) throw Error(Errc::corrupt, "bundle array reference out of range");
    return {data_.begin() + static_cast<std::ptrdiff_t>(off), data_.begin() + static_cast<std::ptrdiff_t>(off + len)};
  }
  double scalar(const json& ref) const {
    auto v = get(ref);
    if (v.size() != 1) throw Error(Errc::corrupt, "bundle scalar has wrong length");
    return v[0];
  }

 private:
  std::vector<double> data_;
};

json layer_json(const DenseLayer& l, DoublePool& pool) {
  return json{{"in", l.in}, {"out", l.out}, {"weight", pool.add(l.weight)}, {"bias", pool.add(l.bias)}};
}

DenseLayer layer_from(const json& j, const DoubleView& view) {
  DenseLayer l;
  l.in = j.at("in").get<int>();
  l.out = j.at("out").get<int>();
  l.weight = view.get(j.at("weight"));
  l.bias = view.get(j.at("bias"));
  return l;
}

json encode_structure(const ModelBundle& b, DoublePool& pool) {
  json j;
  j["block_dims"] = b.schema.block_dims();

  json feats = json::array();
  for (int f = 0; f < b.codebook.num_features(); ++f) {
    const auto& feat = b.codebook.feature(f);
    feats.push_back({{"dim", feat.dim}, {"centers", pool.add(feat.centers)}, {"inertia", pool.add(feat.inertia)}});
  }
  j["codebook"] = feats;

  json edges = json::array();
  for (const auto& e : b.network.dag().edges()) edges.push_back({e.parent, e.child});
  json cpds = json::array();
  for (const auto& c : b.network.cpds()) cpds.push_back(pool.add(c.table));
  j["network"] = {{"cardinalities", b.network.cardinalities()}, {"edges", edges}, {"tables", cpds}};

  std::vector<double> weights;
  std::vector<int> has_weight;
  for (const auto& w : b.profile.weights) {
    has_weight.push_back(w.has_value() ? 1 : 0);
    weights.push_back(w.value_or(0.0));
  }
  j["profile"] = {{"importance", pool.add(b.profile.importance)},
                  {"retained", b.profile.retained},
                  {"has_weight", has_weight},
                  {"weights", pool.add(weights)}};

  json pairs = json::array();
  for (const auto& [m, p] : b.coder.pairs()) {
    json enc = json::array(), dec = json::array();
    for (const auto& l : p.encoder) enc.push_back(layer_json(l, pool));
    for (const auto& l : p.decoder) dec.push_back(layer_json(l, pool));
    json pj{{"m", p.m}, {"k", p.k}, {"arch", arch_name(p.arch)}, {"hidden", p.hidden}, {"encoder", enc}, {"decoder", dec}};
    if (auto it = b.coder.records().find(m); it != b.coder.records().end()) {
      const auto& r = it->second;
      pj["record"] = {{"epochs", r.epochs},
                      {"lr", pool.add(r.lr)},
                      {"final_loss", pool.add(r.final_loss)},
                      {"epoch_loss", pool.add(r.epoch_loss)}};
    }
    pairs.push_back(pj);
  }
  j["coder"] = pairs;

  j["config"] = json::parse(config_to_json(b.config));
  j["value_range"] = pool.add(b.value_range);
  return j;
}

ModelBundle decode_structure(const json& j, const DoubleView& view) {
  ModelBundle b;
  b.schema = FeatureSchema(j.at("block_dims").get<std::vector<int>>());

  std::vector<Codebook::Feature> feats;
  for (const auto& fj : j.at("codebook")) {
    feats.push_back({fj.at("dim").get<int>(), view.get(fj.at("centers")), view.scalar(fj.at("inertia"))});
  }
  b.codebook = Codebook(b.schema, std::move(feats));

  const auto& nj = j.at("network");
  auto cards = nj.at("cardinalities").get<std::vector<int>>();
  std::vector<Edge> edges;
  for (const auto& e : nj.at("edges")) edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  Dag dag(static_cast<int>(cards.size()), edges);
  const auto& tables = nj.at("tables");
  if (tables.size() != cards.size()) throw Error(Errc::corrupt, "bundle CPD count differs from node count");
  std::vector<Cpd> cpds;
  for (int v = 0; v < static_cast<int>(cards.size()); ++v) {
    Cpd c;
    c.node = v;
    c.parents = dag.parents(v);
    for (int p : c.parents) c.parent_cards.push_back(cards.at(p));
    c.card = cards[v];
    c.table = view.get(tables[v]);
    cpds.push_back(std::move(c));
  }
  b.network = BayesianNetwork(std::move(dag), std::move(cards), std::move(cpds));

  const auto& pj = j.at("profile");
  b.profile.importance = view.get(pj.at("importance"));
  b.profile.retained = pj.at("retained").get<std::vector<int>>();
  const auto has_weight = pj.at("has_weight").get<std::vector<int>>();
  const auto weights = view.get(pj.at("weights"));
  if (has_weight.size() != weights.size()) throw Error(Errc::corrupt, "bundle weight arrays differ in length");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    b.profile.weights.push_back(has_weight[i] ? std::optional<double>(weights[i]) : std::nullopt);
  }

  std::map<int, CodecPair> pairs;
  std::map<int, TrainingRecord> records;
  for (const auto& cj : j.at("coder")) {
    CodecPair p;
    p.m = cj.at("m").get<int>();
    p.k = cj.at("k").get<int>();
    p.arch = parse_arch(cj.at("arch").get<std::string>());
    p.hidden = cj.at("hidden").get<int>();
    for (const auto& l : cj.at("encoder")) p.encoder.push_back(layer_from(l, view));
    for (const auto& l : cj.at("decoder")) p.decoder.push_back(layer_from(l, view));
    if (cj.contains("record")) {
      const auto& rj = cj.at("record");
      TrainingRecord r;
      r.epochs = rj.at("epochs").get<int>();
      r.lr = view.scalar(rj.at("lr"));
      r.final_loss = view.scalar(rj.at("final_loss"));
      r.epoch_loss = view.get(rj.at("epoch_loss"));
      records[p.m] = std::move(r);
    }
    pairs.emplace(p.m, std::move(p));
  }
  b.coder = ChannelCoder(std::move(pairs));
  b.coder.records() = std::move(records);

  b.config = config_from_json(j.at("config").dump());
  b.value_range = view.scalar(j.at("value_range"));
  return b;
}

}  // namespace

std::vector<std::uint8_t> serialize_bundle(const ModelBundle& bundle) {
  DoublePool pool;
  const std::string text = encode_structure(bundle, pool).dump();
  detail::ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint32_t>(bundle.format_version);
  w.put<std::uint64_t>(text.size());
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  w.put<std::uint64_t>(pool.data().size());
  for (double v : pool.data()) w.put_f64(v);
  const auto checksum = detail::fnv1a(w.bytes());
  w.put<std::uint64_t>(checksum);
  return std::move(w.bytes());
}

ModelBundle deserialize_bundle(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() + 4 + 8 + 8 + 8 || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(Errc::corrupt, "not a model bundle");
  }
  const auto body = bytes.first(bytes.size() - 8);
  detail::ByteReader tail(bytes.last(8));
  if (tail.get<std::uint64_t>() != detail::fnv1a(body)) throw Error(Errc::corrupt, "bundle checksum mismatch");

  detail::ByteReader r(body);
  r.get_bytes(kMagic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != kBundleVersion) {
    throw Error(Errc::version_mismatch, "bundle format version " + std::to_string(version) + ", expected " +
                                            std::to_string(kBundleVersion));
  }
  const auto json_len = r.get<std::uint64_t>();
  if (json_len > r.remaining()) throw Error(Errc::corrupt, "bundle header length out of range");
  const auto text = r.get_bytes(static_cast<std::size_t>(json_len));
  const auto count = r.get<std::uint64_t>();
  if (count > r.remaining() / 8) throw Error(Errc::corrupt, "bundle array length out of range");
  std::vector<double> data(static_cast<std::size_t>(count));
  for (double& v : data) v = r.get_f64();
  if (r.remaining() != 0) throw Error(Errc::corrupt, "trailing bytes in bundle");

  ModelBundle b;
  try {
    const json j = json::parse(text.begin(), text.end());
    b = decode_structure(j, DoubleView(std::move(data)));
  } catch (const json::exception& e) {
    throw Error(Errc::corrupt, std::string("bundle structure: ") + e.what());
  }
  b.format_version = version;
  b.validate();
  return b;
}

void save_bundle(const ModelBundle& bundle, const std::filesystem::path& path) {
  const auto bytes = serialize_bundle(bundle);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write bundle " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "failed writing bundle " + path.string());
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open bundle " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_bundle(bytes);
}

}  // namespace pgmsc
