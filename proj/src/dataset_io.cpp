#include "smnist/dataset_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace smnist {

using nlohmann::json;

idx::IdxImageSet to_idx_images(const LabeledSet& set) {
  idx::IdxImageSet out;
  out.count = static_cast<std::uint32_t>(set.images.size());
  out.rows = static_cast<std::uint32_t>(set.height);
  out.cols = static_cast<std::uint32_t>(set.width);
  out.pixels.reserve(set.images.size() * out.image_size());
  for (const auto& g : set.images) out.pixels.insert(out.pixels.end(), g.data.begin(), g.data.end());
  return out;
}

idx::IdxLabelSet to_idx_labels(const LabeledSet& set) {
  idx::IdxLabelSet out;
  out.count = static_cast<std::uint32_t>(set.labels.size());
  for (int l : set.labels) out.labels.push_back(static_cast<std::uint8_t>(l));
  return out;
}

LabeledSet from_idx(const idx::IdxImageSet& images, const idx::IdxLabelSet& labels) {
  if (images.count != labels.count) {
    throw idx::IdxError(idx::ErrorKind::kBufferMismatch,
                        "dataset: " + std::to_string(images.count) + " images but " +
                            std::to_string(labels.count) + " labels");
  }
  LabeledSet set;
  set.width = static_cast<int>(images.cols);
  set.height = static_cast<int>(images.rows);
  set.images.reserve(images.count);
  for (std::size_t i = 0; i < images.count; ++i) {
    PixelGrid g(set.width, set.height);
    auto src = images.image(i);
    std::copy(src.begin(), src.end(), g.data.begin());
    set.images.push_back(std::move(g));
    set.labels.push_back(labels.labels[i]);
  }
  return set;
}

std::string encode_objects(const std::vector<PlacedObject>& objects) {
  std::string out;
  for (const auto& o : objects) {
    if (!out.empty()) out.push_back(' ');
    out.push_back(stamp_tag(o.kind));
    out += std::to_string(o.center.row);
    out.push_back(',');
    out += std::to_string(o.center.col);
  }
  return out;
}

std::vector<PlacedObject> decode_objects(const std::string& text) {
  std::vector<PlacedObject> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    const auto comma = tok.find(',');
    if (tok.size() < 4 || comma == std::string::npos) {
      throw std::invalid_argument("dataset: malformed object token '" + tok + "'");
    }
    PlacedObject o;
    o.kind = stamp_from_tag(tok[0]);
    o.center.row = std::stoi(tok.substr(1, comma - 1));
    o.center.col = std::stoi(tok.substr(comma + 1));
    out.push_back(o);
  }
  return out;
}

namespace {

json points_json(const std::vector<Point>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.row, p.col});
  return a;
}

std::vector<Point> points_from(const json& a) {
  std::vector<Point> out;
  for (const auto& p : a) out.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  return out;
}

json spec_json(const DatasetSpec& s) {
  return {
      {"series", to_string(s.series)},
      {"variant", to_string(s.variant)},
      {"stamp", to_string(s.stamp)},
      {"m", s.m},
      {"distribution",
       {{"kind", to_string(s.train_distribution.kind)},
        {"uniform_mix", s.train_distribution.uniform_mix},
        {"min_count", s.train_distribution.min_count}}},
      {"train_count", s.train_count},
      {"test_count", s.test_count},
      {"test_positions", s.resolved_test_positions()},
      {"seed", s.seed},
      {"rejection_limit", s.rejection_limit},
      {"enumeration_limit", s.enumeration_limit},
  };
}

DatasetSpec spec_from(const json& j) {
  DatasetSpec s;
  s.series = parse_series(j.at("series").get<std::string>());
  s.variant = parse_variant(j.at("variant").get<std::string>());
  s.stamp = parse_stamp(j.at("stamp").get<std::string>());
  s.m = j.at("m").get<int>();
  const auto& d = j.at("distribution");
  s.train_distribution.kind = parse_count_kind(d.at("kind").get<std::string>());
  s.train_distribution.m = s.m;
  s.train_distribution.uniform_mix = d.at("uniform_mix").get<double>();
  s.train_distribution.min_count = d.at("min_count").get<int>();
  s.train_count = j.at("train_count").get<std::size_t>();
  s.test_count = j.at("test_count").get<std::size_t>();
  s.test_positions = j.at("test_positions").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.rejection_limit = j.at("rejection_limit").get<int>();
  s.enumeration_limit = j.at("enumeration_limit").get<std::size_t>();
  return s;
}

std::string_view scope_name(ExhaustionScope s) {
  switch (s) {
    case ExhaustionScope::kTrain: return "train";
    case ExhaustionScope::kTest: return "test";
    case ExhaustionScope::kShared: return "shared";
  }
  return "?";
}

ExhaustionScope scope_from(const std::string& s) {
  if (s == "train") return ExhaustionScope::kTrain;
  if (s == "test") return ExhaustionScope::kTest;
  if (s == "shared") return ExhaustionScope::kShared;
  throw std::invalid_argument("dataset: unknown exhaustion scope '" + s + "'");
}

std::string file_name(const char* base, bool gzip) {
  return gzip ? std::string(base) + ".gz" : std::string(base);
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const DatasetPair& pair, bool gzip) {
  std::filesystem::create_directories(dir);
  idx::save_file(dir / file_name(idx::kTrainImagesFile, gzip),
                 idx::write_images(to_idx_images(pair.train)), gzip);
  idx::save_file(dir / file_name(idx::kTrainLabelsFile, gzip),
                 idx::write_labels(to_idx_labels(pair.train)), gzip);
  idx::save_file(dir / file_name(idx::kTestImagesFile, gzip),
                 idx::write_images(to_idx_images(pair.test)), gzip);
  idx::save_file(dir / file_name(idx::kTestLabelsFile, gzip),
                 idx::write_labels(to_idx_labels(pair.test)), gzip);

  json m;
  m["format"] = "smnist-manifest/1";
  m["spec"] = spec_json(pair.spec);
  if (pair.partition) {
    m["partition"] = {{"train_side", points_json(pair.partition->train_side)},
                      {"test_side", points_json(pair.partition->test_side)}};
  }
  m["histograms"] = {{"train", histogram(pair.train)}, {"test", histogram(pair.test)}};
  json ex = json::array();
  for (const auto& e : pair.exhausted) {
    ex.push_back({{"scope", scope_name(e.scope)}, {"label", e.label}, {"complete", e.complete}});
  }
  m["exhausted"] = ex;
  for (Split s : {Split::kTrain, Split::kTest}) {
    json log = json::array();
    for (const auto& objs : pair.split(s).objects) log.push_back(encode_objects(objs));
    m["objects"][std::string(to_string(s))] = std::move(log);
  }
  std::ofstream out(dir / kManifestFile, std::ios::trunc);
  out << m.dump() << '\n';
  if (!out) throw std::runtime_error("dataset: cannot write manifest in " + dir.string());
}

DatasetPair load_dataset(const std::filesystem::path& dir) {
  DatasetPair pair;
  auto load_split = [&](const char* images, const char* labels) {
    auto img = idx::read_images(idx::load_file(idx::find_file(dir, images)));
    auto lbl = idx::read_labels(idx::load_file(idx::find_file(dir, labels)));
    return from_idx(img, lbl);
  };
  pair.train = load_split(idx::kTrainImagesFile, idx::kTrainLabelsFile);
  pair.test = load_split(idx::kTestImagesFile, idx::kTestLabelsFile);

  std::ifstream in(dir / kManifestFile);
  if (!in) throw std::runtime_error("dataset: no manifest.json in " + dir.string());
  const json m = json::parse(in);
  pair.spec = spec_from(m.at("spec"));
  if (m.contains("partition")) {
    PixelPartition p;
    p.universe = pair.spec.center_universe();
    p.train_side = points_from(m["partition"].at("train_side"));
    p.test_side = points_from(m["partition"].at("test_side"));
    pair.partition = std::move(p);
  }
  for (const auto& e : m.at("exhausted")) {
    pair.exhausted.push_back({scope_from(e.at("scope").get<std::string>()),
                              e.at("label").get<int>(), e.at("complete").get<bool>()});
  }
  std::array<Histogram, 2> hist{};
  hist[0] = m.at("histograms").at("train").get<Histogram>();
  hist[1] = m.at("histograms").at("test").get<Histogram>();
  pair.recorded_histograms = hist;
  if (m.contains("objects")) {
    for (Split s : {Split::kTrain, Split::kTest}) {
      auto& set = s == Split::kTrain ? pair.train : pair.test;
      for (const auto& t : m["objects"].at(std::string(to_string(s)))) {
        set.objects.push_back(decode_objects(t.get<std::string>()));
      }
    }
  }
  return pair;
}

}  // namespace smnist
