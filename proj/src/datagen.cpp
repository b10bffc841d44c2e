#include "datagen.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace fairsync {

static_assert(std::endian::native == std::endian::little,
              "FSEB readers/writers assume a little-endian host");

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

void SynthConfig::validate() const {
  require(group_count >= 1, "synth: group_count must be >= 1");
  require(items_per_group >= 1, "synth: items_per_group must be >= 1");
  require(dim >= group_count, "synth: dim must be >= group_count");
  require(noise >= 0.0, "synth: noise must be >= 0");
  require(center_spread > 0.0, "synth: center_spread must be > 0");
  require(user_count >= 0, "synth: user_count must be >= 0");
  require(relevant_per_user >= 1, "synth: relevant_per_user must be >= 1");
  if (!group_affinity.empty()) {
    require(static_cast<int>(group_affinity.size()) == group_count,
            "synth: group_affinity size must equal group_count");
    double sum = 0.0;
    for (double w : group_affinity) {
      require(w >= 0.0, "synth: negative affinity weight");
      sum += w;
    }
    require(sum > 0.0, "synth: affinity weights must not all be zero");
  }
}

namespace {

std::vector<Embedding> cluster_centers(int group_count, int dim, double spread,
                                       Rng& rng) {
  // Random directions, orthonormalized: cross-group center dot products are
  // exactly zero, own-group dot products are spread^2.
  std::vector<Embedding> centers(static_cast<std::size_t>(group_count));
  for (auto& c : centers) {
    c.resize(static_cast<std::size_t>(dim));
    for (double& v : c) v = rng.gaussian();
  }
  for (std::size_t g = 0; g < centers.size(); ++g) {
    for (std::size_t p = 0; p < g; ++p) {
      double dot = 0.0;
      for (int j = 0; j < dim; ++j)
        dot += centers[g][static_cast<std::size_t>(j)] * centers[p][static_cast<std::size_t>(j)];
      for (int j = 0; j < dim; ++j)
        centers[g][static_cast<std::size_t>(j)] -= dot * centers[p][static_cast<std::size_t>(j)];
    }
    double norm = 0.0;
    for (double v : centers[g]) norm += v * v;
    norm = std::sqrt(norm);
    require(norm > 1e-9, "synth: degenerate cluster center");
    for (double& v : centers[g]) v *= spread / norm;
  }
  return centers;
}

Embedding jittered(const Embedding& center, double noise, Rng& rng) {
  Embedding e = center;
  if (noise > 0.0) {
    const double scale = noise / std::sqrt(static_cast<double>(center.size()));
    for (double& v : e) v += scale * rng.gaussian();
  }
  for (double& v : e) v = quantize_f32(v);
  return e;
}

int sample_categorical(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<std::int64_t> exact_top_r(const Embedding& user, const Catalog& catalog,
                                      int r) {
  std::vector<ScoredItem> scored;
  scored.reserve(catalog.items.size());
  for (const auto& item : catalog.items)
    scored.push_back({item.item_id, item.group_id, base_distance(user, item.embedding)});
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(r), scored.size());
  std::nth_element(scored.begin(), scored.begin() + keep, scored.end(),
                   [](const ScoredItem& a, const ScoredItem& b) {
                     if (a.score != b.score) return a.score < b.score;
                     return a.item_id < b.item_id;
                   });
  scored.resize(keep);
  std::vector<std::int64_t> out;
  out.reserve(keep);
  for (const auto& s : scored) out.push_back(s.item_id);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

CorpusBundle synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  CorpusBundle bundle;
  Rng center_rng(cfg.seed, 1);
  const auto centers = cluster_centers(cfg.group_count, cfg.dim, cfg.center_spread,
                                       center_rng);

  bundle.catalog.group_count = cfg.group_count;
  bundle.catalog.shard_count = 1;
  std::int64_t next_id = 0;
  Rng item_rng(cfg.seed, 2);
  for (int g = 0; g < cfg.group_count; ++g) {
    for (int i = 0; i < cfg.items_per_group; ++i) {
      CatalogItem item;
      item.item_id = next_id++;
      item.group_id = g;
      item.shard_id = 0;
      item.embedding = jittered(centers[static_cast<std::size_t>(g)], cfg.noise, item_rng);
      bundle.catalog.items.push_back(std::move(item));
    }
  }
  bundle.catalog.validate();

  std::vector<double> affinity = cfg.group_affinity;
  if (affinity.empty()) affinity.assign(static_cast<std::size_t>(cfg.group_count), 1.0);
  Rng user_rng(cfg.seed, 3);
  bundle.stream.reserve(static_cast<std::size_t>(cfg.user_count));
  for (std::int64_t t = 0; t < cfg.user_count; ++t) {
    const int home = sample_categorical(affinity, user_rng);
    StreamUser user;
    user.user_id = t;
    user.embedding = jittered(centers[static_cast<std::size_t>(home)], cfg.noise, user_rng);
    for (std::int64_t rel : exact_top_r(user.embedding, bundle.catalog,
                                        cfg.relevant_per_user))
      bundle.relevance.add(t, rel);
    bundle.stream.push_back(std::move(user));
  }

  bundle.group_labels.resize(static_cast<std::size_t>(cfg.group_count));
  for (int g = 0; g < cfg.group_count; ++g)
    bundle.group_labels[static_cast<std::size_t>(g)] = std::to_string(g);
  return bundle;
}

CorpusBundle extreme_case_corpus(std::uint64_t seed) {
  constexpr int kItems = 10;
  constexpr int kGroupSize = 5;
  constexpr std::int64_t kUsers = 10000;

  CorpusBundle bundle;
  bundle.catalog.group_count = 2;
  bundle.catalog.shard_count = 1;
  for (int j = 0; j < kItems; ++j) {
    CatalogItem item;
    item.item_id = j;
    item.group_id = j < kGroupSize ? 0 : 1;
    item.shard_id = 0;
    item.embedding.assign(kItems, 0.0);
    item.embedding[static_cast<std::size_t>(j)] = 1.0;
    bundle.catalog.items.push_back(std::move(item));
  }
  bundle.catalog.validate();

  // Basis-vector items make each coordinate of the user embedding the
  // negated base distance to one item, so the distance bands are exact.
  Rng rng(seed, 4);
  for (std::int64_t t = 0; t < kUsers; ++t) {
    StreamUser user;
    user.user_id = t;
    user.embedding.resize(kItems);
    for (int j = 0; j < kItems; ++j) {
      double dist;
      if (j < kGroupSize) {
        do {
          dist = quantize_f32(0.4 * rng.uniform());
        } while (dist >= 0.4);
      } else {
        dist = quantize_f32(0.4 + 0.6 * rng.uniform());
      }
      user.embedding[static_cast<std::size_t>(j)] = quantize_f32(-dist);
    }
    for (int j = 0; j < kGroupSize; ++j) bundle.relevance.add(t, j);
    bundle.stream.push_back(std::move(user));
  }
  bundle.group_labels = {"liked", "disliked"};
  return bundle;
}

// --- file formats ---------------------------------------------------------

namespace {

constexpr char kFsebMagic[4] = {'F', 'S', 'E', 'B'};

[[noreturn]] void io_fail(const std::string& path, const std::string& what,
                          std::int64_t line = -1) {
  std::string msg = path;
  if (line >= 0) msg += ":" + std::to_string(line);
  throw IoError(msg + ": " + what);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::int64_t parse_int(const std::string& s, const std::string& path, std::int64_t line) {
  std::int64_t value = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) io_fail(path, "expected integer, got '" + s + "'", line);
  return value;
}

double parse_double(const std::string& s, const std::string& path, std::int64_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    io_fail(path, "expected number, got '" + s + "'", line);
  }
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void write_fseb(const std::string& path, const std::vector<Embedding>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_fail(path, "cannot open for writing");
  const std::uint32_t n = static_cast<std::uint32_t>(rows.size());
  const std::uint32_t d = rows.empty() ? 0 : static_cast<std::uint32_t>(rows[0].size());
  out.write(kFsebMagic, 4);
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&d), 4);
  std::vector<float> row(d);
  for (const auto& r : rows) {
    require(r.size() == d, "write_fseb: ragged rows");
    for (std::size_t j = 0; j < d; ++j) row[j] = static_cast<float>(r[j]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(sizeof(float) * d));
  }
  if (!out) io_fail(path, "write failed");
}

std::vector<Embedding> read_fseb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kFsebMagic, 4) != 0) io_fail(path, "bad FSEB magic");
  std::uint32_t n = 0, d = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&d), 4);
  if (!in) io_fail(path, "truncated FSEB header");
  std::vector<Embedding> rows(n);
  std::vector<float> buf(d);
  for (std::uint32_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(sizeof(float) * d));
    if (!in) io_fail(path, "truncated FSEB body at row " + std::to_string(i));
    rows[i].resize(d);
    for (std::uint32_t j = 0; j < d; ++j) {
      rows[i][j] = static_cast<double>(buf[j]);
      if (!std::isfinite(rows[i][j]))
        io_fail(path, "non-finite embedding value at row " + std::to_string(i));
    }
  }
  return rows;
}

std::vector<Embedding> read_embeddings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open");
  std::string line;
  std::int64_t lineno = 0;
  if (!std::getline(in, line)) io_fail(path, "empty file");
  ++lineno;
  const auto header = split_csv_line(trim(line));
  if (header.empty() || header[0] != "id") io_fail(path, "expected header id,v0..", lineno);
  const std::size_t dim = header.size() - 1;
  std::map<std::int64_t, Embedding> by_id;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto fields = split_csv_line(t);
    if (fields.size() != dim + 1) io_fail(path, "wrong field count", lineno);
    const std::int64_t id = parse_int(fields[0], path, lineno);
    Embedding e(dim);
    for (std::size_t j = 0; j < dim; ++j) e[j] = parse_double(fields[j + 1], path, lineno);
    if (!by_id.emplace(id, std::move(e)).second) io_fail(path, "duplicate id", lineno);
  }
  std::vector<Embedding> rows;
  rows.reserve(by_id.size());
  std::int64_t expect = 0;
  for (auto& [id, e] : by_id) {
    if (id != expect++) io_fail(path, "ids must be dense 0..n-1");
    rows.push_back(std::move(e));
  }
  return rows;
}

std::vector<Embedding> read_embeddings(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) io_fail(path, "cannot open");
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  probe.close();
  if (std::memcmp(magic, kFsebMagic, 4) == 0) return read_fseb(path);
  return read_embeddings_csv(path);
}

namespace {

struct GroupsFile {
  std::unordered_map<std::int64_t, int> item_group;  // item -> dense id
  std::vector<std::string> labels;                   // dense id -> label
};

GroupsFile read_groups(const std::string& path, std::int64_t item_count,
                       int min_group_size) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open");
  std::string line;
  std::int64_t lineno = 0;
  std::unordered_map<std::int64_t, std::string> raw;
  std::map<std::string, std::int64_t> label_sizes;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (lineno == 1 && t.rfind("item_id", 0) == 0) continue;
    const auto fields = split_csv_line(t);
    if (fields.size() != 2) io_fail(path, "expected item_id,group_label", lineno);
    const std::int64_t item = parse_int(fields[0], path, lineno);
    if (item < 0 || item >= item_count) io_fail(path, "unknown item id", lineno);
    if (!raw.emplace(item, fields[1]).second) io_fail(path, "duplicate item id", lineno);
    ++label_sizes[fields[1]];
  }
  if (static_cast<std::int64_t>(raw.size()) != item_count)
    io_fail(path, "missing group assignment for some items");

  // Merge infrequent groups before assigning dense ids.
  const std::string merged_label = "__infrequent__";
  std::map<std::string, std::string> relabel;
  bool any_merged = false;
  for (const auto& [label, size] : label_sizes) {
    if (size < min_group_size) {
      relabel[label] = merged_label;
      any_merged = true;
    } else {
      relabel[label] = label;
    }
  }

  std::map<std::string, int> dense;
  std::vector<std::string> kept;
  for (const auto& [label, target] : relabel)
    if (target != merged_label && !dense.count(target)) {
      dense[target] = 0;
      kept.push_back(target);
    }

  // Integer labels that already form 0..G-1 keep their values; anything else
  // maps in sorted label order.
  bool identity = !any_merged;
  std::vector<int> numeric;
  if (identity) {
    for (const auto& label : kept) {
      int value = 0;
      const auto* b = label.data();
      auto [ptr, ec] = std::from_chars(b, b + label.size(), value);
      if (ec != std::errc{} || ptr != b + label.size() || value < 0) {
        identity = false;
        break;
      }
      numeric.push_back(value);
    }
    if (identity) {
      std::vector<int> sorted = numeric;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < sorted.size(); ++i)
        if (sorted[i] != static_cast<int>(i)) identity = false;
    }
  }

  GroupsFile out;
  if (identity) {
    out.labels.resize(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      dense[kept[i]] = numeric[i];
      out.labels[static_cast<std::size_t>(numeric[i])] = kept[i];
    }
  } else {
    int next = 0;
    for (auto& [label, id] : dense) {
      id = next++;
      out.labels.push_back(label);
    }
    if (any_merged) {
      dense[merged_label] = next;
      out.labels.push_back(merged_label);
    }
  }
  for (const auto& [item, label] : raw) out.item_group[item] = dense.at(relabel.at(label));
  return out;
}

struct Interaction {
  std::int64_t user_id;
  std::int64_t item_id;
  std::int64_t timestamp;
};

std::vector<Interaction> read_interactions(const std::string& path,
                                           std::int64_t item_count,
                                           std::int64_t user_count) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open");
  std::string line;
  std::int64_t lineno = 0;
  std::vector<Interaction> rows;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (lineno == 1 && t.rfind("user_id", 0) == 0) continue;
    const auto fields = split_csv_line(t);
    if (fields.size() != 3) io_fail(path, "expected user_id,item_id,timestamp", lineno);
    Interaction row{parse_int(fields[0], path, lineno), parse_int(fields[1], path, lineno),
                    parse_int(fields[2], path, lineno)};
    if (row.item_id < 0 || row.item_id >= item_count)
      io_fail(path, "unknown item in interactions", lineno);
    if (row.user_id < 0 || row.user_id >= user_count)
      io_fail(path, "unknown user in interactions", lineno);
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Interaction& a, const Interaction& b) {
    return a.timestamp < b.timestamp;
  });
  return rows;
}

}  // namespace

CorpusBundle load_corpus(const std::string& items_path, const std::string& users_path,
                         const std::string& groups_path,
                         const std::string& interactions_path,
                         const LoadOptions& options) {
  CorpusBundle bundle;
  const auto item_rows = read_embeddings(items_path);
  const auto user_rows = read_embeddings(users_path);
  const auto groups = read_groups(groups_path, static_cast<std::int64_t>(item_rows.size()),
                                  options.min_group_size);
  bundle.group_labels = groups.labels;
  bundle.catalog.group_count = static_cast<int>(groups.labels.size());
  bundle.catalog.shard_count = 1;
  for (std::size_t i = 0; i < item_rows.size(); ++i) {
    CatalogItem item;
    item.item_id = static_cast<std::int64_t>(i);
    item.embedding = item_rows[i];
    item.group_id = groups.item_group.at(static_cast<std::int64_t>(i));
    item.shard_id = 0;
    bundle.catalog.items.push_back(std::move(item));
  }
  bundle.catalog.validate();

  const auto interactions =
      read_interactions(interactions_path, static_cast<std::int64_t>(item_rows.size()),
                        static_cast<std::int64_t>(user_rows.size()));
  const std::size_t n = interactions.size();
  const std::size_t n_train = (n * 8) / 10;
  const std::size_t n_val = n / 10;
  // Train interactions belong to embedding training (out of scope here); the
  // validation slice is held out untouched; the test slice is the stream.
  for (std::size_t i = n_train + n_val; i < n; ++i) {
    const Interaction& row = interactions[i];
    bundle.stream.push_back(
        {row.user_id, user_rows[static_cast<std::size_t>(row.user_id)]});
    bundle.relevance.add(row.user_id, row.item_id);
  }
  return bundle;
}

void write_corpus(const std::string& dir, const CorpusBundle& bundle) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<Embedding> item_rows;
  item_rows.reserve(bundle.catalog.items.size());
  for (const auto& item : bundle.catalog.items) item_rows.push_back(item.embedding);
  write_fseb(dir + "/items.fseb", item_rows);

  std::vector<Embedding> user_rows;
  user_rows.reserve(bundle.stream.size());
  for (std::size_t t = 0; t < bundle.stream.size(); ++t) {
    require(bundle.stream[t].user_id == static_cast<std::int64_t>(t),
            "write_corpus: stream user ids must be dense 0..T-1");
    user_rows.push_back(bundle.stream[t].embedding);
  }
  write_fseb(dir + "/users.fseb", user_rows);

  {
    std::ofstream out(dir + "/groups.csv");
    if (!out) io_fail(dir + "/groups.csv", "cannot open for writing");
    out << "item_id,group_label\n";
    for (const auto& item : bundle.catalog.items)
      out << item.item_id << "," << item.group_id << "\n";
  }
  {
    std::ofstream out(dir + "/relevance.csv");
    if (!out) io_fail(dir + "/relevance.csv", "cannot open for writing");
    out << "user_id,item_id\n";
    for (std::size_t t = 0; t < bundle.stream.size(); ++t) {
      const auto* rel = bundle.relevance.find(static_cast<std::int64_t>(t));
      if (!rel) continue;
      std::vector<std::int64_t> sorted(rel->begin(), rel->end());
      std::sort(sorted.begin(), sorted.end());
      for (auto item : sorted) out << t << "," << item << "\n";
    }
  }
  nlohmann::json manifest;
  manifest["layout"] = "direct";
  manifest["items"] = "items.fseb";
  manifest["users"] = "users.fseb";
  manifest["groups"] = "groups.csv";
  manifest["relevance"] = "relevance.csv";
  manifest["group_count"] = bundle.catalog.group_count;
  manifest["group_labels"] = bundle.group_labels;
  manifest["dim"] = bundle.catalog.dim();
  manifest["item_count"] = bundle.catalog.items.size();
  manifest["user_count"] = bundle.stream.size();
  std::ofstream out(dir + "/manifest.json");
  if (!out) io_fail(dir + "/manifest.json", "cannot open for writing");
  out << manifest.dump(2) << "\n";
}

CorpusBundle load_corpus_dir(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) io_fail(dir + "/manifest.json", "cannot open");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    io_fail(dir + "/manifest.json", e.what());
  }
  if (manifest.value("layout", "") != "direct")
    io_fail(dir + "/manifest.json", "unsupported layout");

  CorpusBundle bundle;
  const auto item_rows = read_embeddings(dir + "/" + manifest["items"].get<std::string>());
  const auto user_rows = read_embeddings(dir + "/" + manifest["users"].get<std::string>());
  const auto groups =
      read_groups(dir + "/" + manifest["groups"].get<std::string>(),
                  static_cast<std::int64_t>(item_rows.size()), 0);
  bundle.group_labels = groups.labels;
  if (manifest.contains("group_labels"))
    bundle.group_labels = manifest["group_labels"].get<std::vector<std::string>>();
  bundle.catalog.group_count = static_cast<int>(groups.labels.size());
  bundle.catalog.shard_count = 1;
  for (std::size_t i = 0; i < item_rows.size(); ++i) {
    CatalogItem item;
    item.item_id = static_cast<std::int64_t>(i);
    item.embedding = item_rows[i];
    item.group_id = groups.item_group.at(static_cast<std::int64_t>(i));
    item.shard_id = 0;
    bundle.catalog.items.push_back(std::move(item));
  }
  bundle.catalog.validate();
  for (std::size_t t = 0; t < user_rows.size(); ++t)
    bundle.stream.push_back({static_cast<std::int64_t>(t), user_rows[t]});

  const std::string rel_path = dir + "/" + manifest["relevance"].get<std::string>();
  std::ifstream rel(rel_path);
  if (!rel) io_fail(rel_path, "cannot open");
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(rel, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (lineno == 1 && t.rfind("user_id", 0) == 0) continue;
    const auto fields = split_csv_line(t);
    if (fields.size() != 2) io_fail(rel_path, "expected user_id,item_id", lineno);
    const std::int64_t user = parse_int(fields[0], rel_path, lineno);
    const std::int64_t item = parse_int(fields[1], rel_path, lineno);
    if (user < 0 || user >= static_cast<std::int64_t>(user_rows.size()))
      io_fail(rel_path, "unknown user id", lineno);
    if (item < 0 || item >= static_cast<std::int64_t>(item_rows.size()))
      io_fail(rel_path, "unknown item id", lineno);
    bundle.relevance.add(user, item);
  }
  return bundle;
}

}  // namespace fairsync
