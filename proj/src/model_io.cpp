#include "dice/model_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace dice::io {

namespace {

using nlohmann::json;

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFF000000u) >> 24) | ((v & 0x00FF0000u) >> 8) | ((v & 0x0000FF00u) << 8) |
        ((v & 0x000000FFu) << 24);
  }
  return v;
}

void check_finite(std::span<const float> values, const std::string& what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError(what + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const char* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data, static_cast<std::streamsize>(size));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

Manifest read_manifest(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path)) throw IoError("missing manifest " + manifest_path.string());
  json j;
  try {
    j = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  Manifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.dtype = j.at("dtype").get<std::string>();
    const auto shape = j.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw FormatError(manifest_path.string() + ": shape must have 2 dims");
    m.shape = {shape[0], shape[1]};
    m.byte_order = j.at("byte_order").get<std::string>();
    m.layout = j.at("layout").get<std::string>();
    m.file = j.at("file").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  if (m.dtype != "f32") throw FormatError(manifest_path.string() + ": unsupported dtype " + m.dtype);
  if (m.byte_order != "little") {
    throw FormatError(manifest_path.string() + ": unsupported byte order " + m.byte_order);
  }
  if (m.layout != "row-major") {
    throw FormatError(manifest_path.string() + ": unsupported layout " + m.layout);
  }
  return m;
}

Tensor2D load_tensor(const fs::path& manifest_path) {
  const Manifest m = read_manifest(manifest_path);
  const fs::path bin = manifest_path.parent_path() / m.file;
  if (!fs::exists(bin)) throw IoError("missing tensor payload " + bin.string());
  const std::string raw = read_file(bin);
  const std::size_t count = m.shape[0] * m.shape[1];
  if (raw.size() % 4 != 0 || raw.size() / 4 != count) {
    throw FormatError(bin.string() + ": " + std::to_string(raw.size()) +
                      " bytes do not match declared shape [" + std::to_string(m.shape[0]) +
                      "," + std::to_string(m.shape[1]) + "]");
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t word;
    std::memcpy(&word, raw.data() + 4 * i, 4);
    data[i] = std::bit_cast<float>(to_little(word));
  }
  check_finite(data, bin.string());
  return Tensor2D(m.shape[0], m.shape[1], std::move(data));
}

Manifest save_tensor(const Tensor2D& t, const fs::path& dir, const std::string& name) {
  if (t.rows() == 0) throw FormatError("refusing to save tensor '" + name + "' with zero rows");
  check_finite(t.flat(), name);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  Manifest m;
  m.name = name;
  m.shape = {t.rows(), t.cols()};
  m.file = name + ".bin";

  std::string raw(t.size() * 4, '\0');
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::uint32_t word = to_little(std::bit_cast<std::uint32_t>(t.flat()[i]));
    std::memcpy(raw.data() + 4 * i, &word, 4);
  }
  write_file(dir / m.file, raw.data(), raw.size());

  // Field order is fixed so manifests are byte-stable.
  const std::string text = "{\n  \"name\": " + json(m.name).dump() +
                           ",\n  \"dtype\": \"f32\",\n  \"shape\": [" +
                           std::to_string(m.shape[0]) + ", " + std::to_string(m.shape[1]) +
                           "],\n  \"byte_order\": \"little\",\n  \"layout\": \"row-major\",\n"
                           "  \"file\": " +
                           json(m.file).dump() + "\n}\n";
  write_file(dir / (name + ".json"), text.data(), text.size());
  return m;
}

Tensor2D parse_csv_tensor(const std::string& text) {
  std::vector<float> data;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      // Only a trailing newline may produce an empty line.
      if (pos >= text.size()) break;
      throw FormatError("csv: empty line at row " + std::to_string(rows + 1));
    }

    std::size_t fields = 0;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string_view field =
          line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      float value = 0.0f;
      const char* first = field.data();
      const char* last = field.data() + field.size();
      if (!field.empty() && *first == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw DataError("csv: cannot parse field '" + std::string(field) + "' at row " +
                        std::to_string(rows + 1));
      }
      data.push_back(value);
      ++fields;
      if (data.size() > kMaxCsvCells) throw FormatError("csv: more than 1e6 cells");
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) {
      cols = fields;
    } else if (fields != cols) {
      throw FormatError("csv: row " + std::to_string(rows + 1) + " has " + std::to_string(fields) +
                        " fields, expected " + std::to_string(cols));
    }
    ++rows;
  }
  if (rows == 0) throw FormatError("csv: no data rows");
  return Tensor2D(rows, cols, std::move(data));
}

Tensor2D load_csv_tensor(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("missing csv " + path.string());
  return parse_csv_tensor(read_file(path));
}

Tensor2D labels_to_tensor(const std::vector<std::uint32_t>& labels) {
  std::vector<float> data(labels.begin(), labels.end());
  return Tensor2D(labels.size(), 1, std::move(data));
}

std::vector<std::uint32_t> tensor_to_labels(const Tensor2D& t) {
  if (t.cols() != 1) throw FormatError("label tensor must have exactly one column");
  std::vector<std::uint32_t> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const float v = t(i, 0);
    if (v < 0.0f || v != std::floor(v) || v >= 16777216.0f) {
      throw DataError("label " + std::to_string(v) + " is not a class index");
    }
    out[i] = static_cast<std::uint32_t>(v);
  }
  return out;
}

namespace {

fs::path manifest(const fs::path& dir, const std::string& name) { return dir / (name + ".json"); }

std::optional<std::vector<std::uint32_t>> maybe_labels(const fs::path& dir, const char* name) {
  if (!fs::exists(manifest(dir, name))) return std::nullopt;
  return tensor_to_labels(load_tensor(manifest(dir, name)));
}

}  // namespace

Bundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("bundle directory " + dir.string() + " not found");
  for (const char* required : {kWeights, kBias, kTrain, kIdTest}) {
    if (!fs::exists(manifest(dir, required))) {
      throw FormatError("bundle " + dir.string() + " lacks required tensor '" + required + "'");
    }
  }
  Bundle out;
  Tensor2D w = load_tensor(manifest(dir, kWeights));
  Tensor2D b = load_tensor(manifest(dir, kBias));
  if (b.rows() != 1 && b.cols() != 1) throw FormatError("bias must be a vector");
  out.layer = FinalLayer(std::move(w), std::vector<float>(b.flat().begin(), b.flat().end()));

  out.train = FeatureSet(load_tensor(manifest(dir, kTrain)), maybe_labels(dir, kTrainLabels));
  out.id_test = FeatureSet(load_tensor(manifest(dir, kIdTest)), maybe_labels(dir, kIdTestLabels));

  std::vector<fs::path> entries;
  for (const auto& entry : fs::directory_iterator(dir)) entries.push_back(entry.path());
  std::sort(entries.begin(), entries.end());
  const std::string prefix = kOodPrefix;
  for (const auto& path : entries) {
    if (path.extension() != ".json") continue;
    const std::string stem = path.stem().string();
    if (stem.rfind(prefix, 0) == 0 && stem.size() > prefix.size()) {
      out.ood.emplace(stem.substr(prefix.size()), FeatureSet(load_tensor(path)));
    }
  }
  if (out.ood.empty()) throw FormatError("bundle " + dir.string() + " has no features_ood_* set");
  if (fs::exists(manifest(dir, kNoise))) out.noise = FeatureSet(load_tensor(manifest(dir, kNoise)));

  const std::size_t m = out.layer.units();
  auto check_dim = [&](const FeatureSet& fs_, const std::string& name) {
    if (fs_.dim() != m) {
      throw ShapeError("feature set '" + name + "' has width " + std::to_string(fs_.dim()) +
                       " but W has " + std::to_string(m) + " units");
    }
    fs_.check_labels(out.layer.classes());
  };
  check_dim(out.train, kTrain);
  check_dim(out.id_test, kIdTest);
  for (const auto& [name, set] : out.ood) check_dim(set, prefix + name);
  if (out.noise) check_dim(*out.noise, kNoise);
  return out;
}

void save_bundle(const Bundle& bundle, const fs::path& dir) {
  save_tensor(bundle.layer.W, dir, kWeights);
  save_tensor(Tensor2D(1, bundle.layer.b.size(), bundle.layer.b), dir, kBias);
  save_tensor(bundle.train.X, dir, kTrain);
  if (bundle.train.labels) save_tensor(labels_to_tensor(*bundle.train.labels), dir, kTrainLabels);
  save_tensor(bundle.id_test.X, dir, kIdTest);
  if (bundle.id_test.labels) {
    save_tensor(labels_to_tensor(*bundle.id_test.labels), dir, kIdTestLabels);
  }
  for (const auto& [name, set] : bundle.ood) save_tensor(set.X, dir, kOodPrefix + name);
  if (bundle.noise) save_tensor(bundle.noise->X, dir, kNoise);
}

}  // namespace dice::io
