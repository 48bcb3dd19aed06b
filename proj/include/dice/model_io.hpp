#ifndef DICE_MODEL_IO_HPP_
#define DICE_MODEL_IO_HPP_

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dice/tensor.hpp"

namespace dice::io {

namespace fs = std::filesystem;

/// JSON descriptor sitting next to each raw tensor file.
///
///   {"name": "W", "dtype": "f32", "shape": [m, C], "byte_order": "little",
///    "layout": "row-major", "file": "W.bin"}
///
/// The raw file has no header: rows*cols little-endian IEEE-754 floats.
struct Manifest {
  std::string name;
  std::string dtype = "f32";
  std::array<std::size_t, 2> shape{0, 0};
  std::string byte_order = "little";
  std::string layout = "row-major";
  std::string file;
};

Manifest read_manifest(const fs::path& manifest_path);

/// Loads the tensor described by `manifest_path`. The binary is resolved
/// relative to the manifest's directory.
Tensor2D load_tensor(const fs::path& manifest_path);

/// Writes `<dir>/<name>.json` and `<dir>/<name>.bin`. Zero-row tensors are
/// rejected with FormatError.
Manifest save_tensor(const Tensor2D& t, const fs::path& dir, const std::string& name);

/// Parses a rectangular comma-separated file (LF or CRLF).
Tensor2D load_csv_tensor(const fs::path& path);
Tensor2D parse_csv_tensor(const std::string& text);

inline constexpr std::size_t kMaxCsvCells = 1'000'000;

// Bundle layout -------------------------------------------------------------

inline constexpr const char* kWeights = "W";
inline constexpr const char* kBias = "b";
inline constexpr const char* kTrain = "features_train";
inline constexpr const char* kIdTest = "features_id_test";
inline constexpr const char* kOodPrefix = "features_ood_";
inline constexpr const char* kNoise = "features_noise";
inline constexpr const char* kTrainLabels = "labels_train";
inline constexpr const char* kIdTestLabels = "labels_id_test";

/// One experiment: final layer plus every feature set found in a directory.
struct Bundle {
  FinalLayer layer;
  FeatureSet train;
  FeatureSet id_test;
  std::map<std::string, FeatureSet> ood;  // keyed by the suffix after features_ood_
  std::optional<FeatureSet> noise;
};

/// Loads a bundle directory. Missing W, b, features_train, features_id_test
/// or an empty OOD set list raise FormatError; label sidecars are optional.
Bundle load_bundle(const fs::path& dir);
void save_bundle(const Bundle& bundle, const fs::path& dir);

/// Converts labels to a single-column f32 tensor and back (exact for < 2^24).
Tensor2D labels_to_tensor(const std::vector<std::uint32_t>& labels);
std::vector<std::uint32_t> tensor_to_labels(const Tensor2D& t);

}  // namespace dice::io

#endif  // DICE_MODEL_IO_HPP_
