#pragma once

#include <filesystem>
#include <string>

#include "smnist/generator.hpp"
#include "smnist/idx.hpp"

namespace smnist {

inline constexpr const char* kManifestFile = "manifest.json";

idx::IdxImageSet to_idx_images(const LabeledSet& set);
idx::IdxLabelSet to_idx_labels(const LabeledSet& set);
LabeledSet from_idx(const idx::IdxImageSet& images, const idx::IdxLabelSet& labels);

// Writes the four MNIST-named IDX files (optionally .gz) and manifest.json.
void write_dataset(const std::filesystem::path& dir, const DatasetPair& pair, bool gzip = false);

// Loads IDX files plus manifest; the manifest restores spec, partition,
// exhaustion records, histograms and the per-image generation log.
DatasetPair load_dataset(const std::filesystem::path& dir);

// Compact per-image object log: "X3,4 O5,6"; empty for no objects.
std::string encode_objects(const std::vector<PlacedObject>& objects);
std::vector<PlacedObject> decode_objects(const std::string& text);

}  // namespace smnist
