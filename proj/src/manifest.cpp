#include <filesystem>
#include <stdexcept>

#include "json.hpp"

#include "percs/dataset.hpp"
#include "percs/file_util.hpp"

namespace percs {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(std::size_t index, const std::string& what) {
  throw SchemaError("manifest entry " + std::to_string(index) + ": " + what);
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::test:
      return "test";
    case Split::novel:
      return "novel";
  }
  return "train";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  if (text == "novel") return Split::novel;
  throw SchemaError("unknown split \"" + text + "\"");
}

const ManifestEntry& DatasetManifest::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  throw DataError("no manifest entry with id \"" + id + "\"");
}

void validate_manifest(const DatasetManifest& manifest) {
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (e.id.empty()) fail(i, "empty id");
    if (e.image.empty() || e.mask.empty()) fail(i, "image and mask paths are required");
    if (e.cell_type < 1) fail(i, "cell_type must be a positive type id");
    if (e.split != Split::train && !e.fixed_reference) fail(i, "evaluation entry lacks fixed_reference");
    if (e.fixed_reference && *e.fixed_reference < 1) fail(i, "fixed_reference must be a positive label");
    for (const auto& [label, type] : e.instance_types) {
      if (label < 1) fail(i, "instance_types keys must be positive labels");
      if (type < 1) fail(i, "instance_types values must be positive type ids");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (manifest.entries[j].id == e.id) fail(i, "duplicate id \"" + e.id + "\"");
    }
  }
}

DatasetManifest parse_manifest(const std::string& json_text) {
  Json root;
  try {
    root = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("entries") || !root["entries"].is_array()) {
    throw SchemaError("manifest must be an object with an \"entries\" array");
  }
  DatasetManifest m;
  std::size_t index = 0;
  for (const auto& j : root["entries"]) {
    ManifestEntry e;
    try {
      e.id = j.at("id").get<std::string>();
      e.image = j.at("image").get<std::string>();
      e.mask = j.at("mask").get<std::string>();
      e.cell_type = j.at("cell_type").get<int>();
      e.split = parse_split(j.at("split").get<std::string>());
      if (j.contains("fixed_reference") && !j["fixed_reference"].is_null()) {
        e.fixed_reference = j["fixed_reference"].get<int>();
      }
      if (j.contains("instance_types")) {
        for (const auto& [key, value] : j["instance_types"].items()) {
          std::size_t used = 0;
          const int label = std::stoi(key, &used);
          if (used != key.size()) throw std::invalid_argument(key);
          e.instance_types[label] = value.get<int>();
        }
      }
    } catch (const Json::exception& ex) {
      fail(index, ex.what());
    } catch (const std::invalid_argument&) {
      fail(index, "instance_types keys must be integer labels");
    } catch (const std::out_of_range&) {
      fail(index, "instance_types keys must be integer labels");
    } catch (const SchemaError& ex) {
      fail(index, ex.what());
    }
    m.entries.push_back(std::move(e));
    ++index;
  }
  validate_manifest(m);
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  DatasetManifest m = parse_manifest(std::string(bytes.begin(), bytes.end()));
  const auto root = path.parent_path();
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    for (const auto* rel : {&m.entries[i].image, &m.entries[i].mask}) {
      if (!std::filesystem::exists(root / *rel)) fail(i, "missing file " + (root / *rel).string());
    }
  }
  return m;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  Json entries = Json::array();
  for (const auto& e : manifest.entries) {
    Json j;
    j["id"] = e.id;
    j["image"] = e.image;
    j["mask"] = e.mask;
    j["cell_type"] = e.cell_type;
    j["split"] = to_string(e.split);
    if (e.fixed_reference) j["fixed_reference"] = *e.fixed_reference;
    if (!e.instance_types.empty()) {
      Json types = Json::object();
      for (const auto& [label, type] : e.instance_types) types[std::to_string(label)] = type;
      j["instance_types"] = std::move(types);
    }
    entries.push_back(std::move(j));
  }
  Json root;
  root["entries"] = std::move(entries);
  return root.dump(2) + "\n";
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  validate_manifest(manifest);
  write_atomic(path, manifest_to_json(manifest));
}

TypeTable type_table_for(const ManifestEntry& entry, const LabelMask& mask) {
  TypeTable table;
  for (int l = 1; l <= mask.count(); ++l) {
    if (entry.instance_types.empty()) {
      table[l] = entry.cell_type;
      continue;
    }
    auto it = entry.instance_types.find(l);
    if (it == entry.instance_types.end()) {
      throw DataError("entry " + entry.id + ": instance_types has no type for label " + std::to_string(l));
    }
    table[l] = it->second;
  }
  return table;
}

}  // namespace percs
