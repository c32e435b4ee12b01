#pragma once

// Dataset registry: a JSON manifest cataloguing feature files by
// (source, class, iteration, split), plus validation of the referenced files.
//
// Manifest: a JSON array of objects
//   {"id": str, "path": str, "source": "real"|"synthetic", "class": str,
//    "iteration": int (synthetic only, optional), "split": "train"|"test" (optional)}
// Relative paths resolve against the manifest's directory.

#include <algorithm>
#include <cctype>
#include <cstring>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "clinrel/error.hpp"
#include "clinrel/feature_set.hpp"

namespace clinrel {

enum class Source { Real, Synthetic };
enum class Split { Train, Test, Unsplit };

inline std::string_view to_string(Source s) { return s == Source::Real ? "real" : "synthetic"; }

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Unsplit: break;
  }
  return "unsplit";
}

struct DatasetEntry {
  std::string id;
  std::filesystem::path path;
  Source source = Source::Real;
  std::string class_label;
  std::optional<std::int64_t> iteration;
  Split split = Split::Unsplit;
};

// Selects entries by role; unset fields match anything.
struct EntryQuery {
  std::optional<Source> source = std::nullopt;
  std::optional<std::string> class_label = std::nullopt;
  std::optional<std::int64_t> iteration = std::nullopt;
  std::optional<Split> split = std::nullopt;
  bool exclude_test = false;

  bool matches(const DatasetEntry& e) const {
    if (source && e.source != *source) return false;
    if (class_label && e.class_label != *class_label) return false;
    if (iteration && e.iteration != iteration) return false;
    if (split && e.split != *split) return false;
    if (exclude_test && e.split == Split::Test) return false;
    return true;
  }
};

class DatasetRegistry {
 public:
  DatasetRegistry() = default;
  explicit DatasetRegistry(std::vector<DatasetEntry> entries) : entries_(std::move(entries)) {
    std::set<std::string> seen;
    for (const auto& e : entries_) {
      if (!seen.insert(e.id).second) throw Error("duplicate id \"" + e.id + "\"");
      if (e.iteration && e.source != Source::Synthetic) {
        throw Error("entry \"" + e.id + "\": iteration is only allowed on synthetic entries");
      }
    }
  }

  const std::vector<DatasetEntry>& entries() const noexcept { return entries_; }

  const DatasetEntry* find(std::string_view id) const {
    for (const auto& e : entries_) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }

  std::vector<const DatasetEntry*> select(const EntryQuery& q) const {
    std::vector<const DatasetEntry*> out;
    for (const auto& e : entries_) {
      if (q.matches(e)) out.push_back(&e);
    }
    return out;
  }

  // Sorted distinct iterations of synthetic entries.
  std::vector<std::int64_t> synthetic_iterations() const {
    std::set<std::int64_t> its;
    for (const auto& e : entries_) {
      if (e.source == Source::Synthetic && e.iteration) its.insert(*e.iteration);
    }
    return {its.begin(), its.end()};
  }

  // Loads and concatenates every matching entry in manifest order.
  // Returns nullopt when nothing matches.
  std::optional<FeatureSet> load(const EntryQuery& q, std::string id) const {
    std::vector<FeatureSet> parts;
    for (const auto* e : select(q)) parts.push_back(load_feature_file(e->path, e->id));
    if (parts.empty()) return std::nullopt;
    if (parts.size() == 1) {
      auto only = std::move(parts.front());
      return FeatureSet(only.count(), only.dim(), {only.data().begin(), only.data().end()}, std::move(id));
    }
    return concat(parts, std::move(id));
  }

 private:
  std::vector<DatasetEntry> entries_;
};

namespace detail {

inline std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline DatasetEntry parse_entry(const nlohmann::json& j, const std::filesystem::path& base) {
  if (!j.is_object()) throw IoError("manifest entries must be objects");
  DatasetEntry e;
  try {
    e.id = j.at("id").get<std::string>();
    e.path = j.at("path").get<std::string>();
    const auto source = lowercase(j.at("source").get<std::string>());
    if (source == "real") {
      e.source = Source::Real;
    } else if (source == "synthetic") {
      e.source = Source::Synthetic;
    } else {
      throw IoError("entry \"" + e.id + "\": unknown source \"" + source + "\"");
    }
    e.class_label = j.at("class").get<std::string>();
    if (j.contains("iteration") && !j.at("iteration").is_null()) {
      const auto it = j.at("iteration").get<std::int64_t>();
      if (it < 0) throw IoError("entry \"" + e.id + "\": iteration must be non-negative");
      e.iteration = it;
    }
    if (j.contains("split") && !j.at("split").is_null()) {
      const auto split = lowercase(j.at("split").get<std::string>());
      if (split == "train") {
        e.split = Split::Train;
      } else if (split == "test") {
        e.split = Split::Test;
      } else {
        throw IoError("entry \"" + e.id + "\": unknown split \"" + split + "\"");
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("unparseable manifest entry: ") + ex.what());
  }
  if (e.path.is_relative()) e.path = base / e.path;
  return e;
}

}  // namespace detail

inline DatasetRegistry parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base) {
  if (!doc.is_array()) throw IoError("manifest must be a JSON array");
  std::vector<DatasetEntry> entries;
  for (const auto& j : doc) entries.push_back(detail::parse_entry(j, base));
  return DatasetRegistry(std::move(entries));
}

inline DatasetRegistry load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("unparseable manifest " + path.string() + ": " + ex.what());
  }
  return parse_manifest(doc, path.parent_path());
}

inline nlohmann::json to_json(const DatasetEntry& e) {
  nlohmann::json j{{"id", e.id},
                   {"path", e.path.generic_string()},
                   {"source", std::string(to_string(e.source))},
                   {"class", e.class_label}};
  if (e.iteration) j["iteration"] = *e.iteration;
  if (e.split != Split::Unsplit) j["split"] = std::string(to_string(e.split));
  return j;
}

// Sweeps index synthetic sets by checkpoint, so every synthetic entry needs one.
inline void require_iterations(const DatasetRegistry& reg) {
  for (const auto& e : reg.entries()) {
    if (e.source == Source::Synthetic && !e.iteration) {
      throw Error("synthetic entry \"" + e.id + "\" has no iteration");
    }
  }
}

struct ValidationIssue {
  std::string entry_id;
  std::string message;
  friend bool operator==(const ValidationIssue&, const ValidationIssue&) = default;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  std::size_t dim = 0;
  bool ok() const noexcept { return issues.empty(); }
  friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

// Opens every referenced file read-only. The registry dim is the most common
// dim among readable entries (earliest wins a tie); the rest are mismatches.
inline ValidationReport validate_registry(const DatasetRegistry& reg) {
  ValidationReport report;
  std::vector<std::pair<const DatasetEntry*, std::size_t>> readable;
  for (const auto& e : reg.entries()) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(e.path, ec)) {
      report.issues.push_back({e.id, "file not found: " + e.path.string()});
      continue;
    }
    std::ifstream in(e.path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= fvec::kHeaderBytes && std::memcmp(bytes.data(), fvec::kMagic, 4) == 0 &&
        (fvec::detail::get_u32(bytes.data() + 8) == 0 || fvec::detail::get_u32(bytes.data() + 12) == 0)) {
      report.issues.push_back({e.id, "empty set"});
      continue;
    }
    try {
      readable.emplace_back(&e, fvec::decode(bytes, e.id).dim());
    } catch (const Error& ex) {
      report.issues.push_back({e.id, ex.what()});
    }
  }
  std::size_t best_votes = 0;
  for (const auto& [entry, d] : readable) {
    const auto votes = static_cast<std::size_t>(
        std::count_if(readable.begin(), readable.end(), [d = d](const auto& r) { return r.second == d; }));
    if (votes > best_votes) {
      best_votes = votes;
      report.dim = d;
    }
  }
  for (const auto& [entry, d] : readable) {
    if (d != report.dim) {
      report.issues.push_back(
          {entry->id, "dim mismatch " + std::to_string(d) + " \xE2\x89\xA0 " + std::to_string(report.dim)});
    }
  }
  return report;
}

}  // namespace clinrel
