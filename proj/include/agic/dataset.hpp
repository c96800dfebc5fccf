/**
 * Copyright 2026 The agic Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

// Flickr8k-style caption index: one reference per line, formatted as
//   IMAGENAME#IDX<TAB>caption
// Image files are resolved relative to an image directory.

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "agic/backend.hpp"
#include "agic/error.hpp"
#include "agic/metrics.hpp"

namespace agic {

struct DatasetEntry {
  std::string image_id;
  std::string image_path;
  std::vector<std::string> references;  // raw caption strings
};

struct DatasetIndex {
  std::vector<DatasetEntry> entries;  // first-appearance order
};

// Entries keep the order in which image names first appear.
inline DatasetIndex parse_flickr_captions(std::string_view text, const std::string& image_dir) {
  DatasetIndex index;
  std::unordered_map<std::string, std::size_t> slot;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw IoError("caption file line " + std::to_string(line_no) + ": missing TAB separator");
    }
    const std::string_view key = line.substr(0, tab);
    const std::size_t hash = key.rfind('#');
    if (hash == std::string_view::npos || hash == 0) {
      throw IoError("caption file line " + std::to_string(line_no) +
                    ": expected IMAGENAME#IDX before the TAB");
    }
    const std::string image(key.substr(0, hash));
    auto [it, inserted] = slot.emplace(image, index.entries.size());
    if (inserted) {
      index.entries.push_back(DatasetEntry{
          image, (std::filesystem::path(image_dir) / image).string(), {}});
    }
    index.entries[it->second].references.emplace_back(line.substr(tab + 1));
    if (end == text.size()) break;
  }
  if (index.entries.empty()) throw IoError("caption file contains no entries");
  return index;
}

inline DatasetIndex load_flickr_captions(const std::string& path, const std::string& image_dir) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const IoError& e) {
    throw IoError(std::string("dataset: ") + e.what());
  }
  return parse_flickr_captions(text, image_dir);
}

inline ReferenceCorpus reference_corpus(const DatasetIndex& index) {
  ReferenceCorpus refs;
  for (const auto& e : index.entries) {
    ReferenceSet set{e.image_id, {}};
    for (const auto& r : e.references) set.references.push_back(tokenize(r));
    refs.emplace(e.image_id, std::move(set));
  }
  return refs;
}

}  // namespace agic
