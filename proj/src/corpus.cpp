#include "rosprompt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "rosprompt/error.hpp"

namespace rosprompt {

namespace {

using json = nlohmann::json;

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedRecord,
              "record at line " + std::to_string(line) + ": " + what);
}

std::string field_string(const json& rec, const char* key, std::size_t line,
                         bool required) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) {
    if (required) malformed(line, std::string("missing \"") + key + "\"");
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  malformed(line, std::string("\"") + key + "\" must be a string");
}

// One CSV record per call; handles quoted fields with embedded commas,
// doubled quotes and newlines.
bool next_csv_record(std::string_view text, std::size_t& pos, std::size_t& line,
                     std::vector<std::string>& fields) {
  fields.clear();
  if (pos >= text.size()) return false;
  std::string cur;
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          cur.push_back('"');
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      ++line;
      break;
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  if (quoted) malformed(line, "unterminated quoted field");
  fields.push_back(std::move(cur));
  return true;
}

void add_record(LabeledCorpus& corpus, LabeledExample ex, std::size_t line,
                std::unordered_set<std::string>& ids,
                const std::optional<std::vector<std::string>>& catalog,
                bool require_label) {
  if (ex.id.empty()) malformed(line, "empty \"id\"");
  if (ex.text.empty()) malformed(line, "empty \"text\"");
  if (require_label && ex.label.empty()) malformed(line, "empty \"label\"");
  if (!ex.label.empty()) {
    auto& classes = corpus.classes;
    if (std::find(classes.begin(), classes.end(), ex.label) == classes.end()) {
      if (catalog) {
        throw Error(ErrorCode::UnknownClass, "record at line " + std::to_string(line) +
                                                 ": unknown class '" + ex.label + "'");
      }
      classes.push_back(ex.label);
    }
  }
  if (!ids.insert(ex.id).second) {
    throw Error(ErrorCode::DuplicateId, "duplicate id '" + ex.id + "'");
  }
  corpus.examples.push_back(std::move(ex));
}

}  // namespace

LabeledCorpus LabeledCorpus::filter_languages(std::span<const std::string> languages) const {
  if (languages.empty()) return *this;
  LabeledCorpus out{{}, classes, split};
  for (const auto& ex : examples) {
    if (std::find(languages.begin(), languages.end(), ex.language) != languages.end()) {
      out.examples.push_back(ex);
    }
  }
  return out;
}

LabeledCorpus LabeledCorpus::filter_classes(std::span<const std::string> keep) const {
  LabeledCorpus out{{}, {}, split};
  for (const auto& c : classes) {
    if (std::find(keep.begin(), keep.end(), c) != keep.end()) out.classes.push_back(c);
  }
  for (const auto& ex : examples) {
    if (std::find(keep.begin(), keep.end(), ex.label) != keep.end()) {
      out.examples.push_back(ex);
    }
  }
  return out;
}

std::vector<std::string> LabeledCorpus::languages() const {
  std::vector<std::string> out;
  for (const auto& ex : examples) {
    if (std::find(out.begin(), out.end(), ex.language) == out.end()) {
      out.push_back(ex.language);
    }
  }
  return out;
}

LabeledCorpus parse_corpus(std::string_view content, CorpusFormat format,
                           const std::optional<std::vector<std::string>>& catalog,
                           bool require_label) {
  if (format == CorpusFormat::Auto) {
    const auto first = content.find_first_not_of(" \t\r\n");
    format = first != std::string_view::npos && content[first] == '{'
                 ? CorpusFormat::JsonLines
                 : CorpusFormat::Csv;
  }
  LabeledCorpus corpus;
  if (catalog) corpus.classes = *catalog;
  std::unordered_set<std::string> ids;

  if (format == CorpusFormat::JsonLines) {
    std::size_t line = 0, pos = 0;
    while (pos <= content.size()) {
      const auto nl = content.find('\n', pos);
      const auto row = content.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
      pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
      ++line;
      if (row.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      json rec;
      try {
        rec = json::parse(row);
      } catch (const json::parse_error& e) {
        malformed(line, e.what());
      }
      if (!rec.is_object()) malformed(line, "not a JSON object");
      LabeledExample ex;
      ex.id = field_string(rec, "id", line, true);
      ex.text = field_string(rec, "text", line, true);
      ex.label = field_string(rec, "label", line, require_label);
      ex.language = field_string(rec, "lang", line, false);
      if (ex.language.empty()) ex.language = "und";
      add_record(corpus, std::move(ex), line, ids, catalog, require_label);
    }
  } else {
    std::size_t pos = 0, line = 1;
    std::vector<std::string> header, fields;
    if (!next_csv_record(content, pos, line, header)) {
      malformed(1, "missing CSV header");
    }
    auto column = [&](const char* name) -> std::ptrdiff_t {
      auto it = std::find(header.begin(), header.end(), name);
      return it == header.end() ? -1 : it - header.begin();
    };
    const auto c_id = column("id"), c_text = column("text"), c_label = column("label"),
               c_lang = column("lang");
    if (c_id < 0 || c_text < 0 || (require_label && c_label < 0)) {
      malformed(1, "CSV header must name id, text and label");
    }
    while (true) {
      const std::size_t rec_line = line;
      if (!next_csv_record(content, pos, line, fields)) break;
      if (fields.size() == 1 && fields[0].empty()) continue;
      if (fields.size() != header.size()) {
        malformed(rec_line, "expected " + std::to_string(header.size()) + " fields");
      }
      LabeledExample ex;
      ex.id = fields[static_cast<std::size_t>(c_id)];
      ex.text = fields[static_cast<std::size_t>(c_text)];
      if (c_label >= 0) ex.label = fields[static_cast<std::size_t>(c_label)];
      ex.language = c_lang >= 0 ? fields[static_cast<std::size_t>(c_lang)] : "";
      if (ex.language.empty()) ex.language = "und";
      add_record(corpus, std::move(ex), rec_line, ids, catalog, require_label);
    }
  }
  return corpus;
}

LabeledCorpus load_corpus(const std::filesystem::path& path, CorpusFormat format,
                          const std::optional<std::vector<std::string>>& catalog,
                          bool require_label) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open corpus " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (format == CorpusFormat::Auto) {
    const auto ext = path.extension().string();
    if (ext == ".csv") format = CorpusFormat::Csv;
    else if (ext == ".jsonl" || ext == ".json") format = CorpusFormat::JsonLines;
  }
  try {
    return parse_corpus(ss.str(), format, catalog, require_label);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace rosprompt
