// Copyright 2026 The DP-Fusion Engine Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpfusion/document.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dpfusion/error.h"

namespace dpfusion {
namespace {

using nlohmann::json;

[[noreturn]] void Malformed(const std::string& what) {
  throw Error(ErrorCode::kMalformedDocument, what);
}

bool IsUtf8Continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

// One left-to-right pass so slot-like text inside a value is never expanded.
std::string SubstituteSlots(std::string_view tmpl,
                            const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool matched = false;
    if (tmpl[i] == '{') {
      for (const auto& [name, value] : slots) {
        const std::string key = "{" + name + "}";
        if (tmpl.compare(i, key.size(), key) == 0) {
          out += value;
          i += key.size();
          matched = true;
          break;
        }
      }
    }
    if (!matched) out += tmpl[i++];
  }
  return out;
}

std::string Render(const AnnotatedDocument& doc,
                   const std::set<int>& revealed, std::string_view placeholder,
                   int replaced_group,
                   const std::vector<std::string>* replacements) {
  const std::string& text = doc.text();
  std::string out;
  out.reserve(text.size());
  std::size_t cursor = 0;
  std::size_t replacement_index = 0;
  for (const Span& span : doc.spans()) {
    out.append(text, cursor, span.start - cursor);
    if (replacements != nullptr && span.group == replaced_group) {
      out += (*replacements)[replacement_index++];
    } else if (revealed.contains(span.group)) {
      out.append(text, span.start, span.end - span.start);
    } else {
      out += placeholder;
    }
    cursor = span.end;
  }
  out.append(text, cursor, std::string::npos);
  return out;
}

}  // namespace

std::size_t Utf8Length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if (!IsUtf8Continuation(c)) ++n;
  }
  return n;
}

AnnotatedDocument::AnnotatedDocument(std::string doc_id, std::string text,
                                     std::vector<Span> spans,
                                     std::vector<PrivacyGroup> groups,
                                     DocumentLimits limits)
    : doc_id_(std::move(doc_id)),
      text_(std::move(text)),
      spans_(std::move(spans)),
      groups_(std::move(groups)) {
  if (Utf8Length(text_) > limits.max_chars) {
    Malformed("document exceeds " + std::to_string(limits.max_chars) +
              " characters");
  }
  if (groups_.size() > limits.max_groups) {
    Malformed("document has " + std::to_string(groups_.size()) +
              " privacy groups, limit is " + std::to_string(limits.max_groups));
  }
  std::sort(groups_.begin(), groups_.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < groups_.size(); ++i) {
    if (groups_[i].id != static_cast<int>(i) + 1) {
      Malformed("group ids must be distinct and contiguous from 1");
    }
    if (!(groups_[i].beta > 0.0)) {
      Malformed("group " + std::to_string(groups_[i].id) +
                " has non-positive budget");
    }
  }
  std::sort(spans_.begin(), spans_.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  std::size_t previous_end = 0;
  for (const Span& span : spans_) {
    if (span.start >= span.end || span.end > text_.size()) {
      Malformed("span [" + std::to_string(span.start) + ", " +
                std::to_string(span.end) + ") is empty or out of bounds");
    }
    if (span.start < previous_end) Malformed("spans overlap");
    if (span.group < 1 || span.group > static_cast<int>(groups_.size())) {
      Malformed("span references unknown group " + std::to_string(span.group));
    }
    const auto at_boundary = [&](std::size_t offset) {
      return offset == text_.size() ||
             !IsUtf8Continuation(static_cast<unsigned char>(text_[offset]));
    };
    if (!at_boundary(span.start) || !at_boundary(span.end)) {
      Malformed("span splits a UTF-8 sequence");
    }
    previous_end = span.end;
  }
}

const PrivacyGroup& AnnotatedDocument::group(int id) const {
  if (id < 1 || id > static_cast<int>(groups_.size())) {
    throw Error(ErrorCode::kInvalidInput, "unknown group " + std::to_string(id));
  }
  return groups_[id - 1];
}

std::vector<Span> AnnotatedDocument::SpansOf(int group_id) const {
  std::vector<Span> out;
  for (const Span& span : spans_) {
    if (span.group == group_id) out.push_back(span);
  }
  return out;
}

ContextView RenderView(const AnnotatedDocument& doc,
                       const std::set<int>& revealed,
                       std::string_view placeholder) {
  return {Render(doc, revealed, placeholder, 0, nullptr), revealed};
}

Partition PartitionDocument(const AnnotatedDocument& doc,
                            std::string_view placeholder) {
  Partition partition;
  partition.public_view = RenderView(doc, {}, placeholder);
  partition.group_views.reserve(doc.group_count());
  for (const PrivacyGroup& group : doc.groups()) {
    partition.group_views.push_back(RenderView(doc, {group.id}, placeholder));
  }
  return partition;
}

ContextView AllButOneView(const AnnotatedDocument& doc, int hidden_group,
                          std::string_view placeholder) {
  doc.group(hidden_group);
  std::set<int> revealed;
  for (const PrivacyGroup& group : doc.groups()) {
    if (group.id != hidden_group) revealed.insert(group.id);
  }
  return RenderView(doc, revealed, placeholder);
}

std::string RenderWithReplacement(
    const AnnotatedDocument& doc, int group_id,
    const std::vector<std::string>& replacements) {
  doc.group(group_id);
  if (replacements.size() != doc.SpansOf(group_id).size()) {
    throw Error(ErrorCode::kInvalidInput,
                "candidate has " + std::to_string(replacements.size()) +
                    " parts but group " + std::to_string(group_id) + " has " +
                    std::to_string(doc.SpansOf(group_id).size()) + " spans");
  }
  std::set<int> all;
  for (const PrivacyGroup& group : doc.groups()) all.insert(group.id);
  return Render(doc, all, "", group_id, &replacements);
}

PromptBundle PromptBundle::Default() {
  PromptBundle bundle;
  bundle.system_text =
      "<|im_start|>system\n"
      "You are given a passage that may contain placeholders (underscores)\n"
      "or incomplete data. Your job is to produce a natural paraphrase.\n"
      "Do not use any underscores or placeholders in your output.\n"
      "If data is missing, just omit it or paraphrase gracefully.\n"
      "Do not output anything except the paraphrase.\n"
      "Make sure to retain all information from the source document.\n"
      "<|im_end|>\n";
  bundle.user_text =
      "<|im_start|>user\n"
      "Document:\n"
      "\n"
      "{private_doc}\n"
      "\n"
      "Paraphrase the above text. Whenever a placeholder\xE2\x80\x94\n"
      "for example, {placeholder}\xE2\x80\x94"
      "appears, you must completely ignore it,\n"
      "as it indicates redacted content. To ensure the generated text\n"
      "is as natural as possible, never output the placeholders themselves.\n"
      "{extra_instruction}"
      "<|im_end|>\n";
  bundle.assistant_prefix =
      "<|im_start|>assistant\n"
      "Sure, Here is the paraphrased document without underscores\n"
      "or placeholders:\n";
  return bundle;
}

PromptBundle PromptBundle::WithPrivacyInstruction() {
  PromptBundle bundle = Default();
  bundle.extra_instruction = std::string(kPrivacyInstruction);
  return bundle;
}

std::string AssemblePrompt(const ContextView& view,
                           const PromptBundle& bundle) {
  if (bundle.placeholder.empty()) {
    throw Error(ErrorCode::kInvalidInput, "placeholder must be non-empty");
  }
  const std::string extra = bundle.extra_instruction.empty()
                                ? std::string()
                                : bundle.extra_instruction + "\n";
  return bundle.system_text +
         SubstituteSlots(bundle.user_text,
                         {{"private_doc", view.rendered_text},
                          {"placeholder", bundle.placeholder},
                          {"extra_instruction", extra}}) +
         bundle.assistant_prefix;
}

AnnotatedDocument ParseDocumentJson(std::string_view text,
                                    DocumentLimits limits) {
  json j;
  try {
    j = json::parse(text);
    std::vector<Span> spans;
    for (const auto& s : j.value("spans", json::array())) {
      const auto start = s.at("start").get<long long>();
      const auto end = s.at("end").get<long long>();
      if (start < 0 || end < 0) Malformed("negative span offset");
      spans.push_back({static_cast<std::size_t>(start),
                       static_cast<std::size_t>(end), s.at("group").get<int>()});
    }
    std::vector<PrivacyGroup> groups;
    for (const auto& g : j.value("groups", json::array())) {
      groups.push_back({g.at("id").get<int>(), g.value("label", std::string()),
                        g.at("beta").get<double>()});
    }
    return AnnotatedDocument(j.at("doc_id").get<std::string>(),
                             j.at("text").get<std::string>(), std::move(spans),
                             std::move(groups), limits);
  } catch (const json::exception& e) {
    Malformed(std::string("bad document JSON: ") + e.what());
  }
}

std::string DocumentToJson(const AnnotatedDocument& doc) {
  json spans = json::array();
  for (const Span& s : doc.spans()) {
    spans.push_back({{"start", s.start}, {"end", s.end}, {"group", s.group}});
  }
  json groups = json::array();
  for (const PrivacyGroup& g : doc.groups()) {
    groups.push_back({{"id", g.id}, {"label", g.label}, {"beta", g.beta}});
  }
  return json{{"doc_id", doc.doc_id()},
              {"text", doc.text()},
              {"spans", spans},
              {"groups", groups}}
      .dump();
}

std::vector<AnnotatedDocument> LoadDocuments(const std::string& path,
                                             DocumentLimits limits) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kInvalidInput, "cannot open " + path);
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string contents = buffer.str();
  std::vector<AnnotatedDocument> docs;
  // A pretty-printed single object spans lines, so try the whole file first.
  if (json::accept(contents)) {
    docs.push_back(ParseDocumentJson(contents, limits));
    return docs;
  }
  std::istringstream lines(contents);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    docs.push_back(ParseDocumentJson(line, limits));
  }
  return docs;
}

PromptBundle LoadPromptBundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open " + path);
  PromptBundle bundle = PromptBundle::Default();
  try {
    const json j = json::parse(in);
    bundle.system_text = j.value("system", bundle.system_text);
    bundle.user_text = j.value("user", bundle.user_text);
    bundle.assistant_prefix = j.value("assistant", bundle.assistant_prefix);
    bundle.placeholder = j.value("placeholder", bundle.placeholder);
    bundle.extra_instruction =
        j.value("extra_instruction", bundle.extra_instruction);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidInput,
                std::string("bad template JSON: ") + e.what());
  }
  return bundle;
}

}  // namespace dpfusion
