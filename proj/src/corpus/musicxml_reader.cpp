#include <expat.h>

#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "climatune/corpus.hpp"
#include "climatune/error.hpp"

namespace climatune {

namespace {

struct XmlNode {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::unique_ptr<XmlNode>> children;
  std::string text;
  long line = 0;

  const XmlNode* child(std::string_view n) const {
    for (const auto& c : children) {
      if (c->name == n) return c.get();
    }
    return nullptr;
  }

  std::string attribute(std::string_view n) const {
    for (const auto& [k, v] : attributes) {
      if (k == n) return v;
    }
    return {};
  }

  std::string trimmed_text() const {
    const auto b = text.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = text.find_last_not_of(" \t\r\n");
    return text.substr(b, e - b + 1);
  }
};

class DomBuilder {
 public:
  std::unique_ptr<XmlNode> parse(std::string_view document) {
    std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser(XML_ParserCreate("UTF-8"), XML_ParserFree);
    if (!parser) throw DataError("MusicXML: could not create XML parser");
    parser_ = parser.get();
    XML_SetUserData(parser_, this);
    XML_SetElementHandler(parser_, &DomBuilder::on_start, &DomBuilder::on_end);
    XML_SetCharacterDataHandler(parser_, &DomBuilder::on_text);
    if (XML_Parse(parser_, document.data(), static_cast<int>(document.size()), XML_TRUE) == XML_STATUS_ERROR) {
      std::ostringstream msg;
      msg << "MusicXML: malformed XML at line " << XML_GetCurrentLineNumber(parser_) << ", column "
          << XML_GetCurrentColumnNumber(parser_) << ": " << XML_ErrorString(XML_GetErrorCode(parser_));
      throw DataError(msg.str());
    }
    if (!root_) throw DataError("MusicXML: document has no root element");
    return std::move(root_);
  }

 private:
  static void on_start(void* self_ptr, const XML_Char* name, const XML_Char** attrs) {
    auto* self = static_cast<DomBuilder*>(self_ptr);
    auto node = std::make_unique<XmlNode>();
    node->name = name;
    node->line = static_cast<long>(XML_GetCurrentLineNumber(self->parser_));
    for (int i = 0; attrs[i] != nullptr; i += 2) node->attributes.emplace_back(attrs[i], attrs[i + 1]);
    XmlNode* raw = node.get();
    if (self->stack_.empty()) {
      self->root_ = std::move(node);
    } else {
      self->stack_.back()->children.push_back(std::move(node));
    }
    self->stack_.push_back(raw);
  }

  static void on_end(void* self_ptr, const XML_Char*) { static_cast<DomBuilder*>(self_ptr)->stack_.pop_back(); }

  static void on_text(void* self_ptr, const XML_Char* s, int len) {
    auto* self = static_cast<DomBuilder*>(self_ptr);
    if (!self->stack_.empty()) self->stack_.back()->text.append(s, static_cast<std::size_t>(len));
  }

  XML_Parser parser_ = nullptr;
  std::unique_ptr<XmlNode> root_;
  std::vector<XmlNode*> stack_;
};

[[noreturn]] void fail_at(const XmlNode& node, const std::string& what) {
  throw DataError("MusicXML line " + std::to_string(node.line) + ": " + what);
}

int parse_int_text(const XmlNode& node) {
  const std::string t = node.trimmed_text();
  try {
    std::size_t used = 0;
    const int v = std::stoi(t, &used);
    if (used != t.size()) fail_at(node, "expected an integer in <" + node.name + ">, got '" + t + "'");
    return v;
  } catch (const std::logic_error&) {
    fail_at(node, "expected an integer in <" + node.name + ">, got '" + t + "'");
  }
}

int parse_alter(const XmlNode& node) {
  // alter may be written as "-1.0"; microtones are not representable here
  const Rational r = [&] {
    try {
      return Rational::parse(node.trimmed_text());
    } catch (const DataError&) {
      fail_at(node, "invalid <alter> '" + node.trimmed_text() + "'");
    }
  }();
  if (r.den() != 1) fail_at(node, "microtonal <alter> is not supported");
  return static_cast<int>(r.num());
}

struct PendingEvent {
  NoteEvent event;
  bool tie_open = false;
};

}  // namespace

Melody parse_musicxml(std::string_view document) {
  const std::unique_ptr<XmlNode> root = DomBuilder{}.parse(document);
  if (root->name != "score-partwise") {
    fail_at(*root, "unsupported root <" + root->name + "> (expected score-partwise)");
  }

  Melody melody;
  if (const auto* mt = root->child("movement-title")) {
    melody.source_id = mt->trimmed_text();
  } else if (const auto* work = root->child("work")) {
    if (const auto* wt = work->child("work-title")) melody.source_id = wt->trimmed_text();
  }

  const XmlNode* part = root->child("part");
  if (!part) throw DataError("MusicXML: no <part> element");

  std::int64_t divisions = 1;
  std::optional<std::string> voice;
  std::vector<PendingEvent> events;

  for (const auto& measure : part->children) {
    if (measure->name != "measure") continue;
    for (const auto& item : measure->children) {
      if (item->name == "attributes") {
        if (const auto* d = item->child("divisions")) {
          divisions = parse_int_text(*d);
          if (divisions <= 0) fail_at(*d, "divisions must be positive");
        }
        if (const auto* k = item->child("key"); k && !melody.key) {
          if (const auto* f = k->child("fifths")) {
            Mode mode = Mode::major;
            if (const auto* m = k->child("mode"); m && m->trimmed_text() == "minor") mode = Mode::minor;
            melody.key = Key::from_fifths(parse_int_text(*f), mode);
          }
        }
        continue;
      }
      if (item->name != "note") continue;
      const XmlNode& note = *item;
      if (note.child("grace") || note.child("cue")) continue;

      const std::string this_voice = note.child("voice") ? note.child("voice")->trimmed_text() : "1";
      if (!voice) voice = this_voice;
      if (this_voice != *voice) continue;

      const XmlNode* dur = note.child("duration");
      if (!dur) fail_at(note, "<note> without <duration>");
      const std::int64_t ticks = parse_int_text(*dur);
      if (ticks <= 0) fail_at(*dur, "non-positive <duration>");

      PitchToken pitch = PitchToken::rest();
      if (const XmlNode* p = note.child("pitch")) {
        const XmlNode* step = p->child("step");
        const XmlNode* octave = p->child("octave");
        if (!step || !octave) fail_at(*p, "<pitch> needs <step> and <octave>");
        const std::string s = step->trimmed_text();
        if (s.size() != 1) fail_at(*step, "invalid <step> '" + s + "'");
        const int alter = p->child("alter") ? parse_alter(*p->child("alter")) : 0;
        try {
          pitch = PitchToken::note(s[0], alter, parse_int_text(*octave));
        } catch (const DataError& e) {
          fail_at(*p, e.what());
        }
      } else if (!note.child("rest")) {
        if (note.child("unpitched")) fail_at(note, "unpitched notes are not supported");
        fail_at(note, "<note> has neither <pitch> nor <rest>");
      }

      bool tie_start = false;
      for (const auto& c : note.children) {
        if (c->name == "tie" && c->attribute("type") == "start") tie_start = true;
      }

      if (note.child("chord")) {
        // extra chord member: keep the highest pitch on the current event
        if (!events.empty() && !pitch.is_rest()) {
          NoteEvent& last = events.back().event;
          if (last.pitch.is_rest() || pitch.midi() > last.pitch.midi()) last.pitch = pitch;
        }
        continue;
      }

      const DurationToken duration{Rational(ticks, divisions)};
      if (!events.empty() && events.back().tie_open && events.back().event.pitch == pitch) {
        PendingEvent& last = events.back();
        last.event.duration = DurationToken(last.event.duration.quarter_length() + duration.quarter_length());
        last.tie_open = tie_start;
        continue;
      }
      events.push_back(PendingEvent{NoteEvent{pitch, duration}, tie_start});
    }
  }

  if (events.empty()) throw DataError("MusicXML: no note events in the first part");
  melody.events.reserve(events.size());
  for (auto& e : events) melody.events.push_back(e.event);
  return melody;
}

Melody load_musicxml_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  Melody m;
  try {
    m = parse_musicxml(buf.str());
  } catch (const DataError& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
  m.source_id = path.stem().string();
  return m;
}

}  // namespace climatune
