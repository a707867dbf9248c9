#include "geolm/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "geolm/error.hpp"
#include "utf8.hpp"

namespace geolm::corpus {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<Granularity, std::string_view>, 6> kGranularityNames{{
    {Granularity::poi, "poi"},
    {Granularity::neighborhood, "neighborhood"},
    {Granularity::city, "city"},
    {Granularity::admin, "admin"},
    {Granularity::country, "country"},
    {Granularity::unknown, "unknown"},
}};

std::optional<double> optional_number(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw std::invalid_argument(std::string(key) + " is not a number");
  return it->get<double>();
}

RawPost parse_record(const json& obj) {
  if (!obj.is_object()) throw std::invalid_argument("record is not an object");
  RawPost post;
  post.id = obj.at("id").get<std::string>();
  if (post.id.empty()) throw std::invalid_argument("empty id");
  post.text = obj.at("text").get<std::string>();
  post.lang = obj.at("lang").get<std::string>();
  const json& place = obj.at("place_name");
  if (!place.is_null()) post.place_name = place.get<std::string>();
  post.place_granularity =
      granularity_from_string(obj.at("place_granularity").get<std::string>());
  post.latitude = optional_number(obj, "lat");
  post.longitude = optional_number(obj, "lon");
  if (post.latitude && (*post.latitude < -90.0 || *post.latitude > 90.0))
    throw std::invalid_argument("latitude out of range");
  if (post.longitude && (*post.longitude < -180.0 || *post.longitude > 180.0))
    throw std::invalid_argument("longitude out of range");
  return post;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

bool starts_with_ci(std::string_view text, std::string_view prefix) {
  if (text.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = text[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

bool is_url_start(std::string_view rest) {
  return starts_with_ci(rest, "http://") || starts_with_ci(rest, "https://") ||
         starts_with_ci(rest, "www.");
}

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019; }

}  // namespace

std::string_view to_string(Granularity g) {
  for (const auto& [value, name] : kGranularityNames)
    if (value == g) return name;
  return "unknown";
}

Granularity granularity_from_string(std::string_view name) {
  for (const auto& [value, known] : kGranularityNames)
    if (known == name) return value;
  return Granularity::unknown;
}

ParseResult parse_corpus(std::istream& in) {
  if (!in) throw InputError("corpus stream is not readable");
  ParseResult result;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    try {
      RawPost post = parse_record(json::parse(line));
      if (!seen.insert(post.id).second)
        throw std::invalid_argument("duplicate id '" + post.id + "'");
      result.posts.push_back(std::move(post));
    } catch (const std::exception& e) {
      ++result.skipped;
      result.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad()) throw InputError("read failure while parsing corpus");
  return result;
}

std::vector<RawPost> filter_posts(std::span<const RawPost> posts) {
  std::vector<RawPost> kept;
  for (const RawPost& post : posts) {
    if (post.lang != "en") continue;
    if (!post.place_name || post.place_name->empty()) continue;
    if (post.place_granularity != Granularity::poi &&
        post.place_granularity != Granularity::neighborhood)
      continue;
    kept.push_back(post);
  }
  return kept;
}

std::string lowercase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  utf8::Decoder decoder(text);
  while (!decoder.done()) {
    const utf8::Unit unit = decoder.next();
    if (unit.valid)
      utf8::append(out, utf8::to_lower(unit.codepoint));
    else
      out.append(unit.bytes);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  const std::vector<utf8::Unit> units = utf8::decode_all(text);
  std::vector<std::string> tokens;
  const std::size_t n = units.size();

  auto cp_at = [&](std::size_t i) -> char32_t {
    return i < n && units[i].valid ? units[i].codepoint : 0xFFFFFFFF;
  };
  auto word_at = [&](std::size_t i) {
    return i < n && units[i].valid && utf8::is_word_char(units[i].codepoint);
  };
  // Consumes a word run starting at i, allowing apostrophes between word
  // characters ("don't"). Returns the end index.
  auto word_end = [&](std::size_t i) {
    while (i < n) {
      if (word_at(i)) {
        ++i;
      } else if (is_apostrophe(cp_at(i)) && word_at(i + 1) && i > 0 && word_at(i - 1)) {
        ++i;
      } else {
        break;
      }
    }
    return i;
  };
  auto emit = [&](std::size_t begin, std::size_t end) {
    std::string token;
    for (std::size_t k = begin; k < end; ++k) token += units[k].bytes;
    tokens.push_back(lowercase(token));
  };

  std::size_t i = 0;
  while (i < n) {
    const char32_t cp = cp_at(i);
    if (units[i].valid && utf8::is_space(cp)) {
      ++i;
      continue;
    }
    if (is_url_start(text.substr(units[i].offset))) {
      while (i < n && !(units[i].valid && utf8::is_space(units[i].codepoint))) ++i;
      tokens.emplace_back(kUrlToken);
      continue;
    }
    if (std::size_t end = utf8::emoji_sequence_end(units, i); end > i) {
      emit(i, end);
      i = end;
      continue;
    }
    if ((cp == U'#' || cp == U'@') && word_at(i + 1)) {
      const std::size_t end = word_end(i + 1);
      emit(i, end);
      i = end;
      continue;
    }
    if (word_at(i)) {
      const std::size_t end = word_end(i);
      emit(i, end);
      i = end;
      continue;
    }
    emit(i, i + 1);
    ++i;
  }
  return tokens;
}

FixtureResolver::FixtureResolver(std::map<std::string, std::set<std::string>> table) {
  for (auto& [name, types] : table) table_[lowercase(name)] = std::move(types);
}

FixtureResolver FixtureResolver::load(std::istream& in) {
  if (!in) throw InputError("place fixture stream is not readable");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError(std::string("place fixture is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw InputError("place fixture must be a JSON object");
  std::map<std::string, std::set<std::string>> table;
  for (const auto& [name, types] : doc.items()) {
    if (!types.is_array()) throw InputError("place fixture entry '" + name + "' is not an array");
    std::set<std::string>& out = table[name];
    for (const json& t : types) {
      if (!t.is_string()) throw InputError("place fixture entry '" + name + "' has a non-string type");
      out.insert(t.get<std::string>());
    }
  }
  return FixtureResolver(std::move(table));
}

PlaceResolution FixtureResolver::resolve(const std::string& name, double, double) const {
  PlaceResolution res{name, false, {}};
  auto it = table_.find(lowercase(name));
  if (it != table_.end() && !it->second.empty()) {
    res.matched = true;
    res.types = it->second;
  }
  return res;
}

PlaceResolution resolve_place(const std::string& name, double latitude, double longitude,
                              const PlaceTypeResolver& resolver) {
  if (name.empty()) throw ValidationError("resolve_place: empty place name");
  PlaceResolution res = resolver.resolve(name, latitude, longitude);
  if (!res.matched) res.types.clear();
  return res;
}

std::vector<Post> build_posts(std::span<const RawPost> raw, const PlaceTypeResolver& resolver,
                              BuildStats* stats) {
  BuildStats local;
  std::vector<Post> posts;
  for (const RawPost& r : raw) {
    if (!r.place_name || r.place_name->empty()) {
      ++local.unmatched_place;
      continue;
    }
    const PlaceResolution res = resolve_place(*r.place_name, r.latitude.value_or(NAN),
                                              r.longitude.value_or(NAN), resolver);
    if (!res.matched) {
      ++local.unmatched_place;
      continue;
    }
    std::vector<std::string> tokens = tokenize(r.text);
    if (tokens.size() < kMinTokens) {
      ++local.too_short;
      continue;
    }
    posts.push_back(Post{r.id, std::move(tokens), res.types});
  }
  if (stats) *stats = local;
  return posts;
}

void write_posts(std::ostream& out, std::span<const Post> posts) {
  for (const Post& post : posts) {
    json obj;
    obj["id"] = post.id;
    obj["tokens"] = post.tokens;
    obj["place_types"] = post.place_types;
    out << obj.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
  if (!out) throw InputError("failed writing enriched corpus");
}

std::vector<Post> read_posts(std::istream& in) {
  if (!in) throw InputError("enriched corpus stream is not readable");
  std::vector<Post> posts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line) || line.front() == '#') continue;
    try {
      const json obj = json::parse(line);
      Post post;
      post.id = obj.at("id").get<std::string>();
      post.tokens = obj.at("tokens").get<std::vector<std::string>>();
      post.place_types = obj.at("place_types").get<std::set<std::string>>();
      if (post.tokens.empty() || post.place_types.empty())
        throw std::invalid_argument("post without tokens or place types");
      posts.push_back(std::move(post));
    } catch (const std::exception& e) {
      throw InputError("enriched corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad()) throw InputError("read failure while loading enriched corpus");
  return posts;
}

}  // namespace geolm::corpus
