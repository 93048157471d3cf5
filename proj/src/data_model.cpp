#include "adgen/data_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <set>
#include <sstream>

#include "adgen/errors.hpp"
#include "adgen/io.hpp"
#include "json.hpp"

namespace adgen {
namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError(where + ": " + what);
}

bool finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::string at_line(const char* file, std::size_t line) {
  return std::string(file) + ":" + std::to_string(line);
}

// Parses each non-empty line of a JSONL file; `fn(record, location)`.
template <typename Fn>
void for_each_record(const std::filesystem::path& dir, const char* file, Fn&& fn) {
  std::istringstream in(io::read_file(dir / file));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = at_line(file, lineno);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(where, std::string("malformed record: ") + e.what());
    }
    try {
      fn(record, where);
    } catch (const json::exception& e) {
      fail(where, std::string("bad field: ") + e.what());
    }
  }
}

class FeatureStore {
 public:
  explicit FeatureStore(const std::filesystem::path& path) {
    const std::string bytes = io::read_file(path);
    if (bytes.size() % 4 != 0) fail(path.filename().string(), "size is not a multiple of 4");
    values_.resize(bytes.size() / 4);
    for (std::size_t i = 0; i < values_.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, bytes.data() + 4 * i, 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      float f;
      std::memcpy(&f, &bits, 4);
      values_[i] = f;
    }
  }

  std::vector<double> slice(std::uint64_t offset, std::uint64_t count,
                            const std::string& where) const {
    if (offset > values_.size() || count > values_.size() - offset) {
      fail(where, "feature range [" + std::to_string(offset) + ", +" + std::to_string(count) +
                      ") exceeds features.bin (" + std::to_string(values_.size()) + " values)");
    }
    return {values_.begin() + static_cast<std::ptrdiff_t>(offset),
            values_.begin() + static_cast<std::ptrdiff_t>(offset + count)};
  }

 private:
  std::vector<double> values_;
};

class FeatureWriter {
 public:
  std::uint64_t append(std::span<const double> values) {
    const std::uint64_t offset = count_;
    for (double v : values) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      char buf[4];
      std::memcpy(buf, &bits, 4);
      bytes_.append(buf, 4);
    }
    count_ += values.size();
    return offset;
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
  std::uint64_t count_ = 0;
};

Movie& movie_for(MovieDataset& ds, const std::set<std::string>& declared, const std::string& id,
                 const std::string& where) {
  if (!declared.count(id)) fail(where, "movie '" + id + "' is not declared in manifest.json");
  return ds.movies[id];
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

std::string canonical(const std::string& word, const AliasTable& aliases) {
  const auto it = aliases.find(word);
  return it == aliases.end() ? word : it->second;
}

}  // namespace

const VideoClip& Movie::clip(std::string_view clip_id) const {
  for (const auto& c : clips) {
    if (c.clip_id == clip_id) return c;
  }
  throw ValidationError("unknown clip '" + std::string(clip_id) + "'");
}

std::string_view split_name(Split split) noexcept {
  return split == Split::Train ? "train" : "eval";
}

void validate(const MovieDataset& ds) {
  if (ds.encoder_dim == 0) fail("dataset", "encoder_dim must be positive");
  for (const auto& [movie_id, movie] : ds.movies) {
    const std::string where = "movie '" + movie_id + "'";
    std::set<std::string> clip_ids;
    const VideoClip* previous = nullptr;
    for (const auto& c : movie.clips) {
      const std::string cw = where + " clip '" + c.clip_id + "'";
      if (c.movie_id != movie_id) fail(cw, "movie id mismatch");
      if (!clip_ids.insert(c.clip_id).second) fail(cw, "duplicate clip id");
      if (!(c.start < c.end)) fail(cw, "start must be before end");
      if (c.features.rows() == 0) fail(cw, "clip has no frames");
      if (c.features.cols() != ds.encoder_dim) {
        fail(cw, "dimension mismatch: features have D=" + std::to_string(c.features.cols()) +
                     ", dataset declares " + std::to_string(ds.encoder_dim));
      }
      if (!c.features.all_finite()) fail(cw, "non-finite feature value");
      if (previous != nullptr && c.start < previous->start) fail(cw, "clips not ordered by start");
      previous = &c;
    }
    std::set<std::string> ad_ids;
    const ADRecord* prev_ad = nullptr;
    double prev_start = -INFINITY;
    for (const auto& ad : movie.ads) {
      const std::string aw = where + " AD '" + ad.ad_id + "'";
      if (ad.movie_id != movie_id) fail(aw, "movie id mismatch");
      if (!ad_ids.insert(ad.ad_id).second) fail(aw, "duplicate AD id");
      if (!clip_ids.count(ad.clip_id)) fail(aw, "dangling clip reference '" + ad.clip_id + "'");
      if (ds.split == Split::Train && ad.text.empty()) fail(aw, "empty text in a training split");
      const double start = movie.clip(ad.clip_id).start;
      if (prev_ad != nullptr && ad.index <= prev_ad->index) fail(aw, "AD index not increasing");
      if (start < prev_start) fail(aw, "AD order disagrees with clip timestamps");
      prev_ad = &ad;
      prev_start = start;
    }
    std::set<std::string> names;
    for (const auto& e : movie.bank.entries) {
      const std::string ew = where + " character '" + e.character_name + "'";
      if (e.character_name.empty()) fail(where, "character with empty name");
      if (!names.insert(e.character_name).second) fail(ew, "duplicate character name");
      if (e.portrait.size() != ds.encoder_dim) fail(ew, "dimension mismatch in portrait");
      if (!finite(e.portrait)) fail(ew, "non-finite portrait value");
      if (e.exemplar) {
        if (e.exemplar->size() != ds.encoder_dim) fail(ew, "dimension mismatch in exemplar");
        if (!finite(*e.exemplar)) fail(ew, "non-finite exemplar value");
      }
    }
    if (!movie.bank.movie_id.empty() && movie.bank.movie_id != movie_id) {
      fail(where, "character bank belongs to '" + movie.bank.movie_id + "'");
    }
  }
}

MovieDataset load_dataset(const std::filesystem::path& dir) {
  MovieDataset ds;
  json manifest;
  try {
    manifest = json::parse(io::read_file(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    fail("manifest.json", std::string("malformed: ") + e.what());
  }
  std::set<std::string> declared;
  try {
    if (manifest.value("version", 0) != kFormatVersion) {
      fail("manifest.json", "unsupported format version");
    }
    ds.encoder_dim = manifest.at("encoder_dim").get<std::size_t>();
    const std::string split = manifest.value("split", "train");
    if (split != "train" && split != "eval") fail("manifest.json", "unknown split '" + split + "'");
    ds.split = split == "train" ? Split::Train : Split::Eval;
    for (const auto& id : manifest.at("movies")) {
      const auto name = id.get<std::string>();
      declared.insert(name);
      ds.movies[name].bank.movie_id = name;
    }
    if (manifest.contains("aliases")) {
      for (const auto& [variant, canon] : manifest.at("aliases").items()) {
        ds.aliases[variant] = canon.get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    fail("manifest.json", std::string("bad field: ") + e.what());
  }
  if (ds.encoder_dim == 0) fail("manifest.json", "encoder_dim must be positive");

  const FeatureStore features(dir / "features.bin");
  const std::size_t dim = ds.encoder_dim;

  for_each_record(dir, "clips.jsonl", [&](const json& r, const std::string& where) {
    VideoClip c;
    c.clip_id = r.at("clip_id").get<std::string>();
    c.movie_id = r.at("movie_id").get<std::string>();
    c.start = r.at("start").get<double>();
    c.end = r.at("end").get<double>();
    const auto rows = r.at("rows").get<std::uint64_t>();
    const auto declared_dim = r.value("dim", static_cast<std::uint64_t>(dim));
    if (declared_dim != dim) {
      fail(where, "dimension mismatch in clip '" + c.clip_id + "': D=" +
                      std::to_string(declared_dim) + ", dataset declares " + std::to_string(dim));
    }
    if (rows == 0) fail(where, "clip '" + c.clip_id + "' has no frames");
    if (!(c.start < c.end)) fail(where, "clip '" + c.clip_id + "' start must be before end");
    c.features = Matrix(rows, dim, features.slice(r.at("offset").get<std::uint64_t>(), rows * dim,
                                                  where));
    Movie& m = movie_for(ds, declared, c.movie_id, where);
    for (const auto& other : m.clips) {
      if (other.clip_id == c.clip_id) fail(where, "duplicate clip id '" + c.clip_id + "'");
    }
    m.clips.push_back(std::move(c));
  });

  for_each_record(dir, "ads.jsonl", [&](const json& r, const std::string& where) {
    ADRecord ad;
    ad.ad_id = r.at("ad_id").get<std::string>();
    ad.movie_id = r.at("movie_id").get<std::string>();
    ad.clip_id = r.at("clip_id").get<std::string>();
    ad.text = r.at("text").get<std::string>();
    ad.index = r.at("index").get<std::int64_t>();
    Movie& m = movie_for(ds, declared, ad.movie_id, where);
    const bool resolves = std::any_of(m.clips.begin(), m.clips.end(),
                                      [&](const VideoClip& c) { return c.clip_id == ad.clip_id; });
    if (!resolves) fail(where, "dangling clip reference '" + ad.clip_id + "'");
    for (const auto& other : m.ads) {
      if (other.ad_id == ad.ad_id) fail(where, "duplicate AD id '" + ad.ad_id + "'");
    }
    m.ads.push_back(std::move(ad));
  });

  for_each_record(dir, "banks.jsonl", [&](const json& r, const std::string& where) {
    CharacterEntry e;
    const auto movie_id = r.at("movie_id").get<std::string>();
    e.character_name = r.at("character").get<std::string>();
    e.actor_name = r.value("actor", "");
    e.portrait = features.slice(r.at("portrait_offset").get<std::uint64_t>(), dim, where);
    if (r.contains("exemplar_offset")) {
      e.exemplar = features.slice(r.at("exemplar_offset").get<std::uint64_t>(), dim, where);
    }
    Movie& m = movie_for(ds, declared, movie_id, where);
    for (const auto& other : m.bank.entries) {
      if (other.character_name == e.character_name) {
        fail(where, "duplicate character '" + e.character_name + "'");
      }
    }
    m.bank.entries.push_back(std::move(e));
  });

  for (auto& [id, m] : ds.movies) {
    std::stable_sort(m.clips.begin(), m.clips.end(),
                     [](const VideoClip& a, const VideoClip& b) { return a.start < b.start; });
    std::stable_sort(m.ads.begin(), m.ads.end(),
                     [](const ADRecord& a, const ADRecord& b) { return a.index < b.index; });
  }

  if (manifest.contains("counts")) {
    std::size_t clips = 0, ads = 0, chars = 0;
    for (const auto& [id, m] : ds.movies) {
      clips += m.clips.size();
      ads += m.ads.size();
      chars += m.bank.entries.size();
    }
    const auto& counts = manifest.at("counts");
    auto check = [&](const char* key, std::size_t actual) {
      if (counts.contains(key) && counts.at(key).get<std::size_t>() != actual) {
        fail("manifest.json", std::string("count mismatch for ") + key + ": declared " +
                                  std::to_string(counts.at(key).get<std::size_t>()) + ", found " +
                                  std::to_string(actual));
      }
    };
    check("clips", clips);
    check("ads", ads);
    check("characters", chars);
  }

  validate(ds);
  return ds;
}

void write_dataset(const MovieDataset& ds, const std::filesystem::path& dir) {
  validate(ds);
  std::filesystem::create_directories(dir);
  FeatureWriter features;
  std::string clips, ads, banks;
  std::size_t n_clips = 0, n_ads = 0, n_chars = 0;
  json movies = json::array();
  for (const auto& [movie_id, m] : ds.movies) {
    movies.push_back(movie_id);
    for (const auto& c : m.clips) {
      json r{{"clip_id", c.clip_id}, {"movie_id", movie_id},           {"start", c.start},
             {"end", c.end},         {"offset", features.append(c.features.values())},
             {"rows", c.features.rows()}, {"dim", c.features.cols()}};
      clips += r.dump() + "\n";
      ++n_clips;
    }
    for (const auto& ad : m.ads) {
      json r{{"ad_id", ad.ad_id}, {"movie_id", movie_id}, {"clip_id", ad.clip_id},
             {"text", ad.text},   {"index", ad.index}};
      ads += r.dump() + "\n";
      ++n_ads;
    }
    for (const auto& e : m.bank.entries) {
      json r{{"movie_id", movie_id},
             {"character", e.character_name},
             {"actor", e.actor_name},
             {"portrait_offset", features.append(e.portrait)}};
      if (e.exemplar) r["exemplar_offset"] = features.append(*e.exemplar);
      banks += r.dump() + "\n";
      ++n_chars;
    }
  }
  json manifest{{"format", "adgen-dataset"},
                {"version", kFormatVersion},
                {"encoder_dim", ds.encoder_dim},
                {"split", std::string(split_name(ds.split))},
                {"movies", movies},
                {"counts", {{"movies", ds.movies.size()},
                            {"clips", n_clips},
                            {"ads", n_ads},
                            {"characters", n_chars}}},
                {"aliases", ds.aliases}};
  io::write_file_atomic(dir / "features.bin", features.bytes());
  io::write_file_atomic(dir / "clips.jsonl", clips);
  io::write_file_atomic(dir / "ads.jsonl", ads);
  io::write_file_atomic(dir / "banks.jsonl", banks);
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::string first_name(std::string_view character_name) {
  auto w = words(character_name);
  return w.empty() ? std::string() : std::move(w.front());
}

bool mentions(std::string_view text, std::string_view character_name, const AliasTable& aliases) {
  const std::string target = canonical(first_name(character_name), aliases);
  if (target.empty()) return false;
  for (const auto& w : words(text)) {
    if (canonical(w, aliases) == target) return true;
  }
  return false;
}

std::vector<RefinementLabel> derive_refinement_labels(const ADRecord& ad, const CharacterBank& bank,
                                                      const AliasTable& aliases) {
  std::vector<RefinementLabel> labels;
  labels.reserve(bank.entries.size());
  for (const auto& e : bank.entries) {
    labels.push_back({e.character_name, mentions(ad.text, e.character_name, aliases)});
  }
  return labels;
}

}  // namespace adgen
