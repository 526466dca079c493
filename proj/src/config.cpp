#include "treedet/cli.hpp"
#include "treedet/io.hpp"
#include "treedet/schemes.hpp"

#include <algorithm>
#include <regex>
#include <set>

namespace treedet::cli {

namespace {

const std::set<std::string> kKeys = {"schema", "scheme",  "m",      "k",        "letter",         "delta",
                                     "prior0", "t",       "t_range", "engine",  "trials",         "seed",
                                     "analyses", "eta_min", "d",     "search",  "rational_max_t", "out_dir"};
const std::set<std::string> kAnalyses = {"bounds", "assumptions", "lemma4", "theorem3", "lemma6", "fit"};

int line_at_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

int line_of_key(const std::string& text, const std::string& key) {
  const std::regex pattern("\"" + key + "\"\\s*:");
  std::smatch match;
  if (std::regex_search(text, match, pattern)) return line_at_offset(text, static_cast<std::size_t>(match.position(0)));
  return 1;
}

class Reader {
 public:
  Reader(const std::string& text, const std::string& source, const io::Json& root)
      : text_(text), source_(source), root_(root) {}

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(source_, line_of_key(text_, key), what);
  }

  bool has(const std::string& key) const { return root_.contains(key); }
  const io::Json& at(const std::string& key) const { return root_.at(key); }

  long integer(const std::string& key, long lo, long hi) const {
    const io::Json& v = at(key);
    if (!v.is_number_integer()) fail(key, "\"" + key + "\" must be an integer");
    long x = v.get<long>();
    if (x < lo || x > hi)
      fail(key, "\"" + key + "\" must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const io::Json& v = at(key);
    if (!v.is_number_unsigned()) fail(key, "\"" + key + "\" must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string& key) const {
    if (!at(key).is_string()) fail(key, "\"" + key + "\" must be a string");
    return at(key).get<std::string>();
  }

  Probability probability(const std::string& key) const {
    try {
      return io::probability_from_json(at(key));
    } catch (const std::exception& e) {
      fail(key, "\"" + key + "\": " + e.what());
    }
  }

 private:
  const std::string& text_;
  const std::string& source_;
  const io::Json& root_;
};

bool strictly_between(const Probability& p, const mpq_class& lo, const mpq_class& hi) {
  if (p.is_exact()) return p.exact() > lo && p.exact() < hi;
  return p.value() > lo.get_d() && p.value() < hi.get_d();
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

ChannelSpec ExperimentConfig::channel() const {
  if (delta.is_exact() && prior0.is_exact()) return make_bsc_channel(delta.exact(), prior0.exact());
  return make_bsc_channel(delta.value(), prior0.value());
}

bool ExperimentConfig::wants(const std::string& analysis) const {
  return std::find(analyses.begin(), analyses.end(), analysis) != analyses.end();
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  io::Json root;
  try {
    root = io::Json::parse(text);
  } catch (const io::Json::parse_error& e) {
    throw ConfigError(source, line_at_offset(text, e.byte > 0 ? e.byte - 1 : 0), "malformed JSON");
  }
  if (!root.is_object()) throw ConfigError(source, 1, "config must be a JSON object");
  const Reader r(text, source, root);
  for (auto it = root.begin(); it != root.end(); ++it)
    if (!kKeys.count(it.key())) r.fail(it.key(), "unknown key \"" + it.key() + "\"");

  ExperimentConfig c;
  c.source = source;
  if (!r.has("schema")) throw ConfigError(source, 1, "missing \"schema\" (expected 1)");
  if (r.integer("schema", 0, 1000) != 1) r.fail("schema", "unsupported schema version (expected 1)");

  if (!r.has("scheme")) throw ConfigError(source, 1, "missing \"scheme\"");
  c.scheme = r.string("scheme");
  if (!is_known_scheme(c.scheme)) r.fail("scheme", "unknown scheme \"" + c.scheme + "\"");

  if (!r.has("k")) throw ConfigError(source, 1, "missing \"k\"");
  c.k = static_cast<int>(r.integer("k", 2, 16));
  if (c.scheme.rfind("quantizer", 0) == 0) {
    if (!r.has("m")) throw ConfigError(source, 1, "quantizer scheme needs \"m\"");
    c.m = static_cast<int>(r.integer("m", 3, 64));
  } else {
    c.m = r.has("m") ? static_cast<int>(r.integer("m", 2, 2)) : 2;
  }
  if (r.has("letter")) {
    if (c.scheme != "constant-fixture") r.fail("letter", "\"letter\" only applies to constant-fixture");
    c.letter = static_cast<int>(r.integer("letter", 0, 1));
  }

  if (!r.has("delta")) throw ConfigError(source, 1, "missing \"delta\"");
  c.delta = r.probability("delta");
  if (!strictly_between(c.delta, 0, mpq_class(1, 2))) r.fail("delta", "\"delta\" must lie in (0, 1/2)");
  if (r.has("prior0")) {
    c.prior0 = r.probability("prior0");
    if (!strictly_between(c.prior0, 0, 1)) r.fail("prior0", "\"prior0\" must lie in (0, 1)");
  }

  if (r.has("t") == r.has("t_range")) throw ConfigError(source, 1, "give exactly one of \"t\" and \"t_range\"");
  if (r.has("t")) {
    c.t_min = c.t_max = static_cast<int>(r.integer("t", 1, 64));
  } else {
    const io::Json& range = r.at("t_range");
    if (!range.is_array() || range.size() != 2 || !range[0].is_number_integer() || !range[1].is_number_integer())
      r.fail("t_range", "\"t_range\" must be [first, last] integers");
    c.t_min = range[0].get<int>();
    c.t_max = range[1].get<int>();
    if (c.t_min < 1 || c.t_max < c.t_min) r.fail("t_range", "\"t_range\" must be nonempty, increasing and start at 1 or later");
    if (c.t_max > 64) r.fail("t_range", "\"t_range\" may not exceed 64");
  }

  if (r.has("engine")) {
    c.engine = r.string("engine");
    c.engine_line = line_of_key(text, "engine");
    if (c.engine != "float" && c.engine != "rational" && c.engine != "mc")
      r.fail("engine", "\"engine\" must be float, rational or mc");
  }
  if (r.has("trials")) {
    c.trials = r.unsigned_integer("trials");
    if (c.trials == 0) r.fail("trials", "\"trials\" must be positive");
  }
  if (r.has("seed")) {
    if (c.engine != "mc") r.fail("seed", "\"seed\" is only valid with the mc engine");
    c.seed = r.unsigned_integer("seed");
  }

  if (r.has("analyses")) {
    const io::Json& a = r.at("analyses");
    if (!a.is_array()) r.fail("analyses", "\"analyses\" must be an array of names");
    for (const auto& name : a) {
      if (!name.is_string() || !kAnalyses.count(name.get<std::string>()))
        r.fail("analyses", "unknown analysis " + name.dump());
      c.analyses.push_back(name.get<std::string>());
    }
  } else {
    c.analyses = {"bounds", "assumptions", "lemma6"};
    if (c.scheme.rfind("quantizer", 0) == 0) c.analyses.insert(c.analyses.end(), {"lemma4", "theorem3"});
  }
  if (r.has("eta_min")) {
    const io::Json& v = r.at("eta_min");
    if (!v.is_number() || !(v.get<double>() > 0.0) || !(v.get<double>() < 1.0))
      r.fail("eta_min", "\"eta_min\" must be a number in (0, 1)");
    c.eta_min = v.get<double>();
  }
  if (r.has("d")) c.d = static_cast<int>(r.integer("d", 1, c.m - 1));

  if (r.has("search")) {
    const io::Json& s = r.at("search");
    if (!s.is_object()) r.fail("search", "\"search\" must be an object");
    for (auto it = s.begin(); it != s.end(); ++it) {
      if (it.key() == "mode") {
        auto mode = it.value().is_string() ? parse_search_mode(it.value().get<std::string>()) : std::nullopt;
        if (!mode) r.fail("mode", "search mode must be per_node or level_homogeneous");
        c.search_mode = *mode;
      } else if (it.key() == "max_combinations") {
        if (!it.value().is_number_unsigned() || it.value().get<std::uint64_t>() == 0)
          r.fail("max_combinations", "\"max_combinations\" must be a positive integer");
        c.max_combinations = it.value().get<std::uint64_t>();
      } else {
        r.fail(it.key(), "unknown search key \"" + it.key() + "\"");
      }
    }
  }
  if (r.has("rational_max_t")) c.rational_max_t = static_cast<int>(r.integer("rational_max_t", 1, 64));
  if (r.has("out_dir")) c.out_dir = r.string("out_dir");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(path, 0, e.what());
  }
  return parse_config(text, path);
}

}  // namespace treedet::cli
