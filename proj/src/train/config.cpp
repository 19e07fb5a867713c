#include "drssl/train/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "drssl/error.hpp"

namespace drssl::train {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + want);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(parse_u64(key, v));
}

// Accepts inf/-inf so gates can be forced open or shut.
double parse_real(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0.0;
  in >> out;
  if (in.fail() || !in.eof() || !std::isfinite(out)) bad_value(key, v, "a real number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::int32_t> parse_ids(const std::string& key, const std::string& v) {
  std::vector<std::int32_t> out;
  std::stringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    std::int32_t id = 0;
    const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), id);
    if (item.empty() || ec != std::errc() || p != item.data() + item.size()) {
      bad_value(key, v, "a comma-separated list of subject ids");
    }
    out.push_back(id);
  }
  return out;
}

std::string fmt_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream out;
  out.imbue(std::locale::classic());
  out.precision(17);
  out << v;
  return out.str();
}

std::string fmt_ids(const std::vector<std::int32_t>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(ids[i]);
  }
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class M>
Field size_field(M member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            std::invoke(member, c) = parse_size(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(std::invoke(member, c)); }};
}

template <class M>
Field u64_field(M member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            std::invoke(member, c) = parse_u64(k, v);
          },
          [member](const RunConfig& c) { return std::to_string(std::invoke(member, c)); }};
}

template <class M>
Field real_field(M member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            std::invoke(member, c) = parse_real(k, v);
          },
          [member](const RunConfig& c) { return fmt_real(std::invoke(member, c)); }};
}

// Ordered registry; the echo follows this order.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = [] {
    std::vector<std::pair<std::string, Field>> t;
    auto add = [&t](std::string key, Field f) { t.emplace_back(std::move(key), std::move(f)); };
    add("model.channels", size_field([](auto& c) -> auto& { return c.model.channels; }));
    add("model.window_len", size_field([](auto& c) -> auto& { return c.model.window_len; }));
    add("model.conv_filters", size_field([](auto& c) -> auto& { return c.model.conv_filters; }));
    add("model.kernel_len", size_field([](auto& c) -> auto& { return c.model.kernel_len; }));
    add("model.pool_w", size_field([](auto& c) -> auto& { return c.model.pool_w; }));
    add("model.latent_dim", size_field([](auto& c) -> auto& { return c.model.latent_dim; }));
    add("model.n_classes", size_field([](auto& c) -> auto& { return c.model.n_classes; }));
    add("model.disc_hidden", size_field([](auto& c) -> auto& { return c.model.disc_hidden; }));
    add("model.keep_prob", real_field([](auto& c) -> auto& { return c.model.keep_prob; }));

    add("train.thre_a", real_field([](auto& c) -> auto& { return c.train.thre_a; }));
    add("train.thre_rec", real_field([](auto& c) -> auto& { return c.train.thre_rec; }));
    add("train.lr", real_field([](auto& c) -> auto& { return c.train.adam.lr; }));
    add("train.beta1", real_field([](auto& c) -> auto& { return c.train.adam.beta1; }));
    add("train.beta2", real_field([](auto& c) -> auto& { return c.train.adam.beta2; }));
    add("train.eps", real_field([](auto& c) -> auto& { return c.train.adam.eps; }));
    add("train.batch_l", size_field([](auto& c) -> auto& { return c.train.batch_l; }));
    add("train.batch_u", size_field([](auto& c) -> auto& { return c.train.batch_u; }));
    add("train.epochs", size_field([](auto& c) -> auto& { return c.train.epochs; }));
    add("train.steps", size_field([](auto& c) -> auto& { return c.train.steps; }));
    add("train.seed", u64_field([](auto& c) -> auto& { return c.train.seed; }));
    add("train.eval_every", size_field([](auto& c) -> auto& { return c.train.eval_every; }));
    add("train.variant",
        {[](RunConfig& c, const std::string&, const std::string& v) { c.train.variant = parse_variant(v); },
         [](const RunConfig& c) { return std::string(to_string(c.train.variant)); }});

    add("task.n_subjects", size_field([](auto& c) -> auto& { return c.task.n_subjects; }));
    add("task.n_per_class", size_field([](auto& c) -> auto& { return c.task.n_per_class; }));
    add("task.noise_std", real_field([](auto& c) -> auto& { return c.task.noise_std; }));
    add("task.shift", real_field([](auto& c) -> auto& { return c.task.shift; }));
    add("task.offset_std", real_field([](auto& c) -> auto& { return c.task.scales.offset_std; }));
    add("task.amplitude_std", real_field([](auto& c) -> auto& { return c.task.scales.amplitude_std; }));
    add("task.mixing_std", real_field([](auto& c) -> auto& { return c.task.scales.mixing_std; }));
    add("task.base_freq", real_field([](auto& c) -> auto& { return c.task.signal.base_freq; }));
    add("task.freq_step", real_field([](auto& c) -> auto& { return c.task.signal.freq_step; }));
    add("task.phase_jitter", real_field([](auto& c) -> auto& { return c.task.signal.phase_jitter; }));
    add("task.seed", u64_field([](auto& c) -> auto& { return c.task.seed; }));

    add("split.labeled",
        {[](RunConfig& c, const std::string& k, const std::string& v) { c.labeled_subjects = parse_ids(k, v); },
         [](const RunConfig& c) { return fmt_ids(c.labeled_subjects); }});
    add("split.unlabeled",
        {[](RunConfig& c, const std::string& k, const std::string& v) { c.unlabeled_subjects = parse_ids(k, v); },
         [](const RunConfig& c) { return fmt_ids(c.unlabeled_subjects); }});
    add("split.seed", u64_field([](auto& c) -> auto& { return c.split_seed; }));
    add("split.stratified",
        {[](RunConfig& c, const std::string& k, const std::string& v) { c.stratified = parse_bool(k, v); },
         [](const RunConfig& c) { return std::string(c.stratified ? "true" : "false"); }});
    return t;
  }();
  return table;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
    }
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(n) + ": empty key");
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(n) + ": duplicate key '" + key + "'");
    }
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, field] : fields()) {
    if (name == key) {
      field.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply(const KeyValues& kv) {
  for (const auto& [k, v] : kv) set(k, v);
}

KeyValues RunConfig::echo() const {
  KeyValues out;
  for (const auto& [name, field] : fields()) out.emplace_back(name, field.get(*this));
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : echo()) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (task.n_per_class == 0) throw ConfigError("task.n_per_class must be >= 1");
  if (!(task.noise_std >= 0.0)) throw ConfigError("task.noise_std must be >= 0");
  if (!(task.shift >= 0.0)) throw ConfigError("task.shift must be >= 0");
  if (!(task.scales.offset_std >= 0.0) || !(task.scales.amplitude_std >= 0.0) || !(task.scales.mixing_std >= 0.0))
    throw ConfigError("task.offset_std, task.amplitude_std and task.mixing_std must be >= 0");
}

data::TaskConfig RunConfig::resolved_task() const {
  data::TaskConfig t = task;
  t.channels = model.channels;
  t.window_len = model.window_len;
  t.n_classes = model.n_classes;
  return t;
}

data::SplitSpec RunConfig::split() const {
  return {labeled_subjects, unlabeled_subjects, split_seed, stratified};
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(DataErrorCode::io_error, "cannot read config " + path);
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig c;
  c.apply(parse_key_values(text.str()));
  return c;
}

}  // namespace drssl::train
