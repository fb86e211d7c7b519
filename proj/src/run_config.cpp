#include "latdyn/run_config.hpp"

#include "latdyn/csv_io.hpp"
#include "latdyn/errors.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>
#include <vector>

namespace latdyn {

namespace {

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!csv::parse_double(v, out)) throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("'" + key + "': expected true or false, got '" + v + "'");
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

struct Field {
  const char* section;  // "" for top-level
  const char* name;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define LD_NUM(sec, nm, member)                                                                  \
  Field {                                                                                        \
    sec, nm, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
        [](const RunConfig& c) { return csv::format_double(c.member); }                          \
  }
#define LD_INT(sec, nm, member, type)                                                            \
  Field {                                                                                        \
    sec, nm, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_int<type>(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      LD_INT("", "seed", seed, std::uint64_t),
      Field{"", "out",
            [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
            [](const RunConfig& c) { return quote(c.out_dir.string()); }},
      Field{"data", "source",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "simulate") {
                c.source = DataSource::Simulate;
              } else if (v == "csv") {
                c.source = DataSource::Csv;
              } else {
                throw ConfigError("'" + k + "': expected simulate or csv, got '" + v + "'");
              }
            },
            [](const RunConfig& c) { return quote(c.source == DataSource::Simulate ? "simulate" : "csv"); }},
      Field{"data", "path",
            [](RunConfig& c, const std::string&, const std::string& v) { c.csv_path = v; },
            [](const RunConfig& c) { return quote(c.csv_path.string()); }},
      Field{"data", "format",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "auto") {
                c.csv_format = trajkit::CsvFormat::Auto;
              } else if (v == "long") {
                c.csv_format = trajkit::CsvFormat::Long;
              } else if (v == "wide") {
                c.csv_format = trajkit::CsvFormat::Wide;
              } else {
                throw ConfigError("'" + k + "': expected auto, long or wide, got '" + v + "'");
              }
            },
            [](const RunConfig& c) {
              switch (c.csv_format) {
                case trajkit::CsvFormat::Long: return quote("long");
                case trajkit::CsvFormat::Wide: return quote("wide");
                default: return quote("auto");
              }
            }},
      LD_INT("simulate", "n_particles", sim.n_particles, int),
      LD_NUM("simulate", "box_w", sim.box_w),
      LD_NUM("simulate", "box_h", sim.box_h),
      LD_NUM("simulate", "radius", sim.radius),
      LD_NUM("simulate", "speed_scale", sim.speed_scale),
      LD_NUM("simulate", "dt", sim.dt),
      LD_INT("simulate", "n_steps", sim.n_steps, int),
      LD_NUM("simulate", "init_spread", sim.init_spread),
      LD_INT("preprocess", "smooth_window", smooth_window, int),
      LD_INT("preprocess", "smooth_order", smooth_order, int),
      Field{"preprocess", "scale",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.scale = to_bool(k, v); },
            [](const RunConfig& c) { return std::string(c.scale ? "true" : "false"); }},
      LD_INT("vae", "encoder_layers", arch.encoder_layers, int),
      LD_INT("vae", "encoder_hidden", arch.encoder_hidden, int),
      LD_INT("vae", "decoder_layers", arch.decoder_layers, int),
      LD_INT("vae", "decoder_hidden", arch.decoder_hidden, int),
      LD_INT("vae", "epochs", train.epochs, int),
      LD_NUM("vae", "learning_rate", train.learning_rate),
      LD_NUM("vae", "kl_weight", train.kl_weight),
      Field{"vae", "recon_loss",
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.train.recon_loss = vae::recon_loss_from_string(v);
            },
            [](const RunConfig& c) { return quote(vae::to_string(c.train.recon_loss)); }},
      LD_NUM("vae", "clip_norm", train.clip_norm),
      LD_INT("sindy", "sg_window", latent_sg.window, int),
      LD_INT("sindy", "sg_order", latent_sg.order, int),
      LD_INT("sindy", "degree", degree, int),
      LD_NUM("sindy", "threshold", threshold),
      LD_INT("sindy", "max_iter", max_iter, int),
      LD_NUM("sindy", "dt", latent_dt),
      LD_INT("horizon", "train", t_train, int),
      LD_INT("horizon", "extrapolate", t_extrapolate, int),
      LD_NUM("anomaly", "threshold", anomaly_threshold),
      LD_NUM("anomaly", "residual_floor", residual_floor),
      LD_NUM("repair", "premature_fraction", premature_fraction),
  };
  return table;
}

#undef LD_NUM
#undef LD_INT

std::string full_name(const Field& f) {
  return f.section[0] ? std::string(f.section) + "." + f.name : std::string(f.name);
}

std::string unquote(std::string_view v) {
  v = csv::trim(v);
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return std::string(v.substr(1, v.size() - 2));
  return std::string(v);
}

// Strips a trailing comment that is not inside quotes.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

RunConfig::RunConfig() {
  arch.encoder_layers = 1;
  arch.encoder_hidden = 64;
  arch.decoder_layers = 1;
  arch.decoder_hidden = 64;
  train.epochs = 2000;
  train.learning_rate = 1e-3;
  train.kl_weight = 1e-3;
  train.clip_norm = 5.0;
  sim.init_spread = 0.3;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (full_name(f) == key) {
      f.set(*this, key, unquote(value));
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

std::string RunConfig::get(const std::string& key) const {
  for (const auto& f : fields()) {
    if (full_name(f) == key) return unquote(f.get(*this));
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(full_name(f));
  return out;
}

void RunConfig::validate() const {
  if (source == DataSource::Csv && csv_path.empty()) throw ConfigError("data.path is required for csv input");
  if (source == DataSource::Csv && !std::filesystem::exists(csv_path)) {
    throw ConfigError("data.path '" + csv_path.string() + "' does not exist");
  }
  if (smooth_window != 0) signal::SgConfig{smooth_window, smooth_order}.validate();
  latent_sg.validate();
  if (degree < 1) throw ConfigError("sindy.degree must be >= 1");
  if (!(threshold >= 0.0)) throw ConfigError("sindy.threshold must be >= 0");
  if (!(latent_dt >= 0.0)) throw ConfigError("sindy.dt must be >= 0");
  if (t_train <= latent_sg.window) throw ConfigError("horizon.train must exceed sindy.sg_window");
  if (t_extrapolate < t_train) throw ConfigError("horizon.extrapolate must be >= horizon.train");
  if (!(premature_fraction > 0.0 && premature_fraction <= 1.0)) {
    throw ConfigError("repair.premature_fraction must be in (0, 1]");
  }
  if (!(residual_floor > 0.0)) throw ConfigError("anomaly.residual_floor must be > 0");
  train.validate();
}

std::string RunConfig::to_text() const {
  std::string out;
  std::string current;
  bool first = true;
  for (const auto& f : fields()) {
    if (std::string_view(f.name) == "out") continue;
    if (current != f.section) {
      current = f.section;
      out += (first ? "" : "\n") + std::string("[") + current + "]\n";
    }
    out += std::string(f.name) + " = " + f.get(*this) + "\n";
    first = false;
  }
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : to_text()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = csv::trim(strip_comment(line));
    if (view.empty()) continue;
    if (view.front() == '[') {
      if (view.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = std::string(csv::trim(view.substr(1, view.size() - 2)));
      continue;
    }
    const std::size_t eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(csv::trim(view.substr(0, eq)));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      base.set(full, std::string(view.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::string text;
  try {
    text = csv::read_file(path);
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_run_config(text, std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace latdyn
