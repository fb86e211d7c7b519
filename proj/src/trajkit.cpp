#include "latdyn/trajkit.hpp"

#include "latdyn/csv_io.hpp"
#include "latdyn/errors.hpp"

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

namespace latdyn {

void TrajectorySet::validate() const {
  if (features.rows() < 1) throw InputError("trajectory set has no timesteps");
  if (features.cols() < 2 || features.cols() % 2 != 0) {
    throw InputError("trajectory set needs an even, non-zero column count, got " +
                     std::to_string(features.cols()));
  }
  if (particle_ids.size() != particles()) {
    throw InputError("trajectory set has " + std::to_string(particles()) + " particles but " +
                     std::to_string(particle_ids.size()) + " ids");
  }
  if (!features.allFinite()) throw InputError("trajectory set contains non-finite values");
}

std::vector<std::string> default_particle_ids(std::size_t k) {
  std::vector<std::string> ids;
  ids.reserve(k);
  for (std::size_t i = 1; i <= k; ++i) ids.push_back(std::to_string(i));
  return ids;
}

namespace trajkit {

namespace {

struct RawLine {
  std::size_t number;
  std::vector<std::string_view> fields;
};

long parse_frame(std::string_view field, std::size_t line) {
  long v = 0;
  field = csv::trim(field);
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw InputError("line " + std::to_string(line) + ", column 1 ('frame'): not an integer frame: '" +
                     std::string(field) + "'");
  }
  return v;
}

double parse_value(std::string_view field, std::size_t line, std::size_t column, std::string_view name) {
  double v = 0.0;
  if (!csv::parse_double(field, v)) {
    throw InputError("line " + std::to_string(line) + ", column " + std::to_string(column) + " ('" +
                     std::string(name) + "'): not a number: '" + std::string(field) + "'");
  }
  if (!std::isfinite(v)) {
    throw InputError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                     ": non-finite value");
  }
  return v;
}

// Checks that `frames` is a contiguous integer range; returns its first frame.
long frame_range(const std::map<long, std::size_t>& frames) {
  if (frames.empty()) throw InputError("no data rows");
  const long first = frames.begin()->first;
  const long last = frames.rbegin()->first;
  if (static_cast<std::size_t>(last - first + 1) != frames.size()) {
    std::string gaps;
    int listed = 0;
    for (long f = first; f <= last && listed < 10; ++f) {
      if (!frames.count(f)) {
        gaps += (listed ? ", " : "") + std::to_string(f);
        ++listed;
      }
    }
    throw InputError("missing frames: " + gaps);
  }
  return first;
}

TrajectorySet parse_long(const std::vector<RawLine>& lines) {
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> id_index;
  std::map<long, std::size_t> frames;
  struct Entry {
    long frame;
    std::size_t id;
    double x, y;
    std::size_t line;
  };
  std::vector<Entry> entries;
  for (const auto& l : lines) {
    if (l.fields.size() != 4) {
      throw InputError("line " + std::to_string(l.number) + ": expected 4 fields, got " +
                       std::to_string(l.fields.size()));
    }
    const long frame = parse_frame(l.fields[0], l.number);
    const std::string id(l.fields[1]);
    if (id.empty()) throw InputError("line " + std::to_string(l.number) + ": empty id");
    auto [it, inserted] = id_index.try_emplace(id, ids.size());
    if (inserted) ids.push_back(id);
    frames.try_emplace(frame, 0);
    entries.push_back({frame, it->second, parse_value(l.fields[2], l.number, 3, "x"),
                       parse_value(l.fields[3], l.number, 4, "y"), l.number});
  }
  const long first = frame_range(frames);
  const auto steps = static_cast<Eigen::Index>(frames.size());
  const auto k = static_cast<Eigen::Index>(ids.size());
  TrajectorySet t;
  t.features = Eigen::MatrixXd::Constant(steps, 2 * k, std::nan(""));
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(steps, k, false);
  for (const auto& e : entries) {
    const Eigen::Index row = e.frame - first;
    const auto col = static_cast<Eigen::Index>(e.id);
    if (seen(row, col)) {
      throw InputError("line " + std::to_string(e.line) + ": duplicate entry for (id " + ids[e.id] +
                       ", frame " + std::to_string(e.frame) + ")");
    }
    seen(row, col) = true;
    t.features(row, 2 * col) = e.x;
    t.features(row, 2 * col + 1) = e.y;
  }
  std::string gaps;
  int listed = 0, missing = 0;
  for (Eigen::Index row = 0; row < steps; ++row) {
    for (Eigen::Index col = 0; col < k; ++col) {
      if (seen(row, col)) continue;
      ++missing;
      if (listed < 10) {
        gaps += std::string(listed ? ", " : "") + "(id " + ids[static_cast<std::size_t>(col)] +
                ", frame " + std::to_string(first + row) + ")";
        ++listed;
      }
    }
  }
  if (missing > 0) {
    throw InputError("missing " + std::to_string(missing) + " entries: " + gaps +
                     (missing > listed ? ", ..." : ""));
  }
  t.particle_ids = std::move(ids);
  t.first_frame = first;
  return t;
}

TrajectorySet parse_wide(const std::vector<std::string>& header, const std::vector<RawLine>& lines) {
  if (header.size() < 3 || (header.size() - 1) % 2 != 0) {
    throw InputError("wide format header needs frame followed by x_<id>,y_<id> pairs");
  }
  std::vector<std::string> ids;
  for (std::size_t c = 1; c < header.size(); c += 2) {
    const std::string& hx = header[c];
    const std::string& hy = header[c + 1];
    if (hx.rfind("x_", 0) != 0 || hy.rfind("y_", 0) != 0 || hx.substr(2) != hy.substr(2) ||
        hx.size() <= 2) {
      throw InputError("wide format header: expected x_<id>,y_<id> at columns " +
                       std::to_string(c + 1) + "-" + std::to_string(c + 2) + ", got '" + hx + "','" +
                       hy + "'");
    }
    ids.push_back(hx.substr(2));
  }
  std::map<long, std::size_t> frames;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    if (l.fields.size() != header.size()) {
      throw InputError("line " + std::to_string(l.number) + ": expected " +
                       std::to_string(header.size()) + " fields, got " + std::to_string(l.fields.size()));
    }
    const long frame = parse_frame(l.fields[0], l.number);
    if (!frames.try_emplace(frame, i).second) {
      throw InputError("line " + std::to_string(l.number) + ": duplicate frame " + std::to_string(frame));
    }
  }
  const long first = frame_range(frames);
  TrajectorySet t;
  t.features.resize(static_cast<Eigen::Index>(frames.size()), static_cast<Eigen::Index>(header.size() - 1));
  for (const auto& [frame, index] : frames) {
    const auto& l = lines[index];
    for (std::size_t c = 1; c < header.size(); ++c) {
      t.features(frame - first, static_cast<Eigen::Index>(c - 1)) =
          parse_value(l.fields[c], l.number, c + 1, header[c]);
    }
  }
  t.particle_ids = std::move(ids);
  t.first_frame = first;
  return t;
}

}  // namespace

TrajectorySet parse_trajectories(const std::string& text, CsvFormat format) {
  std::istringstream in(text);
  std::vector<std::string> storage;
  std::string line;
  std::vector<std::size_t> numbers;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto view = csv::trim(line);
    if (view.empty() || view.front() == '#') continue;
    storage.emplace_back(view);
    numbers.push_back(n);
  }
  if (storage.empty()) throw InputError("trajectory CSV has no header row");
  std::vector<std::string> header;
  for (auto f : csv::split_fields(storage.front())) header.emplace_back(f);

  const bool is_long = header == std::vector<std::string>{"frame", "id", "x", "y"};
  if (format == CsvFormat::Auto) {
    if (is_long) {
      format = CsvFormat::Long;
    } else if (!header.empty() && header.front() == "frame") {
      format = CsvFormat::Wide;
    } else {
      throw InputError("unrecognised trajectory CSV header; expected 'frame,id,x,y' or 'frame,x_<id>,y_<id>,...'");
    }
  }
  if (format == CsvFormat::Long && !is_long) throw InputError("long format header must be exactly 'frame,id,x,y'");
  if (format == CsvFormat::Wide && (header.empty() || header.front() != "frame")) {
    throw InputError("wide format header must start with 'frame'");
  }

  std::vector<RawLine> lines;
  lines.reserve(storage.size() - 1);
  for (std::size_t i = 1; i < storage.size(); ++i) lines.push_back({numbers[i], csv::split_fields(storage[i])});

  TrajectorySet t = format == CsvFormat::Long ? parse_long(lines) : parse_wide(header, lines);
  t.validate();
  return t;
}

TrajectorySet load_trajectories(const std::filesystem::path& path, CsvFormat format) {
  try {
    return parse_trajectories(csv::read_file(path), format);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string format_trajectories(const TrajectorySet& t, const std::vector<std::string>& comments) {
  t.validate();
  for (const auto& id : t.particle_ids) {
    if (id.empty() || id.find_first_of(",\n\r#") != std::string::npos) {
      throw InputError("particle id '" + id + "' cannot be written to CSV");
    }
  }
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "frame,id,x,y\n";
  for (Eigen::Index s = 0; s < t.steps(); ++s) {
    const std::string frame = std::to_string(t.first_frame + s);
    for (std::size_t i = 0; i < t.particles(); ++i) {
      const auto p = t.position(s, i);
      out += frame;
      out += ',';
      out += t.particle_ids[i];
      out += ',';
      out += csv::format_double(p.x());
      out += ',';
      out += csv::format_double(p.y());
      out += '\n';
    }
  }
  return out;
}

void write_trajectories(const TrajectorySet& t, const std::filesystem::path& path,
                        const std::vector<std::string>& comments) {
  csv::write_file(path, format_trajectories(t, comments));
}

Scaled minmax_scale(const TrajectorySet& t) {
  t.validate();
  ScalerParams s{t.features.colwise().minCoeff().transpose(), t.features.colwise().maxCoeff().transpose()};
  return {apply_scale(t, s), std::move(s)};
}

TrajectorySet apply_scale(const TrajectorySet& t, const ScalerParams& s) {
  if (s.min.size() != t.features.cols() || s.max.size() != t.features.cols()) {
    throw ShapeError("scaler has " + std::to_string(s.min.size()) + " columns, data has " +
                     std::to_string(t.features.cols()));
  }
  TrajectorySet out = t;
  for (Eigen::Index c = 0; c < t.features.cols(); ++c) {
    const double range = s.max(c) - s.min(c);
    if (range > 0.0) {
      out.features.col(c) = (t.features.col(c).array() - s.min(c)) / range;
    } else {
      out.features.col(c).setZero();
    }
  }
  return out;
}

Eigen::MatrixXd inverse_scale(const Eigen::MatrixXd& scaled, const ScalerParams& s) {
  if (s.min.size() != scaled.cols() || s.max.size() != scaled.cols()) {
    throw ShapeError("scaler has " + std::to_string(s.min.size()) + " columns, data has " +
                     std::to_string(scaled.cols()));
  }
  Eigen::MatrixXd out(scaled.rows(), scaled.cols());
  for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
    out.col(c) = scaled.col(c).array() * (s.max(c) - s.min(c)) + s.min(c);
  }
  return out;
}

TrajectorySet inverse_scale(const TrajectorySet& t, const ScalerParams& s) {
  TrajectorySet out = t;
  out.features = inverse_scale(t.features, s);
  return out;
}

TrajectorySet smooth_trajectories(const TrajectorySet& t, int window, int order) {
  t.validate();
  const signal::SgConfig cfg{window, order};
  cfg.validate();
  TrajectorySet out = t;
  for (Eigen::Index c = 0; c < t.features.cols(); ++c) {
    out.features.col(c) = signal::sg_filter({t.features.col(c), 1.0}, cfg).values;
  }
  return out;
}

std::string scaler_to_json(const ScalerParams& s) {
  nlohmann::ordered_json j;
  j["min"] = std::vector<double>(s.min.data(), s.min.data() + s.min.size());
  j["max"] = std::vector<double>(s.max.data(), s.max.data() + s.max.size());
  return j.dump(2) + "\n";
}

ScalerParams scaler_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto lo = j.at("min").get<std::vector<double>>();
    const auto hi = j.at("max").get<std::vector<double>>();
    if (lo.size() != hi.size()) throw InputError("scaler JSON: min and max lengths differ");
    ScalerParams s{Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size())),
                   Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()))};
    for (Eigen::Index i = 0; i < s.min.size(); ++i) {
      if (s.max(i) < s.min(i)) throw InputError("scaler JSON: max < min at column " + std::to_string(i));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("scaler JSON: ") + e.what());
  }
}

}  // namespace trajkit
}  // namespace latdyn
