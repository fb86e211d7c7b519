#include "latdyn/sindy.hpp"

#include "latdyn/csv_io.hpp"
#include "latdyn/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>

namespace latdyn::sindy {

std::string CandidateLibrary::term_name(int j) const {
  if (j == 0) return "1";
  if (j == 1) return "z";
  return "z^" + std::to_string(j);
}

Matrix build_library(const Vector& z, int degree) {
  if (degree < 1) throw ConfigError("library degree must be >= 1");
  Matrix theta(z.size(), degree + 1);
  theta.col(0).setOnes();
  for (int j = 1; j <= degree; ++j) theta.col(j) = theta.col(j - 1).cwiseProduct(z);
  return theta;
}

namespace {

struct Solve {
  Vector x;
  bool rank_deficient;
};

Solve least_squares(const Matrix& a, const Vector& b) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
  return {cod.solve(b), cod.rank() < a.cols()};
}

}  // namespace

StlsqResult stlsq(const Matrix& theta, const Vector& dzdt, double threshold, int max_iter) {
  const Eigen::Index terms = theta.cols();
  if (theta.rows() != dzdt.size()) throw ShapeError("stlsq: library rows and derivative length differ");
  if (theta.rows() <= terms) {
    throw ConfigError("stlsq: need more samples (" + std::to_string(theta.rows()) + ") than terms (" +
                      std::to_string(terms) + ")");
  }
  if (!(threshold >= 0.0)) throw ConfigError("stlsq: threshold must be >= 0");
  if (max_iter < 1) throw ConfigError("stlsq: max_iter must be >= 1");

  StlsqResult r;
  r.coefficients = Vector::Zero(terms);
  std::vector<Eigen::Index> active(static_cast<std::size_t>(terms));
  for (Eigen::Index j = 0; j < terms; ++j) active[static_cast<std::size_t>(j)] = j;

  for (int it = 1; it <= max_iter; ++it) {
    r.iterations = it;
    Matrix sub(theta.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = theta.col(active[k]);
    const Solve s = least_squares(sub, dzdt);
    r.rank_deficient = r.rank_deficient || s.rank_deficient;
    r.coefficients.setZero();
    std::vector<Eigen::Index> kept;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const double c = s.x(static_cast<Eigen::Index>(k));
      r.coefficients(active[k]) = c;
      if (std::abs(c) >= threshold) kept.push_back(active[k]);
    }
    if (kept.empty()) {
      r.coefficients.setZero();
      r.empty = true;
      r.converged = true;
      break;
    }
    if (kept.size() == active.size()) {
      r.converged = true;
      break;
    }
    active = std::move(kept);
  }
  if (!r.converged) {
    for (Eigen::Index j = 0; j < terms; ++j) {
      if (std::abs(r.coefficients(j)) < threshold) r.coefficients(j) = 0.0;
    }
    r.empty = r.coefficients.isZero(0.0);
  }
  r.residual = std::sqrt((dzdt - theta * r.coefficients).squaredNorm() / static_cast<double>(dzdt.size()));
  return r;
}

double SindyModel::rate(double z) const {
  double acc = 0.0;
  for (Eigen::Index j = coefficients.size(); j-- > 0;) acc = acc * z + coefficients(j);
  return acc;
}

bool SindyModel::operator==(const SindyModel& other) const {
  return library.degree == other.library.degree && coefficients == other.coefficients &&
         threshold == other.threshold && provenance == other.provenance && warnings == other.warnings;
}

SindyModel discover(const signal::Series& z, const DiscoverConfig& cfg) {
  cfg.sg.validate();
  if (z.size() <= cfg.sg.window) {
    throw ConfigError("latent length " + std::to_string(z.size()) + " must exceed the filter window " +
                      std::to_string(cfg.sg.window));
  }
  const signal::Series filtered = signal::sg_filter(z, cfg.sg);
  const signal::Series dzdt = signal::estimate_derivative(filtered);
  const Matrix theta = build_library(filtered.values, cfg.degree);
  const StlsqResult fit = stlsq(theta, dzdt.values, cfg.threshold, cfg.max_iter);

  SindyModel m;
  m.library.degree = cfg.degree;
  m.coefficients = fit.coefficients;
  m.threshold = cfg.threshold;
  m.provenance = {
      {"samples", std::to_string(z.size())},
      {"dt", csv::format_double(z.dt)},
      {"sg_window", std::to_string(cfg.sg.window)},
      {"sg_order", std::to_string(cfg.sg.order)},
      {"degree", std::to_string(cfg.degree)},
      {"threshold", csv::format_double(cfg.threshold)},
      {"iterations", std::to_string(fit.iterations)},
      {"converged", fit.converged ? "true" : "false"},
      {"residual_rms", csv::format_double(fit.residual)},
  };
  if (fit.rank_deficient) m.warnings.push_back("rank-deficient active set; minimum-norm solution used");
  if (fit.empty) m.warnings.push_back("all coefficients thresholded to zero; model is dz/dt = 0");
  return m;
}

OdeSolution integrate(const SindyModel& model, double z0, double dt, long n_steps) {
  if (!(dt > 0.0)) throw ConfigError("integrate: dt must be > 0");
  if (n_steps < 0) throw ConfigError("integrate: n_steps must be >= 0");
  if (!std::isfinite(z0) || !std::isfinite(model.rate(z0))) {
    throw InputError("integrate: model rate is not finite at z0");
  }
  OdeSolution sol;
  sol.dt = dt;
  sol.z0 = z0;
  std::vector<double> z{z0};
  z.reserve(static_cast<std::size_t>(n_steps) + 1);
  double cur = z0;
  for (long s = 0; s < n_steps; ++s) {
    const double k1 = model.rate(cur);
    const double k2 = model.rate(cur + 0.5 * dt * k1);
    const double k3 = model.rate(cur + 0.5 * dt * k2);
    const double k4 = model.rate(cur + dt * k3);
    const double next = cur + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(next) || std::abs(next) > kDivergenceBound) {
      sol.diverged = true;
      sol.diverged_at = s + 1;
      break;
    }
    z.push_back(next);
    cur = next;
  }
  sol.z = Eigen::Map<const Vector>(z.data(), static_cast<Eigen::Index>(z.size()));
  return sol;
}

std::string model_to_text(const SindyModel& model) {
  std::string out = "dz/dt =";
  bool first = true;
  for (Eigen::Index j = 0; j < model.coefficients.size(); ++j) {
    const double c = model.coefficients(j);
    if (c == 0.0) continue;
    char num[64];
    std::snprintf(num, sizeof num, "%.3f", std::abs(c));
    if (first) {
      out += c < 0 ? " -" : " ";
    } else {
      out += c < 0 ? " - " : " + ";
    }
    out += num;
    if (j > 0) out += " " + model.library.term_name(static_cast<int>(j));
    first = false;
  }
  if (first) out += " 0";
  return out;
}

std::string model_to_json(const SindyModel& model) {
  nlohmann::ordered_json j;
  j["degree"] = model.library.degree;
  j["threshold"] = model.threshold;
  j["coefficients"] = std::vector<double>(model.coefficients.data(),
                                          model.coefficients.data() + model.coefficients.size());
  j["provenance"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : model.provenance) j["provenance"][k] = v;
  j["warnings"] = model.warnings;
  j["text"] = model_to_text(model);
  return j.dump(2) + "\n";
}

SindyModel model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    SindyModel m;
    m.library.degree = j.at("degree").get<int>();
    m.threshold = j.at("threshold").get<double>();
    const auto c = j.at("coefficients").get<std::vector<double>>();
    if (m.library.degree < 1 || static_cast<int>(c.size()) != m.library.degree + 1) {
      throw InputError("model JSON: coefficient count must equal degree + 1");
    }
    m.coefficients = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
    if (j.contains("provenance")) {
      for (const auto& [k, v] : j.at("provenance").items()) {
        m.provenance.emplace_back(k, v.is_string() ? v.get<std::string>() : v.dump());
      }
    }
    if (j.contains("warnings")) m.warnings = j.at("warnings").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model JSON: ") + e.what());
  }
}

}  // namespace latdyn::sindy
