#include "latdyn/lstmvae.hpp"

#include "latdyn/csv_io.hpp"
#include "latdyn/errors.hpp"
#include "latdyn/random.hpp"

#include "json.hpp"

#include <cmath>
#include <map>

namespace latdyn::vae {

namespace {

using Binder = std::function<Var(const Parameter&)>;

Binder trainable(Graph& g) {
  // Parameters reached through a trainable binder belong to a mutable VaeParams.
  return [&g](const Parameter& p) { return g.parameter(const_cast<Parameter&>(p)); };
}

Binder frozen(Graph& g) {
  return [&g](const Parameter& p) { return g.constant(p.value); };
}

Matrix uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double bound) {
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

LstmLayerParams make_lstm(Rng& rng, int input, int hidden) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden + input));
  LstmLayerParams p;
  p.input_size = input;
  p.hidden_size = hidden;
  p.weight = Parameter(uniform_matrix(rng, 4 * hidden, hidden + input, bound));
  p.bias = Parameter(uniform_matrix(rng, 1, 4 * hidden, bound));
  return p;
}

LinearParams make_linear(Rng& rng, int in, int out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return {Parameter(uniform_matrix(rng, in, out, bound)), Parameter(uniform_matrix(rng, 1, out, bound))};
}

Var linear(const Binder& bind, const LinearParams& p, Var x) {
  return grad::add(grad::matmul(x, bind(p.weight)), bind(p.bias));
}

void check_states(const VaeParams& params, const Matrix& states) {
  if (states.rows() < 1) throw ShapeError("state matrix has no timesteps");
  if (states.cols() != params.arch.input_size) {
    throw ShapeError("state matrix has " + std::to_string(states.cols()) + " features, model expects " +
                     std::to_string(params.arch.input_size));
  }
}

struct EncodedVars {
  Var mu;
  Var logvar;
};

EncodedVars encode_impl(Graph& g, const VaeParams& params, const Binder& bind, Var states) {
  Var h = states;
  for (const auto& layer : params.encoder) {
    h = lstm_layer(g, bind(layer.weight), bind(layer.bias), h, layer.hidden_size);
  }
  return {linear(bind, params.mu_head, h), linear(bind, params.logvar_head, h)};
}

Var decode_impl(Graph& g, const VaeParams& params, const Binder& bind, Var z) {
  Var h = linear(bind, params.latent_in, z);
  for (const auto& layer : params.decoder) {
    h = lstm_layer(g, bind(layer.weight), bind(layer.bias), h, layer.hidden_size);
  }
  return linear(bind, params.output, h);
}

Var reparameterize_impl(Var mu, Var logvar, Var eps) {
  return grad::add(mu, grad::mul(grad::exp(grad::scale(logvar, 0.5)), eps));
}

}  // namespace

void VaeArch::validate() const {
  if (input_size < 1) throw ConfigError("input_size must be >= 1");
  if (latent_size != 1) throw ConfigError("latent_size must be 1");
  if (encoder_layers < 1 || decoder_layers < 1) throw ConfigError("encoder and decoder need at least one layer");
  if (encoder_hidden < 1 || decoder_hidden < 1) throw ConfigError("hidden sizes must be >= 1");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(kl_weight >= 0.0)) throw ConfigError("kl_weight must be >= 0");
}

std::vector<Parameter*> VaeParams::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : encoder) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (LinearParams* lin : {&mu_head, &logvar_head, &latent_in}) {
    out.push_back(&lin->weight);
    out.push_back(&lin->bias);
  }
  for (auto& l : decoder) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&output.weight);
  out.push_back(&output.bias);
  return out;
}

std::vector<std::pair<std::string, const Parameter*>> VaeParams::named_parameters() const {
  std::vector<std::pair<std::string, const Parameter*>> out;
  for (std::size_t i = 0; i < encoder.size(); ++i) {
    out.emplace_back("encoder." + std::to_string(i) + ".weight", &encoder[i].weight);
    out.emplace_back("encoder." + std::to_string(i) + ".bias", &encoder[i].bias);
  }
  const std::pair<const char*, const LinearParams*> heads[] = {
      {"mu_head", &mu_head}, {"logvar_head", &logvar_head}, {"latent_in", &latent_in}};
  for (const auto& [name, lin] : heads) {
    out.emplace_back(std::string(name) + ".weight", &lin->weight);
    out.emplace_back(std::string(name) + ".bias", &lin->bias);
  }
  for (std::size_t i = 0; i < decoder.size(); ++i) {
    out.emplace_back("decoder." + std::to_string(i) + ".weight", &decoder[i].weight);
    out.emplace_back("decoder." + std::to_string(i) + ".bias", &decoder[i].bias);
  }
  out.emplace_back("output.weight", &output.weight);
  out.emplace_back("output.bias", &output.bias);
  return out;
}

VaeParams init_params(const VaeArch& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng = Rng::stream(seed, 11);
  VaeParams p;
  p.arch = arch;
  int in = arch.input_size;
  for (int l = 0; l < arch.encoder_layers; ++l) {
    p.encoder.push_back(make_lstm(rng, in, arch.encoder_hidden));
    in = arch.encoder_hidden;
  }
  p.mu_head = make_linear(rng, arch.encoder_hidden, 1);
  p.logvar_head = make_linear(rng, arch.encoder_hidden, 1);
  p.latent_in = make_linear(rng, 1, arch.decoder_hidden);
  for (int l = 0; l < arch.decoder_layers; ++l) {
    p.decoder.push_back(make_lstm(rng, arch.decoder_hidden, arch.decoder_hidden));
  }
  p.output = make_linear(rng, arch.decoder_hidden, arch.input_size);
  return p;
}

CellOutput lstm_cell_step(Graph&, Var weight, Var bias, Var x_t, Var h_prev, Var c_prev) {
  const Eigen::Index hidden = h_prev.cols();
  if (weight.rows() != 4 * hidden || weight.cols() != hidden + x_t.cols()) {
    throw ShapeError("lstm_cell_step: weight is " + std::to_string(weight.rows()) + "x" +
                     std::to_string(weight.cols()) + ", expected " + std::to_string(4 * hidden) + "x" +
                     std::to_string(hidden + x_t.cols()));
  }
  if (c_prev.cols() != hidden || x_t.rows() != 1 || h_prev.rows() != 1 || c_prev.rows() != 1) {
    throw ShapeError("lstm_cell_step: x_t, h_prev and c_prev must be row vectors with matching sizes");
  }
  const Var joined[] = {h_prev, x_t};
  const Var pre = grad::add(grad::matmul(grad::concat_cols(joined), grad::transpose(weight)), bias);
  const Var gates = grad::sigmoid(grad::slice_cols(pre, 0, 3 * hidden));
  const Var input = grad::slice_cols(gates, 0, hidden);
  const Var forget = grad::slice_cols(gates, hidden, hidden);
  const Var out = grad::slice_cols(gates, 2 * hidden, hidden);
  const Var candidate = grad::tanh(grad::slice_cols(pre, 3 * hidden, hidden));
  const Var c = forget * c_prev + input * candidate;
  return {out * grad::tanh(c), c};
}

Var lstm_layer(Graph& g, Var weight, Var bias, Var inputs, int hidden_size) {
  const Eigen::Index hidden = hidden_size;
  const Eigen::Index in = inputs.cols();
  if (weight.rows() != 4 * hidden || weight.cols() != hidden + in) {
    throw ShapeError("lstm_layer: weight is " + std::to_string(weight.rows()) + "x" +
                     std::to_string(weight.cols()) + ", expected " + std::to_string(4 * hidden) + "x" +
                     std::to_string(hidden + in));
  }
  // [h, x] W^T = h W_h^T + x W_x^T: the input projection is batched over time.
  const Var wt = grad::transpose(weight);
  const Var w_h = grad::slice_rows(wt, 0, hidden);
  const Var w_x = grad::slice_rows(wt, hidden, in);
  const Var projected = grad::add(grad::matmul(inputs, w_x), bias);

  Var h = g.constant(Matrix::Zero(1, hidden));
  Var c = g.constant(Matrix::Zero(1, hidden));
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(inputs.rows()));
  for (Eigen::Index t = 0; t < inputs.rows(); ++t) {
    const Var pre = grad::add(grad::slice_rows(projected, t, 1), grad::matmul(h, w_h));
    const Var gates = grad::sigmoid(grad::slice_cols(pre, 0, 3 * hidden));
    const Var candidate = grad::tanh(grad::slice_cols(pre, 3 * hidden, hidden));
    c = grad::slice_cols(gates, hidden, hidden) * c + grad::slice_cols(gates, 0, hidden) * candidate;
    h = grad::slice_cols(gates, 2 * hidden, hidden) * grad::tanh(c);
    outputs.push_back(h);
  }
  return grad::concat_rows(outputs);
}

Var encode(Graph& g, VaeParams& params, Var states, Var* logvar_out) {
  const auto enc = encode_impl(g, params, trainable(g), states);
  if (logvar_out != nullptr) *logvar_out = enc.logvar;
  return enc.mu;
}

Var decode(Graph& g, VaeParams& params, Var z) { return decode_impl(g, params, trainable(g), z); }

ForwardResult forward(Graph& g, VaeParams& params, const Matrix& states, const Matrix& eps) {
  check_states(params, states);
  if (eps.rows() != states.rows() || eps.cols() != 1) {
    throw ShapeError("noise must be " + std::to_string(states.rows()) + "x1");
  }
  const Binder bind = trainable(g);
  const auto enc = encode_impl(g, params, bind, g.constant(states));
  const Var z = reparameterize_impl(enc.mu, enc.logvar, g.constant(eps));
  return {enc.mu, enc.logvar, z, decode_impl(g, params, bind, z)};
}

LossTerms elbo_loss(Graph& g, Var x, Var x_recon, Var mu, Var logvar, const TrainConfig& cfg) {
  (void)g;
  const Var recon = cfg.recon_loss == ReconLoss::Mse ? grad::mse_loss(x_recon, x)
                                                     : grad::smooth_l1_loss(x_recon, x);
  const Var inner = grad::sub(grad::add_scalar(logvar, 1.0), grad::add(grad::mul(mu, mu), grad::exp(logvar)));
  const Var kl = grad::scale(grad::mean(inner), -0.5);
  return {grad::add(recon, grad::scale(kl, cfg.kl_weight)), recon, kl};
}

CellState lstm_cell_step(const LstmLayerParams& p, const Eigen::RowVectorXd& x_t, const CellState& prev) {
  Graph g;
  const auto out = lstm_cell_step(g, g.constant(p.weight.value), g.constant(p.bias.value), g.constant(x_t),
                                  g.constant(prev.h), g.constant(prev.c));
  return {out.h.value(), out.c.value()};
}

Encoded encode(const VaeParams& params, const Matrix& states) {
  check_states(params, states);
  Graph g;
  const auto enc = encode_impl(g, params, frozen(g), g.constant(states));
  return {enc.mu.value().col(0), enc.logvar.value().col(0)};
}

Vector reparameterize(const Vector& mu, const Vector& logvar, const Vector& eps) {
  if (mu.size() != logvar.size() || mu.size() != eps.size()) {
    throw ShapeError("reparameterize: mu, logvar and eps lengths differ");
  }
  return mu.array() + (0.5 * logvar.array()).exp() * eps.array();
}

Matrix decode(const VaeParams& params, const Vector& z) {
  if (z.size() < 1) throw ShapeError("decode: empty latent");
  Graph g;
  return decode_impl(g, params, frozen(g), g.constant(Matrix(z))).value();
}

LatentSeries encode_latent(const VaeParams& params, const Matrix& states) {
  Encoded e = encode(params, states);
  return {e.mu, std::move(e.mu), std::move(e.logvar)};
}

double reconstruction_mse(const VaeParams& params, const Matrix& states) {
  const Matrix recon = decode(params, encode_latent(params, states).z);
  return (recon - states).squaredNorm() / static_cast<double>(states.size());
}

TrainResult train(const VaeArch& arch, const Matrix& data, const TrainConfig& cfg, const VaeParams* init,
                  const EpochCallback& on_epoch) {
  arch.validate();
  cfg.validate();
  TrainResult result;
  result.params = init != nullptr ? *init : init_params(arch, cfg.seed);
  check_states(result.params, data);
  if (data.minCoeff() < 0.0 || data.maxCoeff() > 1.0) {
    result.warnings.push_back("training data outside [0, 1]; scaled features are expected");
  }

  std::vector<Parameter*> params = result.params.parameters();
  for (Parameter* p : params) p->zero_grad();
  grad::Adam adam(params, {.learning_rate = cfg.learning_rate});
  Rng noise = Rng::stream(cfg.seed, 17);
  Matrix eps(data.rows(), 1);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (Eigen::Index t = 0; t < eps.rows(); ++t) eps(t, 0) = noise.normal();
    Graph g;
    const auto fwd = forward(g, result.params, data, eps);
    const auto loss = elbo_loss(g, g.constant(data), fwd.recon, fwd.mu, fwd.logvar, cfg);
    const LossRecord rec{epoch, loss.recon.scalar(), loss.kl.scalar(), loss.total.scalar()};
    if (!std::isfinite(rec.total)) {
      throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
    }
    g.backward(loss.total);
    grad::clip_grad_norm(params, cfg.clip_norm);
    adam.step();
    adam.zero_grad();
    result.history.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  result.latent = encode_latent(result.params, data);
  if (!result.latent.z.allFinite()) throw NumericalError("training produced a non-finite latent");
  return result;
}

const char* to_string(ReconLoss loss) { return loss == ReconLoss::Mse ? "mse" : "smooth_l1"; }

ReconLoss recon_loss_from_string(const std::string& name) {
  if (name == "mse" || name == "MSE") return ReconLoss::Mse;
  if (name == "smooth_l1" || name == "SmoothL1") return ReconLoss::SmoothL1;
  throw ConfigError("unknown reconstruction loss '" + name + "' (expected mse or smooth_l1)");
}

std::string params_to_json(const VaeParams& params, const TrainConfig* cfg, const std::string& extra_json) {
  nlohmann::ordered_json j;
  j["format"] = "latdyn-vae/1";
  const auto& a = params.arch;
  j["arch"] = {{"input_size", a.input_size},         {"encoder_layers", a.encoder_layers},
               {"encoder_hidden", a.encoder_hidden}, {"latent_size", a.latent_size},
               {"decoder_layers", a.decoder_layers}, {"decoder_hidden", a.decoder_hidden}};
  if (cfg != nullptr) {
    j["train_config"] = {{"epochs", cfg->epochs},       {"learning_rate", cfg->learning_rate},
                         {"kl_weight", cfg->kl_weight}, {"recon_loss", to_string(cfg->recon_loss)},
                         {"seed", cfg->seed},           {"clip_norm", cfg->clip_norm}};
  }
  if (!extra_json.empty()) {
    const auto extra = nlohmann::ordered_json::parse(extra_json);
    for (const auto& [k, v] : extra.items()) j[k] = v;
  }
  auto& tensors = j["tensors"] = nlohmann::ordered_json::array();
  for (const auto& [name, p] : params.named_parameters()) {
    const Matrix& m = p->value;
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
    }
    tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"data", data}});
  }
  return j.dump(1) + "\n";
}

VaeParams params_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const auto& ja = j.at("arch");
    VaeArch arch;
    arch.input_size = ja.at("input_size").get<int>();
    arch.encoder_layers = ja.at("encoder_layers").get<int>();
    arch.encoder_hidden = ja.at("encoder_hidden").get<int>();
    arch.latent_size = ja.at("latent_size").get<int>();
    arch.decoder_layers = ja.at("decoder_layers").get<int>();
    arch.decoder_hidden = ja.at("decoder_hidden").get<int>();
    VaeParams p = init_params(arch, 0);
    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& t : j.at("tensors")) by_name[t.at("name").get<std::string>()] = &t;
    auto fill = [&](const std::string& name, Parameter& target) {
      const auto it = by_name.find(name);
      if (it == by_name.end()) throw InputError("parameter JSON: missing tensor '" + name + "'");
      const auto& t = *it->second;
      const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
      const auto data = t.at("data").get<std::vector<double>>();
      if (shape.size() != 2 || shape[0] != target.value.rows() || shape[1] != target.value.cols() ||
          static_cast<Eigen::Index>(data.size()) != shape[0] * shape[1]) {
        throw ShapeError("parameter JSON: tensor '" + name + "' has the wrong shape");
      }
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < shape[0]; ++r) {
        for (Eigen::Index c = 0; c < shape[1]; ++c) target.value(r, c) = data[k++];
      }
      target.zero_grad();
    };
    for (const auto& [name, param] : p.named_parameters()) fill(name, const_cast<Parameter&>(*param));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("parameter JSON: ") + e.what());
  }
}

std::string history_to_csv(const std::vector<LossRecord>& history, const std::vector<std::string>& comments) {
  Matrix m(static_cast<Eigen::Index>(history.size()), 4);
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = history[i].epoch;
    m(r, 1) = history[i].recon;
    m(r, 2) = history[i].kl;
    m(r, 3) = history[i].total;
  }
  return csv::format_table({"epoch", "recon", "kl", "total"}, m, comments);
}

}  // namespace latdyn::vae
