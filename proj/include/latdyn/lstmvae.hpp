#pragma once

// Sequence-to-sequence LSTM variational autoencoder with a scalar latent per
// timestep. The encoder LSTM stack maps each state x_t to an embedding whose
// linear heads give mu_t and logvar_t; z_t = mu_t + exp(logvar_t / 2) eps_t
// is expanded by a linear layer, decoded by a second LSTM stack and projected
// back to the input feature count.

#include "latdyn/gradcore.hpp"
#include "latdyn/trajkit.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace latdyn::vae {

using grad::Graph;
using grad::Matrix;
using grad::Parameter;
using grad::Var;
using Vector = Eigen::VectorXd;

// Row-block order inside the stacked LSTM weight.
enum class Gate { Input = 0, Forget = 1, Output = 2, Cell = 3 };

// weight is (4H) x (H + input) with row blocks [i; f; o; c] acting on the
// column vector [h_{t-1}; x_t]. bias is 1 x 4H in the same block order.
struct LstmLayerParams {
  int input_size = 0;
  int hidden_size = 0;
  Parameter weight;
  Parameter bias;

  Matrix gate_weight(Gate g) const {
    return weight.value.middleRows(static_cast<int>(g) * hidden_size, hidden_size);
  }
  Eigen::RowVectorXd gate_bias(Gate g) const {
    return bias.value.middleCols(static_cast<int>(g) * hidden_size, hidden_size);
  }
};

// y = x W + b with W of shape in x out (row-vector convention).
struct LinearParams {
  Parameter weight;
  Parameter bias;
};

struct VaeArch {
  int input_size = 10;
  int encoder_layers = 1;
  int encoder_hidden = 64;
  int latent_size = 1;
  int decoder_layers = 1;
  int decoder_hidden = 64;

  void validate() const;
};

enum class ReconLoss { Mse, SmoothL1 };

struct TrainConfig {
  int epochs = 1000;
  double learning_rate = 1e-3;
  double kl_weight = 1e-3;
  ReconLoss recon_loss = ReconLoss::Mse;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;  // <= 0 disables clipping

  void validate() const;
};

struct VaeParams {
  VaeArch arch;
  std::vector<LstmLayerParams> encoder;
  LinearParams mu_head;
  LinearParams logvar_head;
  LinearParams latent_in;  // z_t -> decoder input
  std::vector<LstmLayerParams> decoder;
  LinearParams output;

  VaeParams() = default;
  VaeParams(const VaeParams&) = default;
  VaeParams& operator=(const VaeParams&) = default;

  // Stable order; used by the optimizer and for serialization.
  std::vector<Parameter*> parameters();
  std::vector<std::pair<std::string, const Parameter*>> named_parameters() const;
};

struct LatentSeries {
  Vector z;
  Vector mu;
  Vector logvar;
};

// Weights and biases uniform in +-1/sqrt(fan_in).
VaeParams init_params(const VaeArch& arch, std::uint64_t seed);

// --- Graph-level building blocks -------------------------------------------

struct CellOutput {
  Var h;
  Var c;
};

// One LSTM step on row vectors x_t (1 x in), h_prev and c_prev (1 x H).
CellOutput lstm_cell_step(Graph& g, Var weight, Var bias, Var x_t, Var h_prev, Var c_prev);

// Runs a layer over a T x in sequence from zero state; returns T x H.
Var lstm_layer(Graph& g, Var weight, Var bias, Var inputs, int hidden_size);

struct ForwardResult {
  Var mu;      // T x 1
  Var logvar;  // T x 1
  Var z;       // T x 1
  Var recon;   // T x input_size
};

// Full forward pass. eps (T x 1) is the reparameterization noise; zeros give
// the inference path z = mu.
ForwardResult forward(Graph& g, VaeParams& params, const Matrix& states, const Matrix& eps);
Var encode(Graph& g, VaeParams& params, Var states, Var* logvar_out);
Var decode(Graph& g, VaeParams& params, Var z);

struct LossTerms {
  Var total;
  Var recon;
  Var kl;
};

// recon (mean-reduced) + kl_weight * KL, KL = -0.5 mean(1 + logvar - mu^2 - exp(logvar)).
LossTerms elbo_loss(Graph& g, Var x, Var x_recon, Var mu, Var logvar, const TrainConfig& cfg);

// --- Value-level API --------------------------------------------------------

struct CellState {
  Eigen::RowVectorXd h;
  Eigen::RowVectorXd c;
};
CellState lstm_cell_step(const LstmLayerParams& p, const Eigen::RowVectorXd& x_t, const CellState& prev);

struct Encoded {
  Vector mu;
  Vector logvar;
};
Encoded encode(const VaeParams& params, const Matrix& states);
Vector reparameterize(const Vector& mu, const Vector& logvar, const Vector& eps);
Matrix decode(const VaeParams& params, const Vector& z);
// Inference mode: z = mu.
LatentSeries encode_latent(const VaeParams& params, const Matrix& states);
// Mean squared error of decode(encode_latent(states).z) against states.
double reconstruction_mse(const VaeParams& params, const Matrix& states);

struct LossRecord {
  int epoch;
  double recon;
  double kl;
  double total;
};

struct TrainResult {
  VaeParams params;
  LatentSeries latent;
  std::vector<LossRecord> history;
  std::vector<std::string> warnings;
};

// Called after each epoch; returning false stops training early.
using EpochCallback = std::function<bool(const LossRecord&)>;

// Full-sequence Adam training. Starts from `init` when given, otherwise from
// init_params(arch, cfg.seed). Throws NumericalError when the loss becomes
// non-finite.
TrainResult train(const VaeArch& arch, const Matrix& data, const TrainConfig& cfg,
                  const VaeParams* init = nullptr, const EpochCallback& on_epoch = {});

// --- Persistence ------------------------------------------------------------

std::string params_to_json(const VaeParams& params, const TrainConfig* cfg = nullptr,
                           const std::string& extra_json = {});
VaeParams params_from_json(const std::string& text);
std::string history_to_csv(const std::vector<LossRecord>& history,
                           const std::vector<std::string>& comments = {});

const char* to_string(ReconLoss loss);
ReconLoss recon_loss_from_string(const std::string& name);

}  // namespace latdyn::vae
