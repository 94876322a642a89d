#include "ddc/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace ddc {
namespace {

constexpr char kTrajectoryHeader[] = "time_s,u_deg,v_kmh";
constexpr int kModelFormatVersion = 1;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(where + ": not a number: '" + s + "'");
  }
}

double mse(const Matrix& pred, const Matrix& target) {
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.data().size());
}

}  // namespace

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << kTrajectoryHeader << "\n";
  for (const TrajectoryRow& r : traj.rows) {
    char t[32];
    std::snprintf(t, sizeof(t), "%.3f", r.time_s);
    out << t << "," << fmt(r.u_deg) << "," << fmt(r.v_kmh) << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Trajectory load_trajectory_csv(const std::string& path, double u_min_deg, double u_max_deg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  if (line != kTrajectoryHeader) {
    throw std::runtime_error(path + ": expected header '" + kTrajectoryHeader + "', got '" +
                             line + "'");
  }
  Trajectory traj;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != 3) throw std::runtime_error(where + ": expected 3 columns");
    TrajectoryRow r;
    r.time_s = parse_double(cells[0], where);
    r.u_deg = parse_double(cells[1], where);
    r.v_kmh = parse_double(cells[2], where);
    if (r.u_deg < u_min_deg - 1e-9 || r.u_deg > u_max_deg + 1e-9) {
      throw std::runtime_error(where + ": pedal command " + fmt(r.u_deg) +
                               " outside [" + fmt(u_min_deg) + ", " + fmt(u_max_deg) + "]");
    }
    traj.rows.push_back(r);
  }
  if (traj.rows.size() >= 2) {
    traj.period_s = traj.rows[1].time_s - traj.rows[0].time_s;
    if (traj.period_s <= 0.0) throw std::runtime_error(path + ": time column must increase");
    for (std::size_t i = 1; i < traj.rows.size(); ++i) {
      const double gap = traj.rows[i].time_s - traj.rows[i - 1].time_s;
      if (std::abs(gap - traj.period_s) > 1e-6) {
        throw std::runtime_error(path + ": sample period not constant near row " +
                                 std::to_string(i + 1));
      }
    }
  }
  return traj;
}

std::vector<WindowSample> window_trajectory(const Trajectory& traj, int horizon) {
  if (horizon <= 0) throw std::invalid_argument("window_trajectory: horizon must be positive");
  const int t_count = static_cast<int>(traj.rows.size());
  if (t_count <= horizon) {
    throw std::invalid_argument("window_trajectory: need more than " + std::to_string(horizon) +
                                " rows, got " + std::to_string(t_count));
  }
  if (traj.period_s <= 0.0) throw std::invalid_argument("window_trajectory: period must be positive");
  const double p = traj.period_s;

  std::vector<WindowSample> samples;
  samples.reserve(t_count - horizon);
  for (int t = 0; t + horizon < t_count; ++t) {
    const TrajectoryRow& row = traj.rows[t];
    WindowSample s;
    const double dv = t > 0 ? (row.v_kmh - traj.rows[t - 1].v_kmh) / p : 0.0;
    const double du = t > 0 ? (row.u_deg - traj.rows[t - 1].u_deg) / p : 0.0;
    s.init_state = {row.v_kmh, dv, row.u_deg, du};
    s.u_seq.reserve(horizon);
    s.s_seq.reserve(horizon);
    for (int k = 1; k <= horizon; ++k) {
      s.u_seq.push_back(traj.rows[t + k].u_deg);
      s.s_seq.push_back(traj.rows[t + k].v_kmh);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

Normalizer fit_normalizer(const std::vector<std::vector<double>>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("fit_normalizer: need at least 2 rows");
  const std::size_t d = rows.front().size();
  if (d == 0) throw std::invalid_argument("fit_normalizer: empty rows");
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("fit_normalizer: ragged rows");
  }
  Normalizer n;
  n.mean.assign(d, 0.0);
  n.stddev.assign(d, 0.0);
  const double count = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) n.mean[j] += r[j];
  }
  for (std::size_t j = 0; j < d; ++j) n.mean[j] /= count;
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = r[j] - n.mean[j];
      n.stddev[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    n.stddev[j] = std::sqrt(n.stddev[j] / count);  // population std
    if (n.stddev[j] < 1e-12) n.stddev[j] = 1.0;
  }
  return n;
}

std::vector<double> normalizer_apply(const Normalizer& n, std::span<const double> x) {
  if (static_cast<int>(x.size()) != n.dim()) {
    throw std::invalid_argument("normalizer_apply: dimension mismatch");
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - n.mean[j]) / n.stddev[j];
  return out;
}

std::vector<double> normalizer_invert(const Normalizer& n, std::span<const double> z) {
  if (static_cast<int>(z.size()) != n.dim()) {
    throw std::invalid_argument("normalizer_invert: dimension mismatch");
  }
  std::vector<double> out(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) out[j] = z[j] * n.stddev[j] + n.mean[j];
  return out;
}

std::vector<int> ModelConfig::network_dims() const {
  std::vector<int> dims;
  dims.push_back(network_input_dim());
  dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
  dims.push_back(network_output_dim());
  return dims;
}

void ModelConfig::validate() const {
  if (horizon <= 0) throw std::invalid_argument("model: horizon must be positive");
  if (state_dim <= 0 || init_dim <= 0 || control_dim <= 0) {
    throw std::invalid_argument("model: dimensions must be positive");
  }
  if (period_s <= 0.0) throw std::invalid_argument("model: period must be positive");
  if (!(u_min_deg < u_max_deg)) throw std::invalid_argument("model: need u_min < u_max");
  if (hidden_sizes.empty()) throw std::invalid_argument("model: need at least one hidden layer");
  for (int h : hidden_sizes) {
    if (h <= 0) throw std::invalid_argument("model: hidden sizes must be positive");
  }
}

std::vector<double> network_input_vector(const ModelConfig& config,
                                         std::span<const double> init_state,
                                         std::span<const double> u_seq) {
  if (static_cast<int>(init_state.size()) != config.init_dim) {
    throw std::invalid_argument("expected " + std::to_string(config.init_dim) +
                                " initial-state values, got " + std::to_string(init_state.size()));
  }
  if (static_cast<int>(u_seq.size()) != config.horizon * config.control_dim) {
    throw std::invalid_argument("expected " + std::to_string(config.horizon * config.control_dim) +
                                " control values, got " + std::to_string(u_seq.size()));
  }
  std::vector<double> x;
  x.reserve(config.network_input_dim());
  x.insert(x.end(), init_state.begin(), init_state.end());
  x.insert(x.end(), u_seq.begin(), u_seq.end());
  return x;
}

TrainedModel::TrainedModel(Network net, Normalizer input_norm, Normalizer output_norm,
                           ModelConfig config)
    : net_(std::move(net)),
      input_norm_(std::move(input_norm)),
      output_norm_(std::move(output_norm)),
      config_(std::move(config)) {
  config_.validate();
  if (net_.in_dim() != config_.network_input_dim() ||
      net_.out_dim() != config_.network_output_dim()) {
    throw std::invalid_argument("model: network dimensions do not match the configuration");
  }
  if (input_norm_.dim() != net_.in_dim() || output_norm_.dim() != net_.out_dim()) {
    throw std::invalid_argument("model: normalizer dimensions do not match the network");
  }
}

std::vector<double> TrainedModel::predict(std::span<const double> init_state,
                                          std::span<const double> u_seq) const {
  const std::vector<double> raw = network_input_vector(config_, init_state, u_seq);
  const std::vector<double> z = normalizer_apply(input_norm_, raw);
  Matrix x(1, z.size());
  std::copy(z.begin(), z.end(), x.data().begin());
  const Matrix y = net_.forward_infer(x);
  return normalizer_invert(output_norm_, y.data());
}

TrainedModel train_model(const std::vector<WindowSample>& samples, const ModelConfig& config,
                         const TrainOptions& options, TrainReport* report) {
  config.validate();
  if (options.epochs <= 0 || options.batch_size < 2 || options.learning_rate <= 0.0) {
    throw std::invalid_argument("train_model: bad training options");
  }
  const int n = static_cast<int>(samples.size());
  if (n < 10) throw std::invalid_argument("train_model: need at least 10 samples");

  const int in_dim = config.network_input_dim();
  const int out_dim = config.network_output_dim();
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> outputs;
  inputs.reserve(n);
  outputs.reserve(n);
  for (const WindowSample& s : samples) {
    inputs.push_back(network_input_vector(config, s.init_state, s.u_seq));
    if (static_cast<int>(s.s_seq.size()) != out_dim) {
      throw std::invalid_argument("train_model: sample state sequence length mismatch");
    }
    outputs.push_back(s.s_seq);
  }

  std::mt19937_64 rng(options.seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int test_count = n / 5;
  std::vector<int> test_idx(order.begin(), order.begin() + test_count);
  std::vector<int> train_idx(order.begin() + test_count, order.end());
  if (test_count < 1 || static_cast<int>(train_idx.size()) < 2) {
    throw std::invalid_argument("train_model: not enough samples to split");
  }

  std::vector<std::vector<double>> train_in_rows;
  std::vector<std::vector<double>> train_out_rows;
  train_in_rows.reserve(train_idx.size());
  train_out_rows.reserve(train_idx.size());
  for (int i : train_idx) {
    train_in_rows.push_back(inputs[i]);
    train_out_rows.push_back(outputs[i]);
  }
  const Normalizer in_norm = fit_normalizer(train_in_rows);
  const Normalizer out_norm = fit_normalizer(train_out_rows);

  Matrix test_x(test_count, in_dim);
  Matrix test_y(test_count, out_dim);
  for (int r = 0; r < test_count; ++r) {
    const std::vector<double> zx = normalizer_apply(in_norm, inputs[test_idx[r]]);
    const std::vector<double> zy = normalizer_apply(out_norm, outputs[test_idx[r]]);
    for (int c = 0; c < in_dim; ++c) test_x(r, c) = zx[c];
    for (int c = 0; c < out_dim; ++c) test_y(r, c) = zy[c];
  }

  Network net(config.network_dims(), options.seed);
  AdamState adam;
  adam.learning_rate = options.learning_rate;

  const auto test_loss = [&](const Network& candidate) {
    return mse(candidate.forward_infer(test_x), test_y);
  };

  TrainReport local;
  TrainReport& rep = report ? *report : local;
  rep = TrainReport{};
  rep.train_count = static_cast<int>(train_idx.size());
  rep.test_count = test_count;

  double best = test_loss(net);
  Network best_net = net;
  int best_epoch = 0;
  rep.test_loss_history.push_back(best);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    for (std::size_t start = 0; start < train_idx.size(); start += options.batch_size) {
      const std::size_t end = std::min(start + options.batch_size, train_idx.size());
      const int b = static_cast<int>(end - start);
      if (b < 2) continue;  // batch statistics need at least two rows
      Matrix x(b, in_dim);
      Matrix y(b, out_dim);
      for (int r = 0; r < b; ++r) {
        const int idx = train_idx[start + r];
        const std::vector<double> zx = normalizer_apply(in_norm, inputs[idx]);
        const std::vector<double> zy = normalizer_apply(out_norm, outputs[idx]);
        for (int c = 0; c < in_dim; ++c) x(r, c) = zx[c];
        for (int c = 0; c < out_dim; ++c) y(r, c) = zy[c];
      }
      ForwardCache cache;
      const Matrix pred = net.forward(x, RunMode::kTrain, &cache);
      Matrix grad(b, out_dim);
      const double scale = 2.0 / static_cast<double>(b * out_dim);
      for (int r = 0; r < b; ++r) {
        for (int c = 0; c < out_dim; ++c) grad(r, c) = scale * (pred(r, c) - y(r, c));
      }
      const std::vector<double> g = net.backward_params(cache, grad);
      std::vector<double> params = net.params_flat();
      adam_step(params, g, adam);
      net.set_params_flat(params);
    }
    const double loss = test_loss(net);
    rep.test_loss_history.push_back(loss);
    if (loss < best) {
      best = loss;
      best_net = net;
      best_epoch = epoch;
    }
  }

  rep.best_test_loss = best;
  rep.best_epoch = best_epoch;

  TrainedModel model(std::move(best_net), in_norm, out_norm, config);
  model.seed = options.seed;
  model.epochs_run = options.epochs;
  model.best_test_loss = best;
  return model;
}

void TrainedModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "ddcn-model " << kModelFormatVersion << "\n";
  out << "horizon " << config_.horizon << "\n";
  out << "state_dim " << config_.state_dim << "\n";
  out << "init_dim " << config_.init_dim << "\n";
  out << "control_dim " << config_.control_dim << "\n";
  out << "period_s " << fmt(config_.period_s) << "\n";
  out << "u_min_deg " << fmt(config_.u_min_deg) << "\n";
  out << "u_max_deg " << fmt(config_.u_max_deg) << "\n";
  out << "seed " << seed << "\n";
  out << "epochs_run " << epochs_run << "\n";
  out << "best_test_loss " << fmt(best_test_loss) << "\n";
  out << "dims " << net_.dims().size();
  for (int d : net_.dims()) out << " " << d;
  out << "\n";
  const auto write_vec = [&](const char* name, const std::vector<double>& v) {
    out << name;
    for (double x : v) out << " " << fmt(x);
    out << "\n";
  };
  write_vec("input_mean", input_norm_.mean);
  write_vec("input_std", input_norm_.stddev);
  write_vec("output_mean", output_norm_.mean);
  write_vec("output_std", output_norm_.stddev);
  for (int l = 0; l < net_.dense_count(); ++l) {
    const DenseLayer& layer = net_.dense_layers()[l];
    out << "dense " << l << " " << layer.out_dim() << " " << layer.in_dim() << "\n";
    write_vec("weights", layer.weights.data());
    write_vec("bias", layer.bias);
  }
  for (std::size_t l = 0; l < net_.batchnorm_layers().size(); ++l) {
    const BatchNormLayer& bn = net_.batchnorm_layers()[l];
    out << "batchnorm " << l << " " << bn.dim() << "\n";
    write_vec("gamma", bn.gamma);
    write_vec("beta", bn.beta);
    write_vec("running_mean", bn.running_mean);
    write_vec("running_var", bn.running_var);
    out << "epsilon " << fmt(bn.epsilon) << "\n";
    out << "momentum " << fmt(bn.momentum) << "\n";
  }
  out << "end\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

class TokenReader {
 public:
  TokenReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  std::string word(const char* what) {
    std::string t;
    if (!(in_ >> t)) throw std::runtime_error(path_ + ": truncated model file, expected " + what);
    return t;
  }

  void expect(const char* keyword) {
    const std::string t = word(keyword);
    if (t != keyword) {
      throw std::runtime_error(path_ + ": malformed model file, expected '" + keyword +
                               "', got '" + t + "'");
    }
  }

  long integer(const char* what) {
    const std::string t = word(what);
    try {
      std::size_t pos = 0;
      const long v = std::stol(t, &pos);
      if (pos != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw std::runtime_error(path_ + ": expected integer for " + what + ", got '" + t + "'");
    }
  }

  double number(const char* what) {
    const std::string t = word(what);
    try {
      std::size_t pos = 0;
      const double v = std::stod(t, &pos);
      if (pos != t.size()) throw std::invalid_argument(t);
      if (!std::isfinite(v)) {
        throw std::runtime_error(path_ + ": non-finite value for " + what);
      }
      return v;
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception&) {
      throw std::runtime_error(path_ + ": expected number for " + what + ", got '" + t + "'");
    }
  }

  std::vector<double> numbers(const char* keyword, std::size_t count) {
    expect(keyword);
    std::vector<double> v(count);
    for (std::size_t i = 0; i < count; ++i) v[i] = number(keyword);
    return v;
  }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

TrainedModel TrainedModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  TokenReader r(in, path);

  const std::string magic = r.word("file magic");
  if (magic != "ddcn-model") {
    throw std::runtime_error(path + ": not a model file (bad magic '" + magic + "')");
  }
  const long version = r.integer("format version");
  if (version != kModelFormatVersion) {
    throw std::runtime_error(path + ": unsupported model format version " +
                             std::to_string(version));
  }

  ModelConfig config;
  r.expect("horizon");
  config.horizon = static_cast<int>(r.integer("horizon"));
  r.expect("state_dim");
  config.state_dim = static_cast<int>(r.integer("state_dim"));
  r.expect("init_dim");
  config.init_dim = static_cast<int>(r.integer("init_dim"));
  r.expect("control_dim");
  config.control_dim = static_cast<int>(r.integer("control_dim"));
  r.expect("period_s");
  config.period_s = r.number("period_s");
  r.expect("u_min_deg");
  config.u_min_deg = r.number("u_min_deg");
  r.expect("u_max_deg");
  config.u_max_deg = r.number("u_max_deg");
  r.expect("seed");
  const long long seed = r.integer("seed");
  r.expect("epochs_run");
  const long epochs_run = r.integer("epochs_run");
  r.expect("best_test_loss");
  const double best_test_loss = r.number("best_test_loss");

  r.expect("dims");
  const int in_dim = config.network_input_dim();
  const int out_dim = config.network_output_dim();
  const long dim_count = r.integer("dims count");
  if (dim_count < 2 || dim_count > 64) {
    throw std::runtime_error(path + ": implausible dims count " + std::to_string(dim_count));
  }
  std::vector<int> dims;
  for (long i = 0; i < dim_count; ++i) dims.push_back(static_cast<int>(r.integer("dims")));
  if (dims.front() != in_dim) {
    throw std::runtime_error(path + ": declared input dimension " + std::to_string(dims.front()) +
                             " does not match the configuration (" + std::to_string(in_dim) + ")");
  }
  if (dims.back() != out_dim) {
    throw std::runtime_error(path + ": declared output dimension " + std::to_string(dims.back()) +
                             " does not match the configuration (" + std::to_string(out_dim) + ")");
  }
  config.hidden_sizes.assign(dims.begin() + 1, dims.end() - 1);
  config.validate();

  Normalizer in_norm;
  Normalizer out_norm;
  in_norm.mean = r.numbers("input_mean", in_dim);
  in_norm.stddev = r.numbers("input_std", in_dim);
  out_norm.mean = r.numbers("output_mean", out_dim);
  out_norm.stddev = r.numbers("output_std", out_dim);
  for (double s : in_norm.stddev) {
    if (s <= 0.0) throw std::runtime_error(path + ": input normalizer stddev must be positive");
  }
  for (double s : out_norm.stddev) {
    if (s <= 0.0) throw std::runtime_error(path + ": output normalizer stddev must be positive");
  }

  Network net(dims, 0);
  for (int l = 0; l < net.dense_count(); ++l) {
    r.expect("dense");
    const long idx = r.integer("dense index");
    const long out = r.integer("dense out_dim");
    const long in = r.integer("dense in_dim");
    if (idx != l) throw std::runtime_error(path + ": dense layers out of order");
    if (out != dims[l + 1] || in != dims[l]) {
      throw std::runtime_error(path + ": dense layer " + std::to_string(l) + " stores a " +
                               std::to_string(out) + "x" + std::to_string(in) +
                               " weight matrix but the declared dims need " +
                               std::to_string(dims[l + 1]) + "x" + std::to_string(dims[l]));
    }
    DenseLayer& layer = net.dense_layers()[l];
    const std::vector<double> w = r.numbers("weights", static_cast<std::size_t>(out * in));
    std::copy(w.begin(), w.end(), layer.weights.data().begin());
    layer.bias = r.numbers("bias", out);
  }
  for (int l = 0; l + 1 < net.dense_count(); ++l) {
    r.expect("batchnorm");
    const long idx = r.integer("batchnorm index");
    const long d = r.integer("batchnorm dim");
    if (idx != l) throw std::runtime_error(path + ": batchnorm layers out of order");
    if (d != dims[l + 1]) {
      throw std::runtime_error(path + ": batchnorm layer " + std::to_string(l) + " stores " +
                               std::to_string(d) + " channels but the declared dims need " +
                               std::to_string(dims[l + 1]));
    }
    BatchNormLayer& bn = net.batchnorm_layers()[l];
    bn.gamma = r.numbers("gamma", d);
    bn.beta = r.numbers("beta", d);
    bn.running_mean = r.numbers("running_mean", d);
    bn.running_var = r.numbers("running_var", d);
    r.expect("epsilon");
    bn.epsilon = r.number("epsilon");
    r.expect("momentum");
    bn.momentum = r.number("momentum");
  }
  r.expect("end");

  TrainedModel model(std::move(net), std::move(in_norm), std::move(out_norm), config);
  model.seed = static_cast<std::uint64_t>(seed);
  model.epochs_run = static_cast<int>(epochs_run);
  model.best_test_loss = best_test_loss;
  return model;
}

}  // namespace ddc
