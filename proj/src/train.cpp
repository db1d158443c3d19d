#include "seiznet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "seiznet/error.hpp"
#include "seiznet/rng.hpp"

namespace seiznet {

MseResult mse_loss(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) {
    throw DimError("mse shapes disagree: " + shape_str(pred.shape()) + " vs " +
                   shape_str(target.shape()));
  }
  MseResult r;
  r.grad = Tensor(pred.shape());
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double diff = pred[i] - target[i];
    r.loss += diff * diff;
    r.grad[i] = 2.0 * diff / n;
  }
  r.loss /= n;
  return r;
}

Tensor one_hot_target(bool seizure) {
  return seizure ? Tensor::vector({1.0, 0.0}) : Tensor::vector({0.0, 1.0});
}

void AdamState::step(std::vector<std::pair<std::string, Tensor*>>& params,
                     const GradList& grads) {
  if (params.size() != grads.size()) {
    throw DimError("adam: parameter/gradient lists differ in length");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, param] = params[i];
    const auto& [gname, grad] = grads[i];
    if (name != gname) {
      throw DimError("adam: gradient '" + gname + "' does not align with '" +
                     name + "'");
    }
    if (!grad.all_finite()) {
      throw Error("adam: non-finite gradient in '" + name + "' at step " +
                  std::to_string(t_));
    }
    Tensor& m = m_.try_emplace(name, Tensor(param->shape())).first->second;
    Tensor& v = v_.try_emplace(name, Tensor(param->shape())).first->second;
    for (std::size_t j = 0; j < param->size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * grad[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      (*param)[j] -= cfg_.alpha * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

namespace {

void accumulate(GradList& into, const GradList& add, double scale) {
  if (into.empty()) {
    into = add;
    for (auto& [name, g] : into) {
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= scale;
    }
    return;
  }
  for (std::size_t i = 0; i < into.size(); ++i) {
    Tensor& dst = into[i].second;
    const Tensor& src = add[i].second;
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

}  // namespace

TrainResult train(Network& net, const std::vector<LabeledWindow>& dataset,
                  const TrainConfig& cfg) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (cfg.learning_rate <= 0.0) throw ConfigError("learning rate must be > 0");

  if (cfg.apply_init) {
    InitSpec init = cfg.init;
    init.seed = cfg.init.seed ? cfg.init.seed : cfg.seed;
    net.initialize(init);
  }

  AdamConfig adam_cfg;
  adam_cfg.alpha = cfg.learning_rate;
  AdamState adam(adam_cfg);
  Rng shuffle_rng = Rng::stream(cfg.seed, 0x5u);

  TrainResult result;
  auto params = net.parameters();

  // Retained copy of the last parameters that produced a finite loss.
  std::vector<Tensor> last_good;
  auto snapshot = [&]() {
    last_good.clear();
    for (auto& [name, p] : params) last_good.push_back(*p);
  };
  auto restore = [&]() {
    for (std::size_t i = 0; i < params.size(); ++i) {
      *params[i].second = last_good[i];
    }
  };
  snapshot();

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates shuffle with the run seed.
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    for (std::size_t start = 0; start < order.size();
         start += cfg.batch_size) {
      const std::size_t stop =
          std::min(start + cfg.batch_size, order.size());
      const double inv = 1.0 / static_cast<double>(stop - start);

      double data_loss = 0.0;
      GradList batch_grads;
      bool finite = true;
      for (std::size_t b = start; b < stop; ++b) {
        const LabeledWindow& item = dataset[order[b]];
        // One noise stream per (seed, step, window) so runs replay exactly.
        Rng reg_rng = Rng::stream(cfg.seed, 0x1000u + step * 131u + order[b]);
        ForwardCache cache;
        Tensor pred =
            net.forward(item.window, Mode::train, cfg.reg, &reg_rng, &cache);
        MseResult mse = mse_loss(pred, one_hot_target(item.seizure));
        if (!std::isfinite(mse.loss)) {
          finite = false;
          result.abort_reason = "non-finite loss at step " +
                                std::to_string(step + 1);
          break;
        }
        data_loss += mse.loss * inv;
        GradList grads = net.backward(cache, mse.grad, cfg.reg);
        accumulate(batch_grads, grads, inv);
      }
      if (!finite) {
        restore();
        result.aborted_non_finite = true;
        result.steps = step;
        return result;
      }

      double penalty_loss = 0.0;
      if (cfg.reg.is_penalty()) {
        PenaltyResult pen = penalty(net.regularized_params(), cfg.reg);
        penalty_loss = pen.loss;
        // Penalty gradients land on the first two conv kernel tensors, which
        // lead the parameter order: conv2d0.kernels then conv2d1.kernels.
        std::size_t pen_idx = 0;
        for (auto& [name, grad] : batch_grads) {
          if (pen_idx >= pen.grads.size()) break;
          if (name == "conv2d" + std::to_string(pen_idx) + ".kernels") {
            const Tensor& pg = pen.grads[pen_idx];
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += pg[j];
            ++pen_idx;
          }
        }
      }

      try {
        adam.step(params, batch_grads);
      } catch (const Error& err) {
        restore();
        result.aborted_non_finite = true;
        result.abort_reason = err.what();
        result.steps = step;
        return result;
      }
      ++step;
      result.log.push_back(
          {step, data_loss, penalty_loss, data_loss + penalty_loss});
      snapshot();
    }
  }
  result.steps = step;

  if (!result.log.empty()) {
    const double first = result.log.front().data_loss;
    const std::size_t probe = std::min<std::size_t>(result.log.size(), 50) - 1;
    const double later = result.log[probe].data_loss;
    result.stalled = first > 0.0 && (first - later) < 0.01 * first;
  }
  return result;
}

double training_accuracy(const Network& net,
                         const std::vector<LabeledWindow>& dataset) {
  if (dataset.empty()) return 0.0;
  std::size_t correct = 0;
  for (const LabeledWindow& item : dataset) {
    Tensor pred = net.predict(item.window);
    const bool says_seizure = pred[0] > pred[1];
    if (says_seizure == item.seizure) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

void write_loss_log_csv(const std::string& path,
                        const std::vector<TrainLogEntry>& log,
                        const std::map<std::string, std::string>& header) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp + "'");
    for (const auto& [key, value] : header) {
      out << "# " << key << "=" << value << "\n";
    }
    out << "step,data_loss,penalty,total\n";
    char buf[160];
    for (const TrainLogEntry& e : log) {
      std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e.step,
                    e.data_loss, e.penalty, e.total);
      out << buf;
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw FormatError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

namespace {

std::string size_list_str(const std::vector<std::size_t>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  return out;
}

}  // namespace

std::map<std::string, std::string> network_config_map(const NetworkConfig& cfg) {
  std::map<std::string, std::string> map;
  map["net.input_frames"] = std::to_string(cfg.input_frames);
  map["net.input_height"] = std::to_string(cfg.input_height);
  map["net.input_width"] = std::to_string(cfg.input_width);
  map["net.input_channels"] = std::to_string(cfg.input_channels);
  map["net.conv_channels"] = size_list_str(cfg.conv_channels);
  map["net.conv2d_kernel"] = std::to_string(cfg.conv2d_kernel);
  map["net.pool"] = std::to_string(cfg.pool_h) + "x" + std::to_string(cfg.pool_w);
  map["net.conv1d_channels"] = std::to_string(cfg.conv1d_channels);
  map["net.conv1d_kernel"] = std::to_string(cfg.conv1d_kernel);
  map["net.pool1d_size"] = std::to_string(cfg.pool1d_size);
  map["net.rnn_hidden"] = size_list_str(cfg.rnn_hidden);
  map["net.rnn_kind"] = rnn_kind_name(cfg.rnn_kind);
  map["net.bidirectional"] = cfg.bidirectional ? "true" : "false";
  return map;
}

NetworkConfig network_config_from_map(
    const std::map<std::string, std::string>& map) {
  NetworkConfig cfg;
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = map.find(key);
    if (it == map.end()) {
      throw FormatError("checkpoint config misses key '" + key + "'");
    }
    return it->second;
  };
  cfg.input_frames = std::stoull(get("net.input_frames"));
  cfg.input_height = std::stoull(get("net.input_height"));
  cfg.input_width = std::stoull(get("net.input_width"));
  cfg.input_channels = std::stoull(get("net.input_channels"));
  cfg.conv_channels = parse_size_list(get("net.conv_channels"));
  cfg.conv2d_kernel = std::stoull(get("net.conv2d_kernel"));
  const std::string pool = get("net.pool");
  const std::size_t x = pool.find('x');
  if (x == std::string::npos) throw FormatError("bad net.pool value");
  cfg.pool_h = std::stoull(pool.substr(0, x));
  cfg.pool_w = std::stoull(pool.substr(x + 1));
  cfg.conv1d_channels = std::stoull(get("net.conv1d_channels"));
  cfg.conv1d_kernel = std::stoull(get("net.conv1d_kernel"));
  cfg.pool1d_size = std::stoull(get("net.pool1d_size"));
  cfg.rnn_hidden = parse_size_list(get("net.rnn_hidden"));
  cfg.rnn_kind = rnn_kind_from_name(get("net.rnn_kind"));
  cfg.bidirectional = get("net.bidirectional") == "true";
  return cfg;
}

void save_checkpoint(const std::string& path, const Network& net,
                     const std::map<std::string, std::string>& extra_config) {
  Container container;
  container.config = network_config_map(net.config());
  for (const auto& [key, value] : extra_config) container.config[key] = value;
  container.config["kind"] = "checkpoint";
  for (const auto& [name, tensor] : net.parameters()) {
    container.tensors.emplace_back(name, *tensor);
  }
  write_container(path, container);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Container container = read_container(path);
  if (container.config_value("kind") != "checkpoint") {
    throw FormatError("'" + path + "' is not a checkpoint container");
  }
  NetworkConfig cfg = network_config_from_map(container.config);
  LoadedCheckpoint loaded{Network(cfg), container.config};
  auto params = loaded.net.parameters();
  if (params.size() != container.tensors.size()) {
    throw FormatError("'" + path + "' holds " +
                      std::to_string(container.tensors.size()) +
                      " tensors, expected " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, param] = params[i];
    const auto& [stored_name, stored] = container.tensors[i];
    if (name != stored_name || !param->same_shape(stored)) {
      throw FormatError("'" + path + "' tensor '" + stored_name +
                        "' does not match expected '" + name + "'");
    }
    *param = stored;
  }
  return loaded;
}

}  // namespace seiznet
