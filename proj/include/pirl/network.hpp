#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pirl/rng.hpp"

namespace pirl {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Gradient (or any parameter-shaped accumulator) matching a network layout.
struct GradientBuffer {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;

  void set_zero() {
    for (auto& m : w) m.setZero();
    for (auto& v : b) v.setZero();
  }

  void add_scaled(const GradientBuffer& other, double scale) {
    for (std::size_t l = 0; l < w.size(); ++l) {
      w[l] += scale * other.w[l];
      b[l] += scale * other.b[l];
    }
  }

  double squared_norm() const {
    double n = 0.0;
    for (const auto& m : w) n += m.squaredNorm();
    for (const auto& v : b) n += v.squaredNorm();
    return n;
  }
};

/// Fully connected value network: tanh hidden layers, linear output, one
/// output head per discrete action. 64-bit parameters throughout so the
/// second-derivative checks below stay meaningful.
class QNetwork {
 public:
  std::vector<Eigen::MatrixXd> weights;  // weights[l] maps layer l to l+1
  std::vector<Eigen::VectorXd> biases;

  QNetwork() = default;

  /// Seeded uniform init on +-sqrt(6/(fan_in+fan_out)); biases start at zero.
  QNetwork(const std::vector<int>& layer_sizes, Rng& rng) {
    init_shapes(layer_sizes);
    for (std::size_t l = 0; l < weights.size(); ++l) {
      const double limit =
          std::sqrt(6.0 / (weights[l].cols() + weights[l].rows()));
      for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
        for (Eigen::Index c = 0; c < weights[l].cols(); ++c) {
          weights[l](r, c) = rng.uniform(-limit, limit);
        }
      }
    }
  }

  static QNetwork zero(const std::vector<int>& layer_sizes) {
    QNetwork net;
    net.init_shapes(layer_sizes);
    return net;
  }

  int layer_count() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }

  std::vector<int> layer_sizes() const {
    std::vector<int> sizes;
    sizes.push_back(input_dim());
    for (const auto& m : weights) sizes.push_back(static_cast<int>(m.rows()));
    return sizes;
  }

  GradientBuffer make_gradient() const {
    GradientBuffer g;
    for (const auto& m : weights) g.w.emplace_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
    for (const auto& v : biases) g.b.emplace_back(Eigen::VectorXd::Zero(v.size()));
    return g;
  }

  Eigen::VectorXd forward(const Eigen::VectorXd& s) const {
    if (!s.allFinite()) throw std::invalid_argument("QNetwork::forward: non-finite input");
    Eigen::VectorXd a = s;
    for (int l = 0; l < layer_count(); ++l) {
      a = (weights[l] * a + biases[l]).eval();
      if (l + 1 < layer_count()) a = a.array().tanh();
    }
    return a;
  }

  /// Index of the maximal head; ties go to the lowest index.
  int greedy_action(const Eigen::VectorXd& s) const {
    const Eigen::VectorXd q = forward(s);
    int best = 0;
    for (int i = 1; i < q.size(); ++i) {
      if (q[i] > q[best]) best = i;
    }
    return best;
  }

 private:
  void init_shapes(const std::vector<int>& layer_sizes) {
    if (layer_sizes.size() < 2) {
      throw std::invalid_argument("QNetwork: need at least input and output layer");
    }
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      weights.emplace_back(Eigen::MatrixXd::Zero(layer_sizes[l + 1], layer_sizes[l]));
      biases.emplace_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
    }
  }
};

using TargetNetwork = QNetwork;

/// theta_hat <- eta * theta + (1 - eta) * theta_hat.
inline void soft_update(TargetNetwork& target, const QNetwork& source, double eta) {
  if (target.layer_sizes() != source.layer_sizes()) {
    throw std::invalid_argument("soft_update: shape mismatch");
  }
  for (std::size_t l = 0; l < source.weights.size(); ++l) {
    target.weights[l] = eta * source.weights[l] + (1.0 - eta) * target.weights[l];
    target.biases[l] = eta * source.biases[l] + (1.0 - eta) * target.biases[l];
  }
}

// ---------------------------------------------------------------------------
// First-order pass: cached activations and reverse-mode parameter gradients.
// ---------------------------------------------------------------------------

struct ForwardCache {
  std::vector<Eigen::VectorXd> acts;  // acts[0] = input, acts[l+1] = layer l output
};

inline const Eigen::VectorXd& forward_cached(const QNetwork& net,
                                             const Eigen::VectorXd& s,
                                             ForwardCache& cache) {
  cache.acts.resize(net.layer_count() + 1);
  cache.acts[0] = s;
  for (int l = 0; l < net.layer_count(); ++l) {
    cache.acts[l + 1] = net.weights[l] * cache.acts[l] + net.biases[l];
    if (l + 1 < net.layer_count()) {
      cache.acts[l + 1] = cache.acts[l + 1].array().tanh();
    }
  }
  return cache.acts.back();
}

/// Accumulates scale * d(adjoint . output)/d(theta) into grad.
/// `out_adjoint` is the derivative of the scalar loss w.r.t. each head.
inline void param_backward(const QNetwork& net, const ForwardCache& cache,
                           const Eigen::VectorXd& out_adjoint,
                           GradientBuffer& grad, double scale = 1.0) {
  Eigen::VectorXd delta = out_adjoint;
  for (int l = net.layer_count() - 1; l >= 0; --l) {
    grad.w[l].noalias() += scale * delta * cache.acts[l].transpose();
    grad.b[l] += scale * delta;
    if (l > 0) {
      // through tanh: phi' = 1 - a^2 with a the cached post-activation
      delta = (net.weights[l].transpose() * delta).eval();
      delta.array() *= 1.0 - cache.acts[l].array().square();
    }
  }
}

/// Convenience: gradient of the single head's value at s.
inline GradientBuffer value_param_gradient(const QNetwork& net,
                                           const Eigen::VectorXd& s, int head) {
  ForwardCache cache;
  forward_cached(net, s, cache);
  GradientBuffer grad = net.make_gradient();
  Eigen::VectorXd adj = Eigen::VectorXd::Zero(net.output_dim());
  adj[head] = 1.0;
  param_backward(net, cache, adj, grad);
  return grad;
}

// ---------------------------------------------------------------------------
// Second-order pass. Every unit carries a jet (value, gradient and Hessian
// w.r.t. the network input), propagated through the layers in closed form.
// The tanh chain uses phi' = 1 - a^2, phi'' = -2 a phi',
// phi''' = phi' (6 a^2 - 2).
// ---------------------------------------------------------------------------

struct JetLayer {
  Eigen::VectorXd a;                // post-activation values
  Eigen::MatrixXd J;                // rows: d(a_i)/d(input)
  std::vector<Eigen::MatrixXd> H;   // per-unit input Hessians
  Eigen::MatrixXd Jz;               // pre-activation jacobian (hidden layers)
  std::vector<Eigen::MatrixXd> Hz;  // pre-activation Hessians (hidden layers)
};

struct JetCache {
  Eigen::VectorXd input;
  std::vector<JetLayer> layers;
};

inline void jet_forward(const QNetwork& net, const Eigen::VectorXd& s,
                        JetCache& cache) {
  if (!s.allFinite()) throw std::invalid_argument("jet_forward: non-finite input");
  const int d = net.input_dim();
  const int L = net.layer_count();
  cache.input = s;
  cache.layers.resize(L);

  // reset-in-place so a reused cache does not reallocate its matrices
  auto zeroed = [d](std::vector<Eigen::MatrixXd>& mats, int m) {
    if (static_cast<int>(mats.size()) != m) {
      mats.assign(m, Eigen::MatrixXd::Zero(d, d));
    } else {
      for (auto& h : mats) h.setZero();
    }
  };

  for (int l = 0; l < L; ++l) {
    JetLayer& layer = cache.layers[l];
    const int m = static_cast<int>(net.weights[l].rows());
    const bool hidden = l + 1 < L;

    Eigen::VectorXd z;
    if (l == 0) {
      z = net.weights[0] * s + net.biases[0];
      layer.Jz = net.weights[0];
      zeroed(layer.Hz, m);
    } else {
      const JetLayer& prev = cache.layers[l - 1];
      z = net.weights[l] * prev.a + net.biases[l];
      layer.Jz.noalias() = net.weights[l] * prev.J;
      zeroed(layer.Hz, m);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < prev.J.rows(); ++j) {
          const double wij = net.weights[l](i, j);
          if (wij != 0.0) layer.Hz[i] += wij * prev.H[j];
        }
      }
    }

    if (hidden) {
      layer.a = z.array().tanh();
      layer.J.resize(m, d);
      if (static_cast<int>(layer.H.size()) != m) {
        layer.H.assign(m, Eigen::MatrixXd(d, d));
      }
      for (int i = 0; i < m; ++i) {
        const double ai = layer.a[i];
        const double p = 1.0 - ai * ai;
        const double q = -2.0 * ai * p;
        layer.J.row(i) = p * layer.Jz.row(i);
        // q * (u u^T) keeps the Hessian bit-symmetric
        layer.H[i].noalias() = q * (layer.Jz.row(i).transpose() * layer.Jz.row(i));
        layer.H[i] += p * layer.Hz[i];
      }
    } else {
      layer.a = z;
      layer.J = layer.Jz;
      layer.H = layer.Hz;
    }
  }
}

struct HeadJet {
  double value;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

inline HeadJet head_jet(const JetCache& cache, int head) {
  const JetLayer& out = cache.layers.back();
  return {out.a[head], out.J.row(head).transpose(), out.H[head]};
}

/// Exact gradient of head `i` w.r.t. the input s.
inline Eigen::VectorXd input_gradient(const QNetwork& net, const Eigen::VectorXd& s,
                                      int head) {
  JetCache cache;
  jet_forward(net, s, cache);
  return head_jet(cache, head).grad;
}

/// Exact (symmetric) Hessian of head `i` w.r.t. the input s.
inline Eigen::MatrixXd input_hessian(const QNetwork& net, const Eigen::VectorXd& s,
                                     int head) {
  JetCache cache;
  jet_forward(net, s, cache);
  return head_jet(cache, head).hess;
}

/// Accumulates scale * d/d(theta) [ alpha * Q(s,head)
///   + beta . grad_s Q(s,head) + <Gamma, hess_s Q(s,head)> ] into grad.
/// This is the reverse pass through the jet propagation above and is what the
/// PDE-residual loss differentiates.
inline void jet_param_backward(const QNetwork& net, const JetCache& cache,
                               int head, double alpha, const Eigen::VectorXd& beta,
                               const Eigen::MatrixXd& Gamma, GradientBuffer& grad,
                               double scale = 1.0) {
  const int d = net.input_dim();
  const int L = net.layer_count();

  // Adjoints w.r.t. the current layer's pre-activation jets.
  Eigen::VectorXd zbar = Eigen::VectorXd::Zero(net.output_dim());
  Eigen::MatrixXd Jbar = Eigen::MatrixXd::Zero(net.output_dim(), d);
  std::vector<Eigen::MatrixXd> Hbar(net.output_dim(), Eigen::MatrixXd::Zero(d, d));
  zbar[head] = alpha;
  Jbar.row(head) = beta.transpose();
  Hbar[head] = Gamma;

  for (int l = L - 1; l >= 0; --l) {
    const bool first = l == 0;
    const int m_out = static_cast<int>(net.weights[l].rows());
    const int m_in = static_cast<int>(net.weights[l].cols());

    // Input jets of this layer.
    const Eigen::VectorXd& a_in = first ? cache.input : cache.layers[l - 1].a;
    const Eigen::MatrixXd* J_in = first ? nullptr : &cache.layers[l - 1].J;
    const std::vector<Eigen::MatrixXd>* H_in = first ? nullptr : &cache.layers[l - 1].H;

    for (int i = 0; i < m_out; ++i) {
      grad.b[l][i] += scale * zbar[i];
      for (int j = 0; j < m_in; ++j) {
        double g = zbar[i] * a_in[j];
        if (first) {
          g += Jbar(i, j);  // the input's jacobian is the identity
        } else {
          g += Jbar.row(i).dot(J_in->row(j));
          g += Hbar[i].cwiseProduct((*H_in)[j]).sum();
        }
        grad.w[l](i, j) += scale * g;
      }
    }
    if (first) break;

    // Adjoints w.r.t. the previous layer's post-activation jets.
    Eigen::VectorXd abar = net.weights[l].transpose() * zbar;
    Eigen::MatrixXd Jabar = net.weights[l].transpose() * Jbar;
    std::vector<Eigen::MatrixXd> Habar(m_in, Eigen::MatrixXd::Zero(d, d));
    for (int i = 0; i < m_out; ++i) {
      for (int j = 0; j < m_in; ++j) {
        const double wij = net.weights[l](i, j);
        if (wij != 0.0) Habar[j] += wij * Hbar[i];
      }
    }

    // Through tanh of layer l-1 onto its pre-activation jets.
    const JetLayer& prev = cache.layers[l - 1];
    zbar.resize(m_in);
    Jbar.resize(m_in, d);
    Hbar.assign(m_in, Eigen::MatrixXd(d, d));
    for (int j = 0; j < m_in; ++j) {
      const double aj = prev.a[j];
      const double p = 1.0 - aj * aj;
      const double q = -2.0 * aj * p;
      const double r = p * (6.0 * aj * aj - 2.0);
      const Eigen::VectorXd u = prev.Jz.row(j).transpose();

      zbar[j] = abar[j] * p + q * Jabar.row(j).dot(prev.Jz.row(j)) +
                q * Habar[j].cwiseProduct(prev.Hz[j]).sum() +
                r * u.dot(Habar[j] * u);
      Jbar.row(j) = p * Jabar.row(j) +
                    q * ((Habar[j] + Habar[j].transpose()) * u).transpose();
      Hbar[j] = p * Habar[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoints: version tag, layer sizes, then row-major weights and biases.
// Raw IEEE-754 bytes, so a round trip is bit exact.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'Q', 'N', 'E', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_network(const QNetwork& net, const std::string& path,
                         std::uint64_t config_hash = 0) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  put_u32(kCheckpointVersion);
  put_u64(config_hash);
  const std::vector<int> sizes = net.layer_sizes();
  put_u32(static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) put_u32(static_cast<std::uint32_t>(s));
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const auto& w = net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const double v = w(r, c);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
    const auto& b = net.biases[l];
    out.write(reinterpret_cast<const char*>(b.data()), 8 * b.size());
  }
  if (!out) throw CheckpointError("short write saving checkpoint: " + path);
}

struct LoadedNetwork {
  QNetwork net;
  std::uint64_t config_hash = 0;
};

inline LoadedNetwork load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointError("not a network checkpoint: " + path);
  }
  auto get_u32 = [&] {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get_u64 = [&] {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  const std::uint32_t version = get_u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  LoadedNetwork loaded;
  loaded.config_hash = get_u64();
  const std::uint32_t n_sizes = get_u32();
  if (!in || n_sizes < 2 || n_sizes > 64) {
    throw CheckpointError("corrupt checkpoint header: " + path);
  }
  std::vector<int> sizes(n_sizes);
  for (auto& s : sizes) s = static_cast<int>(get_u32());
  loaded.net = QNetwork::zero(sizes);
  for (std::size_t l = 0; l < loaded.net.weights.size(); ++l) {
    auto& w = loaded.net.weights[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        in.read(reinterpret_cast<char*>(&w(r, c)), 8);
      }
    }
    auto& b = loaded.net.biases[l];
    in.read(reinterpret_cast<char*>(b.data()), 8 * b.size());
  }
  if (!in) throw CheckpointError("truncated checkpoint: " + path);
  return loaded;
}

}  // namespace pirl
