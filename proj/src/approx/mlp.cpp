#include "mose/mlp.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

namespace mose {
namespace {

constexpr char kMagic[8] = {'M', 'O', 'S', 'E', 'N', 'E', 'T', '1'};

template <typename Scalar>
const char* scalar_name() {
  return sizeof(Scalar) == sizeof(float) ? "float32" : "float64";
}

void check_sizes(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw std::domain_error("a net needs at least input and output sizes");
  for (int s : sizes)
    if (s < 1) throw std::domain_error("layer sizes must be positive");
}

template <typename M>
void write_raw(std::ostream& os, const M& m) {
  os.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(typename M::Scalar)));
}

template <typename M>
void read_raw(std::istream& is, M& m) {
  is.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(typename M::Scalar)));
  if (!is) throw std::runtime_error("truncated checkpoint");
}

}  // namespace

template <typename Scalar>
Mlp<Scalar>::Mlp(std::vector<int> sizes, std::uint64_t seed) : sizes_(std::move(sizes)) {
  check_sizes(sizes_);
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[k]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(sizes_[k + 1], sizes_[k]);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = static_cast<Scalar>(u(rng));
    Vector b(sizes_[k + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = static_cast<Scalar>(u(rng));
    weights.push_back(std::move(w));
    biases.push_back(std::move(b));
  }
}

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::zeros(std::vector<int> sizes) {
  check_sizes(sizes);
  Mlp net;
  net.sizes_ = std::move(sizes);
  for (std::size_t k = 0; k + 1 < net.sizes_.size(); ++k) {
    net.weights.push_back(Matrix::Zero(net.sizes_[k + 1], net.sizes_[k]));
    net.biases.push_back(Vector::Zero(net.sizes_[k + 1]));
  }
  return net;
}

template <typename Scalar>
std::size_t Mlp<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) n += weights[k].size() + biases[k].size();
  return n;
}

template <typename Scalar>
typename Mlp<Scalar>::Vector Mlp<Scalar>::forward(const Vector& x) const {
  return forward_batch(x);
}

template <typename Scalar>
typename Mlp<Scalar>::Matrix Mlp<Scalar>::forward_batch(const Matrix& x) const {
  if (x.rows() != input_size())
    throw std::domain_error("input has " + std::to_string(x.rows()) + " rows, net expects " +
                            std::to_string(input_size()));
  Matrix h = x;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    Matrix z = weights[k] * h;
    z.colwise() += biases[k];
    h = k + 1 < weights.size() ? Matrix(z.cwiseMax(Scalar(0))) : std::move(z);
  }
  return h;
}

template <typename Scalar>
Gradients<Scalar> Gradients<Scalar>::like(const Mlp<Scalar>& net) {
  Gradients g;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    g.dw.push_back(Mlp<Scalar>::Matrix::Zero(net.weights[k].rows(), net.weights[k].cols()));
    g.db.push_back(Mlp<Scalar>::Vector::Zero(net.biases[k].size()));
  }
  return g;
}

template <typename Scalar>
Scalar Gradients<Scalar>::norm() const {
  double sq = 0.0;
  for (std::size_t k = 0; k < dw.size(); ++k)
    sq += static_cast<double>(dw[k].squaredNorm()) + static_cast<double>(db[k].squaredNorm());
  return static_cast<Scalar>(std::sqrt(sq));
}

template <typename Scalar>
void Gradients<Scalar>::scale(Scalar s) {
  for (auto& w : dw) w *= s;
  for (auto& b : db) b *= s;
}

template <typename Scalar>
Scalar clip_global_norm(Gradients<Scalar>& g, Scalar max_norm) {
  const Scalar n = g.norm();
  if (n > max_norm) g.scale(max_norm / n);
  return n;
}

template <typename Scalar>
Scalar td_gradient(const Mlp<Scalar>& net, const typename Mlp<Scalar>::Matrix& x, const std::vector<int>& actions,
                   const typename Mlp<Scalar>::Vector& targets, Gradients<Scalar>& out, Scalar clip) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  const Eigen::Index batch = x.cols();
  if (batch == 0) throw std::domain_error("empty batch");
  if (static_cast<Eigen::Index>(actions.size()) != batch || targets.size() != batch)
    throw std::domain_error("batch inputs, actions and targets differ in length");
  if (x.rows() != net.input_size()) throw std::domain_error("batch rows differ from the net input size");
  const std::size_t L = net.layer_count();

  // forward, keeping every layer's input
  std::vector<Matrix> acts(L + 1);
  acts[0] = x;
  for (std::size_t k = 0; k < L; ++k) {
    Matrix z = net.weights[k] * acts[k];
    z.colwise() += net.biases[k];
    acts[k + 1] = k + 1 < L ? Matrix(z.cwiseMax(Scalar(0))) : std::move(z);
  }

  Matrix delta = Matrix::Zero(net.output_size(), batch);
  Scalar loss = 0;
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int a = actions[b];
    if (a < 0 || a >= net.output_size()) throw std::domain_error("action index out of range");
    const Scalar err = acts[L](a, b) - targets(b);
    loss += err * err;
    delta(a, b) = Scalar(2) * err * inv_b;
  }
  loss *= inv_b;

  if (out.dw.size() != L) out = Gradients<Scalar>::like(net);
  for (std::size_t k = L; k-- > 0;) {
    out.dw[k].noalias() = delta * acts[k].transpose();
    out.db[k] = delta.rowwise().sum();
    if (k == 0) break;
    Matrix back = net.weights[k].transpose() * delta;
    delta = back.cwiseProduct((acts[k].array() > Scalar(0)).template cast<Scalar>().matrix());
  }
  clip_global_norm(out, clip);
  return loss;
}

template <typename Scalar>
AdamState<Scalar> AdamState<Scalar>::like(const Mlp<Scalar>& net) {
  AdamState s;
  s.m = Gradients<Scalar>::like(net);
  s.v = Gradients<Scalar>::like(net);
  return s;
}

template <typename Scalar>
void adam_step(Mlp<Scalar>& net, const Gradients<Scalar>& g, AdamState<Scalar>& opt) {
  const std::size_t L = net.layer_count();
  if (g.dw.size() != L || opt.m.dw.size() != L) throw std::domain_error("Adam shapes differ from the net");
  ++opt.step;
  const Scalar b1 = static_cast<Scalar>(opt.beta1), b2 = static_cast<Scalar>(opt.beta2);
  const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(opt.beta1, static_cast<double>(opt.step)));
  const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(opt.beta2, static_cast<double>(opt.step)));
  const Scalar lr = static_cast<Scalar>(opt.lr), eps = static_cast<Scalar>(opt.eps);
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    if (param.rows() != grad.rows() || param.cols() != grad.cols()) throw std::domain_error("Adam shape mismatch");
    m = b1 * m + (Scalar(1) - b1) * grad;
    v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t k = 0; k < L; ++k) {
    update(net.weights[k], g.dw[k], opt.m.dw[k], opt.v.dw[k]);
    update(net.biases[k], g.db[k], opt.m.db[k], opt.v.db[k]);
  }
}

template <typename Scalar>
void write_net(std::ostream& os, const Mlp<Scalar>& net) {
  const std::string header =
      nlohmann::json{{"version", 1}, {"scalar", scalar_name<Scalar>()}, {"sizes", net.sizes()}}.dump();
  const std::uint64_t len = header.size();
  os.write(kMagic, sizeof kMagic);
  os.write(reinterpret_cast<const char*>(&len), sizeof len);
  os.write(header.data(), static_cast<std::streamsize>(len));
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    write_raw(os, net.weights[k]);
    write_raw(os, net.biases[k]);
  }
  if (!os) throw std::runtime_error("checkpoint write failed");
}

template <typename Scalar>
Mlp<Scalar> read_net(std::istream& is) {
  char magic[8];
  std::uint64_t len = 0;
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::runtime_error("not a net checkpoint");
  is.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!is || len > (1U << 20)) throw std::runtime_error("bad checkpoint header");
  std::string header(len, '\0');
  is.read(header.data(), static_cast<std::streamsize>(len));
  const auto j = nlohmann::json::parse(header);
  if (j.at("version").get<int>() != 1) throw std::runtime_error("unsupported checkpoint version");
  if (j.at("scalar").get<std::string>() != scalar_name<Scalar>())
    throw std::runtime_error("checkpoint holds " + j.at("scalar").get<std::string>() + " parameters");
  auto net = Mlp<Scalar>::zeros(j.at("sizes").get<std::vector<int>>());
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    read_raw(is, net.weights[k]);
    read_raw(is, net.biases[k]);
  }
  return net;
}

#define MOSE_INSTANTIATE(S)                                                                                    \
  template class Mlp<S>;                                                                                       \
  template struct Gradients<S>;                                                                                \
  template struct AdamState<S>;                                                                                \
  template S clip_global_norm<S>(Gradients<S>&, S);                                                            \
  template S td_gradient<S>(const Mlp<S>&, const Mlp<S>::Matrix&, const std::vector<int>&, const Mlp<S>::Vector&, \
                            Gradients<S>&, S);                                                                 \
  template void adam_step<S>(Mlp<S>&, const Gradients<S>&, AdamState<S>&);                                     \
  template void write_net<S>(std::ostream&, const Mlp<S>&);                                                    \
  template Mlp<S> read_net<S>(std::istream&);

MOSE_INSTANTIATE(float)
MOSE_INSTANTIATE(double)

}  // namespace mose
