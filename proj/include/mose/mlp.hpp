#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mose {

/// Feed-forward net: affine layers with ReLU between them, identity output.
/// Columns of a batch matrix are samples.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Mlp() = default;
  /// sizes = {d_in, hidden.., n_out}; fan-in uniform init U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Mlp(std::vector<int> sizes, std::uint64_t seed);
  static Mlp zeros(std::vector<int> sizes);

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;

  Vector forward(const Vector& x) const;
  Matrix forward_batch(const Matrix& x) const;

  std::vector<Matrix> weights;  // layer k: sizes[k+1] x sizes[k]
  std::vector<Vector> biases;

 private:
  std::vector<int> sizes_;
};

template <typename Scalar>
struct Gradients {
  std::vector<typename Mlp<Scalar>::Matrix> dw;
  std::vector<typename Mlp<Scalar>::Vector> db;

  static Gradients like(const Mlp<Scalar>& net);
  Scalar norm() const;
  void scale(Scalar s);
};

inline constexpr double kGradClipNorm = 10.0;

/// Rescales to `max_norm` if the global norm exceeds it; returns the norm before clipping.
template <typename Scalar>
Scalar clip_global_norm(Gradients<Scalar>& g, Scalar max_norm);

/// Loss (1/B) sum_b (Q(x_b)[a_b] - y_b)^2 and its exact gradient, clipped to
/// `clip` in global norm. Throws std::domain_error on an empty or ragged batch.
template <typename Scalar>
Scalar td_gradient(const Mlp<Scalar>& net, const typename Mlp<Scalar>::Matrix& x, const std::vector<int>& actions,
                   const typename Mlp<Scalar>::Vector& targets, Gradients<Scalar>& out,
                   Scalar clip = static_cast<Scalar>(kGradClipNorm));

template <typename Scalar>
struct AdamState {
  Gradients<Scalar> m, v;
  long step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const Mlp<Scalar>& net);
};

/// Bias-corrected Adam update. Throws std::domain_error on shape mismatch.
template <typename Scalar>
void adam_step(Mlp<Scalar>& net, const Gradients<Scalar>& g, AdamState<Scalar>& opt);

/// Checkpoint: 8-byte magic "MOSENET1", u64 header length, JSON header
/// {"version", "scalar", "sizes"}, then per layer the weights (column-major)
/// and biases in native byte order.
template <typename Scalar>
void write_net(std::ostream& os, const Mlp<Scalar>& net);
template <typename Scalar>
Mlp<Scalar> read_net(std::istream& is);

extern template class Mlp<float>;
extern template class Mlp<double>;

}  // namespace mose
