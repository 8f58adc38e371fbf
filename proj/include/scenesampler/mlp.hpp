#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace scs {

/// Two affine layers with a ReLU between: y = W2 relu(W1 x + b1) + b2.
struct Mlp {
  Eigen::MatrixXd w1;  // hidden x in
  Eigen::VectorXd b1;  // hidden
  Eigen::MatrixXd w2;  // out x hidden
  Eigen::VectorXd b2;  // out

  Eigen::Index in_dim() const { return w1.cols(); }
  Eigen::Index hidden_dim() const { return w1.rows(); }
  Eigen::Index out_dim() const { return w2.rows(); }

  /// Throws InvalidInput when the four shapes disagree.
  void validate() const;

  static Mlp zeros(Eigen::Index in, Eigen::Index hidden, Eigen::Index out);

  /// Uniform(-scale, scale) weights and biases from a seed.
  static Mlp random(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, std::uint64_t seed,
                    double scale);

  /// Exact identity on R^d with hidden width 2d: relu(x) - relu(-x) = x.
  static Mlp identity(Eigen::Index d);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

  /// Number of scalar parameters, and flat access in the order w1, b1, w2, b2
  /// (matrices column-major).
  Eigen::Index parameter_count() const;
  double& parameter(Eigen::Index k);
};

struct MlpActivations {
  Eigen::VectorXd pre;     // W1 x + b1
  Eigen::VectorXd hidden;  // relu(pre)
  Eigen::VectorXd output;
};

MlpActivations forward_with_cache(const Mlp& mlp, const Eigen::VectorXd& x);

/// Accumulates dL/dparams into `grad` (same shapes as `mlp`) given dL/dy,
/// and returns dL/dx.
Eigen::VectorXd backward(const Mlp& mlp, const Eigen::VectorXd& x, const MlpActivations& act,
                         const Eigen::VectorXd& dy, Mlp& grad);

}  // namespace scs
