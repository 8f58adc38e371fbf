#include "scenesampler/mlp.hpp"

#include "scenesampler/errors.hpp"
#include "scenesampler/random.hpp"

namespace scs {

void Mlp::validate() const {
  if (w1.rows() == 0 || w1.cols() == 0 || w2.rows() == 0) throw InvalidInput("mlp: empty layer");
  if (b1.size() != w1.rows() || w2.cols() != w1.rows() || b2.size() != w2.rows()) {
    throw InvalidInput("mlp: inconsistent parameter shapes");
  }
}

Mlp Mlp::zeros(Eigen::Index in, Eigen::Index hidden, Eigen::Index out) {
  return {Eigen::MatrixXd::Zero(hidden, in), Eigen::VectorXd::Zero(hidden), Eigen::MatrixXd::Zero(out, hidden),
          Eigen::VectorXd::Zero(out)};
}

Mlp Mlp::random(Eigen::Index in, Eigen::Index hidden, Eigen::Index out, std::uint64_t seed, double scale) {
  Mlp m = zeros(in, hidden, out);
  SplitMix64 rng(seed);
  for (Eigen::Index k = 0; k < m.parameter_count(); ++k) m.parameter(k) = rng.uniform(-scale, scale);
  return m;
}

Mlp Mlp::identity(Eigen::Index d) {
  Mlp m = zeros(d, 2 * d, d);
  m.w1.topRows(d).setIdentity();
  m.w1.bottomRows(d) = -Eigen::MatrixXd::Identity(d, d);
  m.w2.leftCols(d).setIdentity();
  m.w2.rightCols(d) = -Eigen::MatrixXd::Identity(d, d);
  return m;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const { return forward_with_cache(*this, x).output; }

Eigen::Index Mlp::parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

double& Mlp::parameter(Eigen::Index k) {
  if (k < w1.size()) return w1.data()[k];
  k -= w1.size();
  if (k < b1.size()) return b1.data()[k];
  k -= b1.size();
  if (k < w2.size()) return w2.data()[k];
  k -= w2.size();
  return b2.data()[k];
}

MlpActivations forward_with_cache(const Mlp& mlp, const Eigen::VectorXd& x) {
  if (x.size() != mlp.in_dim()) throw InvalidInput("mlp: input has the wrong dimension");
  MlpActivations a;
  a.pre = mlp.w1 * x + mlp.b1;
  a.hidden = a.pre.cwiseMax(0.0);
  a.output = mlp.w2 * a.hidden + mlp.b2;
  return a;
}

Eigen::VectorXd backward(const Mlp& mlp, const Eigen::VectorXd& x, const MlpActivations& act,
                         const Eigen::VectorXd& dy, Mlp& grad) {
  grad.b2 += dy;
  grad.w2 += dy * act.hidden.transpose();
  Eigen::VectorXd dh = mlp.w2.transpose() * dy;
  for (Eigen::Index k = 0; k < dh.size(); ++k) {
    if (act.pre[k] <= 0.0) dh[k] = 0.0;
  }
  grad.b1 += dh;
  grad.w1 += dh * x.transpose();
  return mlp.w1.transpose() * dh;
}

}  // namespace scs
