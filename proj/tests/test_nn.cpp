#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>

#include "faceerase/nn/adam.hpp"
#include "faceerase/nn/layers.hpp"
#include "faceerase/nn/ops.hpp"
#include "faceerase/nn/serialize.hpp"
#include "support.hpp"

using namespace faceerase;
using namespace faceerase::nn;
using testing_support::random_tensor;

namespace {

using Fn = std::function<Var<double>(const std::vector<Var<double>>&)>;

// Central differences on every element of every input against backward().
double max_grad_error(const Fn& f, std::vector<Var<double>> inputs, double h = 1e-6) {
  for (auto& v : inputs) v.set_requires_grad(true);
  const Var<double> out = f(inputs);
  backward(out);
  double worst = 0;
  for (auto& v : inputs) {
    for (std::size_t i = 0; i < v.value().size(); ++i) {
      const double x0 = v.value()[i];
      v.mutable_value()[i] = x0 + h;
      const double up = f(inputs).value()[0];
      v.mutable_value()[i] = x0 - h;
      const double dn = f(inputs).value()[0];
      v.mutable_value()[i] = x0;
      const double fd = (up - dn) / (2 * h);
      const double an = v.grad()[i];
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-3, std::abs(fd) + std::abs(an)));
    }
  }
  return worst;
}

// Projects an op output onto fixed random weights so the check is scalar.
Fn project(std::function<Var<double>(const std::vector<Var<double>>&)> op, std::uint64_t seed) {
  auto weights = std::make_shared<Tensor<double>>();
  return [op, weights, seed](const std::vector<Var<double>>& in) {
    const Var<double> y = op(in);
    if (weights->shape() != y.value().shape()) {
      std::mt19937_64 rng(seed);
      *weights = random_tensor<double>(y.value().shape(), rng, -1, 1);
    }
    return ops::sum(ops::mul(y, Var<double>(*weights)));
  };
}

Var<double> rv(Shape s, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  return Var<double>(random_tensor<double>(s, rng, lo, hi));
}

Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                          ops::ConvParams p) {
  const Shape xs = x.shape(), ws = w.shape();
  const int oh = ops::conv_out_extent(xs.h, ws.h, p), ow = ops::conv_out_extent(xs.w, ws.w, p);
  Tensor<double> y({xs.n, ws.n, oh, ow});
  for (int n = 0; n < xs.n; ++n)
    for (int o = 0; o < ws.n; ++o)
      for (int r = 0; r < oh; ++r)
        for (int c = 0; c < ow; ++c) {
          double acc = b.empty() ? 0.0 : b.at(0, o, 0, 0);
          for (int i = 0; i < xs.c; ++i)
            for (int kr = 0; kr < ws.h; ++kr)
              for (int kc = 0; kc < ws.w; ++kc) {
                const int rr = r * p.stride - p.pad + kr * p.dilation;
                const int cc = c * p.stride - p.pad + kc * p.dilation;
                if (rr < 0 || cc < 0 || rr >= xs.h || cc >= xs.w) continue;
                acc += w.at(o, i, kr, kc) * x.at(n, i, rr, cc);
              }
          y.at(n, o, r, c) = acc;
        }
  return y;
}

}  // namespace

TEST(Conv2d, ForwardMatchesNaiveLoops) {
  std::mt19937_64 rng(1);
  for (int cout : {1, 2, 5}) {
    for (ops::ConvParams p : {ops::ConvParams{1, 1, 1}, ops::ConvParams{2, 1, 1}, ops::ConvParams{1, 2, 2}}) {
      const auto x = rv({2, 3, 9, 8}, rng);
      const auto w = rv({cout, 3, 3, 3}, rng);
      const auto b = rv({1, cout, 1, 1}, rng);
      const Tensor<double> y = ops::conv2d(x, w, b, p).value();
      const Tensor<double> ref = naive_conv(x.value(), w.value(), b.value(), p);
      ASSERT_EQ(y.shape(), ref.shape());
      for (std::size_t i = 0; i < y.size(); ++i) ASSERT_NEAR(y[i], ref[i], 1e-12);
    }
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  for (int cout : {2, 4}) {
    const Fn f = project(
        [](const std::vector<Var<double>>& in) { return ops::conv2d(in[0], in[1], in[2], {2, 1, 1}); }, 3);
    EXPECT_LT(max_grad_error(f, {rv({1, 2, 6, 6}, rng), rv({cout, 2, 4, 4}, rng), rv({1, cout, 1, 1}, rng)}), 1e-6);
    const Fn g = project(
        [](const std::vector<Var<double>>& in) { return ops::conv2d(in[0], in[1], Var<double>(), {1, 2, 2}); }, 4);
    EXPECT_LT(max_grad_error(g, {rv({2, 2, 6, 5}, rng), rv({cout, 2, 3, 3}, rng)}), 1e-6);
  }
}

TEST(Ops, ElementwiseGradients) {
  std::mt19937_64 rng(5);
  const Shape s{2, 3, 4, 4};
  auto check1 = [&](std::function<Var<double>(const Var<double>&)> op, double lo, double hi, std::uint64_t seed) {
    const Fn f = project([op](const std::vector<Var<double>>& in) { return op(in[0]); }, seed);
    return max_grad_error(f, {rv(s, rng, lo, hi)});
  };
  EXPECT_LT(check1([](const Var<double>& x) { return ops::relu(x); }, -1, 1, 1), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::leaky_relu(x, 0.2); }, -1, 1, 2), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::sigmoid(x); }, -3, 3, 3), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::tanh(x); }, -3, 3, 4), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::abs(x); }, -1, 1, 5), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::log_clamped(x, 1e-7); }, 0.1, 0.9, 6), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::instance_norm(x); }, -1, 1, 7), 1e-5);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::upsample_nearest(x, 2); }, -1, 1, 8), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::max_pool2(x); }, -1, 1, 9), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::global_avg_pool(x); }, -1, 1, 10), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::slice_channels(x, 1, 3); }, -1, 1, 11), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::gram(x); }, -1, 1, 12), 1e-6);
  EXPECT_LT(check1([](const Var<double>& x) { return ops::scale(ops::add_scalar(x, 0.5), 3.0); }, -1, 1, 13), 1e-6);
}

TEST(Ops, BroadcastingBinaryGradients) {
  std::mt19937_64 rng(6);
  for (auto op : {ops::add<double>, ops::sub<double>, ops::mul<double>}) {
    const Fn f = project([op](const std::vector<Var<double>>& in) { return op(in[0], in[1]); }, 14);
    EXPECT_LT(max_grad_error(f, {rv({2, 3, 4, 4}, rng), rv({2, 1, 4, 4}, rng)}), 1e-6);
    EXPECT_LT(max_grad_error(f, {rv({1, 3, 1, 1}, rng), rv({2, 3, 4, 4}, rng)}), 1e-6);
  }
  const Fn cat = project(
      [](const std::vector<Var<double>>& in) { return ops::concat_channels(std::vector{in[0], in[1]}); }, 15);
  EXPECT_LT(max_grad_error(cat, {rv({2, 1, 3, 3}, rng), rv({2, 2, 3, 3}, rng)}), 1e-6);
  const Fn mad = [](const std::vector<Var<double>>& in) { return ops::mean_abs_diff(in[0], in[1]); };
  EXPECT_LT(max_grad_error(mad, {rv({2, 2, 3, 3}, rng), rv({2, 2, 3, 3}, rng)}), 1e-6);
}

TEST(Ops, GramIsNormalizedOuterProduct) {
  std::mt19937_64 rng(7);
  const auto x = rv({2, 3, 4, 5}, rng);
  const Tensor<double> g = ops::gram(x).value();
  for (int n = 0; n < 2; ++n)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0;
        for (int r = 0; r < 4; ++r)
          for (int c = 0; c < 5; ++c) acc += x.value().at(n, i, r, c) * x.value().at(n, j, r, c);
        EXPECT_NEAR(g.at(n, 0, i, j), acc / (3 * 4 * 5), 1e-12);
      }
}

TEST(Warp, ZeroFlowIsIdentity) {
  std::mt19937_64 rng(8);
  const auto img = rv({2, 3, 7, 9}, rng, 0, 1);
  const Var<double> zero(Tensor<double>({2, 2, 7, 9}));
  EXPECT_EQ(ops::warp(img, zero).value().storage(), img.value().storage());
}

TEST(Warp, OffsetsAreInHalfExtentUnits) {
  Tensor<double> img({1, 1, 4, 8});
  for (int c = 0; c < 8; ++c)
    for (int r = 0; r < 4; ++r) img.at(0, 0, r, c) = c;
  Tensor<double> flow({1, 2, 4, 8});
  for (int i = 0; i < 32; ++i) flow[i] = 0.25;  // dx = 0.25 * W/2 = 1 pixel
  const Tensor<double> out = ops::warp(Var<double>(img), Var<double>(flow)).value();
  EXPECT_DOUBLE_EQ(out.at(0, 0, 1, 2), 3.0);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 1, 7), 7.0);  // clamped
}

TEST(Warp, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 3; ++k) {
    const Fn f = project([](const std::vector<Var<double>>& in) { return ops::warp(in[0], in[1]); }, 20 + k);
    EXPECT_LT(max_grad_error(f, {rv({1, 3, 8, 8}, rng, 0, 1), rv({1, 2, 8, 8}, rng, -0.4, 0.4)}), 1e-3);
  }
}

TEST(SpectralDivide, DividesBySigmaEstimate) {
  std::mt19937_64 rng(10);
  const auto w = rv({4, 2, 3, 3}, rng);
  Eigen::MatrixXd m(4, 18);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 18; ++j) m(i, j) = w.value()[i * 18 + j];
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  std::vector<double> u(4), v(18);
  for (int i = 0; i < 4; ++i) u[i] = svd.matrixU()(i, 0);
  for (int j = 0; j < 18; ++j) v[j] = svd.matrixV()(j, 0);
  double sigma = 0;
  const Tensor<double> out = ops::spectral_divide(w, u, v, &sigma).value();
  EXPECT_NEAR(sigma, svd.singularValues()(0), 1e-10);
  EXPECT_NEAR(out[5], w.value()[5] / sigma, 1e-12);
  const Fn f = project(
      [u, v](const std::vector<Var<double>>& in) { return ops::spectral_divide(in[0], u, v); }, 30);
  EXPECT_LT(max_grad_error(f, {w}), 1e-6);
}

TEST(Conv2dLayer, PowerIterationConvergesToLargestSingularValue) {
  Rng rng(11);
  Conv2d<double> conv(3, 6, 4, {2, 1, 1});
  conv.init_normal(rng, 0.5);
  conv.enable_spectral_norm(rng);
  conv.converge_power_iteration();
  const Tensor<double> w = conv.effective_weight().value();
  Eigen::MatrixXd m(6, 48);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 48; ++j) m(i, j) = w[i * 48 + j];
  EXPECT_NEAR(Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0), 1.0, 1e-4);
}

TEST(Tape, NoGradGuardRecordsNothing) {
  Var<double> x(Tensor<double>({1, 1, 2, 2}, 1.0), true);
  NoGradGuard g;
  EXPECT_FALSE(ops::scale(x, 2.0).requires_grad());
}

TEST(Tape, GradientsAccumulateAcrossUses) {
  Var<double> x(Tensor<double>({1, 1, 1, 1}, 3.0), true);
  backward(ops::sum(ops::add(ops::mul(x, x), x)));  // x^2 + x
  EXPECT_DOUBLE_EQ(x.grad()[0], 7.0);
}

TEST(Adam, MatchesScalarReference) {
  Var<double> p(Tensor<double>({1, 1, 1, 3}, std::vector<double>{0.5, -1.0, 2.0}), true);
  ParamList<double> list;
  list.params.push_back({"p", &p});
  const AdamOptions o{0.01, 0.0, 0.9, 1e-8};
  Adam<double> adam(list, o);
  std::vector<double> ref = {0.5, -1.0, 2.0}, m(3, 0), v(3, 0);
  for (int t = 1; t <= 5; ++t) {
    adam.zero_grad();
    backward(ops::sum(ops::mul(p, p)));
    for (int i = 0; i < 3; ++i) {
      const double g = 2 * ref[i];
      m[i] = o.beta1 * m[i] + (1 - o.beta1) * g;
      v[i] = o.beta2 * v[i] + (1 - o.beta2) * g * g;
      const double mh = m[i] / (1 - std::pow(o.beta1, t));
      const double vh = v[i] / (1 - std::pow(o.beta2, t));
      ref[i] -= o.lr * mh / (std::sqrt(vh) + o.eps);
    }
    adam.step();
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.value()[i], ref[i], 1e-12);
  }
  EXPECT_EQ(adam.steps(), 5);
}

TEST(Adam, SkipsParametersWithoutGradients) {
  Var<double> p(Tensor<double>({1, 1, 1, 1}, 1.0), true);
  ParamList<double> list;
  list.params.push_back({"p", &p});
  Adam<double> adam(list, {});
  adam.step();
  EXPECT_DOUBLE_EQ(p.value()[0], 1.0);
}

TEST(Serialize, BlobRoundTripAndHash) {
  const auto dir = testing_support::temp_dir("blob");
  std::mt19937_64 rng(12);
  Var<float> a(random_tensor<float>({2, 3, 1, 4}, rng), true);
  std::vector<float> buf = {1.0f, 2.0f};
  ParamList<float> list;
  list.params.push_back({"a", &a});
  list.buffers.push_back({"a.sn_u", &buf});
  write_blob(dir / "x.fepb", snapshot(list));
  const std::string before = hash_parameters(list);

  Var<float> b(Tensor<float>({2, 3, 1, 4}), true);
  std::vector<float> buf2(2, 0.0f);
  ParamList<float> other;
  other.params.push_back({"a", &b});
  other.buffers.push_back({"a.sn_u", &buf2});
  restore(other, read_blob(dir / "x.fepb"));
  EXPECT_EQ(b.value().storage(), a.value().storage());
  EXPECT_EQ(buf2, buf);
  EXPECT_EQ(hash_parameters(other), before);
  b.mutable_value()[0] += 1e-3f;
  EXPECT_NE(hash_parameters(other), before);
}

TEST(Serialize, RejectsCorruptOrMismatchedBlobs) {
  const auto dir = testing_support::temp_dir("blob_bad");
  std::ofstream(dir / "bad.fepb") << "NOPE";
  EXPECT_THROW(read_blob(dir / "bad.fepb"), FormatError);
  Var<float> a(Tensor<float>({1, 1, 2, 2}), true);
  ParamList<float> list;
  list.params.push_back({"a", &a});
  write_blob(dir / "ok.fepb", snapshot(list));
  Var<float> wrong(Tensor<float>({1, 1, 3, 2}), true);
  ParamList<float> other;
  other.params.push_back({"a", &wrong});
  EXPECT_THROW(restore(other, read_blob(dir / "ok.fepb")), FormatError);
}

TEST(Sha256, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc", 3), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
