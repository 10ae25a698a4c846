#include "faceerase/cli/selftest.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <cmath>
#include <functional>
#include <random>

#include "faceerase/imaging/poisson.hpp"
#include "faceerase/losses/losses.hpp"
#include "faceerase/models/networks.hpp"
#include "faceerase/nn/ops.hpp"

namespace faceerase::cli {

namespace ops = nn::ops;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape s, std::mt19937_64& rng, double lo = 0, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(u(rng));
  return t;
}

CheckResult check(const std::string& name, const std::function<std::string(bool&)>& body) {
  CheckResult r{name, true, ""};
  try {
    r.detail = body(r.passed);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  return r;
}

}  // namespace

std::vector<CheckResult> run_selftest(unsigned seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;

  out.push_back(check("warp_identity", [&](bool& ok) {
    double worst = 0;
    for (int k = 0; k < 20; ++k) {
      const Var<float> img(random_tensor<float>({1, 3, 16, 16}, rng));
      const Var<float> zero(Tensor<float>({1, 2, 16, 16}));
      const Var<float> w = ops::warp(img, zero);
      for (std::size_t i = 0; i < img.value().size(); ++i) {
        worst = std::max(worst, static_cast<double>(std::abs(w.value()[i] - img.value()[i])));
      }
    }
    ok = worst <= 1e-6;
    return fmt::format("max abs error {:.3g}", worst);
  }));

  out.push_back(check("warp_gradient", [&](bool& ok) {
    Var<double> img(random_tensor<double>({1, 2, 6, 6}, rng), true);
    Var<double> flow(random_tensor<double>({1, 2, 6, 6}, rng, -0.3, 0.3), true);
    const Tensor<double> probe = random_tensor<double>({1, 2, 6, 6}, rng);
    auto loss = [&]() { return ops::sum(ops::mul(ops::warp(img, flow), Var<double>(probe))); };
    nn::backward(loss());
    double worst = 0;
    for (Var<double>* v : {&img, &flow}) {
      for (std::size_t i = 0; i < v->value().size(); i += 5) {
        const double x0 = v->value()[i];
        const double h = 1e-6;
        v->mutable_value()[i] = x0 + h;
        const double up = loss().value()[0];
        v->mutable_value()[i] = x0 - h;
        const double dn = loss().value()[0];
        v->mutable_value()[i] = x0;
        const double fd = (up - dn) / (2 * h);
        const double an = v->grad()[i];
        worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd) + std::abs(an)));
      }
    }
    ok = worst < 1e-3;
    return fmt::format("max relative error {:.3g}", worst);
  }));

  out.push_back(check("gram_symmetric_psd", [&](bool& ok) {
    const Var<double> f(random_tensor<double>({1, 6, 5, 5}, rng, -1, 1));
    const Var<double> gv = ops::gram(f);
    const Tensor<double>& g = gv.value();
    Eigen::MatrixXd m(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) m(i, j) = g.at(0, 0, i, j);
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff();
    ok = asym <= 1e-12 && min_eig >= -1e-6;
    return fmt::format("asymmetry {:.3g}, min eigenvalue {:.3g}", asym, min_eig);
  }));

  out.push_back(check("losses_zero_on_identical", [&](bool& ok) {
    const Var<double> a(random_tensor<double>({2, 3, 8, 8}, rng));
    const std::vector<Var<double>> feats = {Var<double>(random_tensor<double>({2, 4, 8, 8}, rng)),
                                            Var<double>(random_tensor<double>({2, 6, 4, 4}, rng))};
    const double fm = losses::feature_matching_loss(feats, feats).value()[0];
    const double perc = losses::perceptual_loss(feats, feats).value()[0];
    const double style = losses::style_loss(feats, feats).value()[0];
    const double l1 = losses::l1_loss(a, a).value()[0];
    const double pc = losses::pixel_clone_loss(a, a).value()[0];
    ok = fm == 0 && perc == 0 && style == 0 && l1 == 0 && pc == 0;
    return fmt::format("fm {} perc {} style {} l1 {} pc {}", fm, perc, style, l1, pc);
  }));

  out.push_back(check("discriminator_receptive_field", [&](bool& ok) {
    const int edge = models::DiscriminatorSpec::edge().receptive_field();
    const int inpaint = models::DiscriminatorSpec::inpaint().receptive_field();
    ok = edge == 70 && inpaint == 70;
    return fmt::format("edge {}, inpaint {}", edge, inpaint);
  }));

  out.push_back(check("discriminator_spectral_norm", [&](bool& ok) {
    nn::Rng r(seed);
    const models::PatchDiscriminator<float> d(models::DiscriminatorSpec::edge(8), r);
    double worst = 0;
    for (const auto& layer : d.layers()) {
      const Var<float> wv = layer.effective_weight();
      const Tensor<float>& w = wv.value();
      const int rows = w.shape().n;
      const int cols = static_cast<int>(w.size()) / rows;
      Eigen::MatrixXd m(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = w[static_cast<std::size_t>(i) * cols + j];
      worst = std::max(worst, Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0));
    }
    ok = worst <= 1 + 1e-3;
    return fmt::format("largest singular value {:.6f}", worst);
  }));

  out.push_back(check("poisson_identity", [&](bool& ok) {
    imaging::ImageRGB img(12, 12);
    std::uniform_real_distribution<float> u(0, 1);
    for (float& v : img.data()) v = u(rng);
    imaging::BinaryMask region(12, 12);
    for (int r = 3; r < 9; ++r)
      for (int c = 3; c < 9; ++c) region.at(r, c) = 1;
    const imaging::ImageRGB out = imaging::poisson_blend(img, img, region);
    double worst = 0;
    for (std::size_t i = 0; i < img.data().size(); ++i) {
      worst = std::max(worst, static_cast<double>(std::abs(out.data()[i] - img.data()[i])));
    }
    ok = worst < 1e-4;
    return fmt::format("max abs error {:.3g}", worst);
  }));

  return out;
}

}  // namespace faceerase::cli
