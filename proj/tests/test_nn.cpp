#include <gtest/gtest.h>

#include "ppo/nn.hpp"
#include "test_util.hpp"

namespace ppo {
namespace {

using testing::check_gradients;
using testing::max_abs;
using testing::random_matrix;

// Straightforward per-element evaluator kept independent of mlp_forward.
Matrix naive_forward(const Mlp& model, const Matrix& input) {
  Matrix a = input;
  for (const auto& layer : model.layers) {
    Matrix next(a.rows(), layer.weight.rows());
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index o = 0; o < layer.weight.rows(); ++o) {
        double z = layer.bias(o);
        for (Eigen::Index i = 0; i < layer.weight.cols(); ++i) z += layer.weight(o, i) * a(r, i);
        switch (layer.activation) {
          case Activation::relu: z = z > 0 ? z : 0; break;
          case Activation::sigmoid: z = 1.0 / (1.0 + std::exp(-z)); break;
          case Activation::affine: break;
        }
        next(r, o) = z;
      }
    }
    a = next;
  }
  return a;
}

TEST(MlpInit, DeterministicForSeed) {
  const Mlp a = mlp_init({4800, 2048}, {Activation::sigmoid}, 7);
  const Mlp b = mlp_init({4800, 2048}, {Activation::sigmoid}, 7);
  EXPECT_TRUE(a == b);
  const Mlp c = mlp_init({4800, 2048}, {Activation::sigmoid}, 8);
  EXPECT_FALSE(a == c);
  const double bound = std::sqrt(1.0 / 4800.0);
  EXPECT_LE(a.layers[0].weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(a.layers[0].bias.cwiseAbs().maxCoeff(), 0.0);
}

TEST(MlpInit, FullScaleLayerPlans) {
  const auto ppo3 = layer_plan(ModelKind::ppo3, 4800, 2048);
  EXPECT_EQ(ppo3.dims, (std::vector<std::size_t>{4800, 3200, 2432, 2048}));
  EXPECT_EQ(ppo3.activations,
            (std::vector<Activation>{Activation::relu, Activation::relu, Activation::sigmoid}));
  EXPECT_EQ(layer_plan(ModelKind::ppo2, 4800, 2048).dims, (std::vector<std::size_t>{4800, 2432, 2048}));
  EXPECT_EQ(layer_plan(ModelKind::ppo1, 4800, 2048).dims, (std::vector<std::size_t>{4800, 2048}));

  const auto dae1 = layer_plan(ModelKind::dae1, 4800, 2048);
  EXPECT_EQ(dae1.dims, (std::vector<std::size_t>{4800, 2048, 4800}));
  EXPECT_EQ(dae1.activations.back(), Activation::affine);
  EXPECT_EQ(layer_plan(ModelKind::dae3, 4800, 2048).dims,
            (std::vector<std::size_t>{4800, 3200, 2432, 2048, 2432, 3200, 4800}));

  const Mlp m = mlp_init(ppo3.dims, ppo3.activations, 1);
  ASSERT_EQ(m.layers.size(), 3u);
  EXPECT_EQ(m.layers[0].weight.rows(), 3200);
  EXPECT_EQ(m.layers[0].weight.cols(), 4800);
  EXPECT_EQ(m.layers[1].weight.rows(), 2432);
  EXPECT_EQ(m.layers[1].weight.cols(), 3200);
  EXPECT_EQ(m.layers[2].weight.rows(), 2048);
  EXPECT_EQ(m.layers[2].weight.cols(), 2432);
}

TEST(MlpInit, RejectsBadArguments) {
  EXPECT_THROW(mlp_init({4}, {}, 0), std::invalid_argument);
  EXPECT_THROW(mlp_init({4, 3}, {}, 0), std::invalid_argument);
  EXPECT_THROW(mlp_init({4, 0}, {Activation::relu}, 0), std::invalid_argument);
}

TEST(MlpForward, ZeroSigmoidHeadGivesHalf) {
  Mlp m = mlp_init({5, 3}, {Activation::sigmoid}, 0);
  m.layers[0].weight.setZero();
  const Matrix out = mlp_predict(m, random_matrix(4, 5, 1));
  EXPECT_EQ(max_abs(out.array() - 0.5), 0.0);
}

TEST(MlpForward, IdentityReluLayer) {
  Mlp m = mlp_init({4, 4}, {Activation::relu}, 0);
  m.layers[0].weight.setIdentity();
  const Matrix x = random_matrix(6, 4, 2);
  EXPECT_EQ(max_abs(mlp_predict(m, x) - x.cwiseMax(0.0)), 0.0);
}

TEST(MlpForward, MatchesNaiveEvaluator) {
  const auto plan = layer_plan(ModelKind::dae3, 20, 8);
  Mlp m = mlp_init(plan.dims, plan.activations, 3);
  for (auto& l : m.layers) l.bias = testing::random_vector(l.bias.size(), 9, -0.2, 0.2);
  const Matrix x = random_matrix(5, 20, 4);
  EXPECT_LT(max_abs(mlp_predict(m, x) - naive_forward(m, x)), 1e-12);

  const auto head = layer_plan(ModelKind::ppo3, 20, 8);
  const Mlp p = mlp_init(head.dims, head.activations, 5);
  const Matrix out = mlp_predict(p, x);
  EXPECT_LT(max_abs(out - naive_forward(p, x)), 1e-12);
  EXPECT_GT(out.minCoeff(), 0.0);
  EXPECT_LT(out.maxCoeff(), 1.0);
  EXPECT_THROW(mlp_predict(p, random_matrix(1, 19, 0)), std::invalid_argument);
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_GT(sigmoid(-800.0), -1e-300);
  EXPECT_TRUE(std::isfinite(sigmoid(-800.0)));
  EXPECT_EQ(sigmoid(800.0), 1.0);
}

// Desk-scale gradient oracle geometry: M = 32, D = 14.
class GradientOracle : public ::testing::TestWithParam<ModelKind> {
 protected:
  TrigBasis basis = TrigBasis::build(32, 6);
};

TEST_P(GradientOracle, MatchesCentralDifferences) {
  const ModelKind kind = GetParam();
  Mlp model = make_model(kind, 32, 14, 11);
  for (auto& l : model.layers) l.bias = testing::random_vector(l.bias.size(), 12, -0.3, 0.3);
  const Matrix clean = synthesize(basis, random_matrix(6, 14, 13));
  const Matrix noisy = clean + 0.3 * random_matrix(6, 32, 14);
  const double l2 = 1e-3;

  auto loss = [&](const Mlp& m) {
    return is_ppo(kind) ? ppo_loss_and_grad(basis, m, noisy, clean, l2).loss
                        : dae_loss_and_grad(m, noisy, clean, l2).loss;
  };
  const LossAndGrad lg = is_ppo(kind) ? ppo_loss_and_grad(basis, model, noisy, clean, l2)
                                      : dae_loss_and_grad(model, noisy, clean, l2);
  const auto result = check_gradients(model, lg.grads, loss, 1e-5);
  EXPECT_EQ(result.checked, model.parameter_count());
  EXPECT_LT(result.worst, 1e-4) << to_string(kind);
}

INSTANTIATE_TEST_SUITE_P(AllFamilies, GradientOracle,
                         ::testing::Values(ModelKind::ppo1, ModelKind::ppo2, ModelKind::ppo3, ModelKind::dae1,
                                           ModelKind::dae2, ModelKind::dae3),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(PpoLoss, SaturatedAllPassOnCleanIsZero) {
  const auto basis = TrigBasis::build(32, 6);
  Mlp m = mlp_init({32, 14}, {Activation::sigmoid}, 0);
  m.layers[0].weight.setZero();
  m.layers[0].bias.setConstant(800.0);  // sigmoid rounds to exactly 1
  const Matrix f = synthesize(basis, random_matrix(3, 14, 1));
  EXPECT_LT(ppo_loss_and_grad(basis, m, f, f, 0.0).loss, 1e-28);
}

TEST(PpoLoss, MaskGradientMatchesParsevalReduction) {
  // A bias-only sigmoid layer makes the mask a fixed vector m = sigmoid(b), so
  // dLoss/dm_k = dLoss/db_k / (m_k (1 - m_k)).
  const auto basis = TrigBasis::build(32, 6);
  Mlp m = mlp_init({32, 14}, {Activation::sigmoid}, 0);
  m.layers[0].weight.setZero();
  m.layers[0].bias = testing::random_vector(14, 2, -2.0, 2.0);
  const Matrix alpha = random_matrix(5, 14, 3);
  const Matrix beta = random_matrix(5, 14, 4);
  const Matrix noisy = synthesize(basis, alpha);
  const Matrix clean = synthesize(basis, beta);
  const LossAndGrad lg = ppo_loss_and_grad(basis, m, noisy, clean, 0.0);
  const double scale = 2.0 / (5.0 * 32.0);
  for (Eigen::Index k = 0; k < 14; ++k) {
    const double mk = sigmoid(m.layers[0].bias(k));
    double expected = 0.0;
    for (Eigen::Index r = 0; r < 5; ++r) expected += alpha(r, k) * (mk * alpha(r, k) - beta(r, k));
    expected *= scale;
    EXPECT_NEAR(lg.grads.layers[0].bias(k) / (mk * (1.0 - mk)), expected, 1e-8) << k;
  }
}

TEST(DaeLoss, ZeroModelBaselines) {
  Mlp m = make_model(ModelKind::dae1, 16, 6, 0);
  for (auto& l : m.layers) l.weight.setZero();
  const Matrix x = random_matrix(4, 16, 1);
  EXPECT_EQ(dae_loss_and_grad(m, x, Matrix::Zero(4, 16), 0.0).loss, 0.0);
  Matrix ones = Matrix::Ones(4, 16);
  ones.leftCols(8) *= -1.0;  // mean square 1
  EXPECT_DOUBLE_EQ(dae_loss_and_grad(m, x, ones, 0.0).loss, 1.0);
  EXPECT_THROW(dae_loss_and_grad(m, x, Matrix::Zero(3, 16), 0.0), std::invalid_argument);
}

TEST(L2, AddsTwiceLambdaWeightToWeightsOnly) {
  const auto basis = TrigBasis::build(32, 6);
  const Mlp m = make_model(ModelKind::ppo2, 32, 14, 3);
  const Matrix clean = synthesize(basis, random_matrix(4, 14, 5));
  const Matrix noisy = clean + 0.2 * random_matrix(4, 32, 6);
  const double l2 = 0.37;
  const auto g0 = ppo_loss_and_grad(basis, m, noisy, clean, 0.0);
  const auto g1 = ppo_loss_and_grad(basis, m, noisy, clean, l2);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    EXPECT_LT(max_abs(g1.grads.layers[i].weight - g0.grads.layers[i].weight - 2.0 * l2 * m.layers[i].weight), 1e-14);
    EXPECT_EQ(max_abs(g1.grads.layers[i].bias - g0.grads.layers[i].bias), 0.0);
  }
  EXPECT_THROW(ppo_loss_and_grad(basis, m, noisy, clean, -1.0), std::invalid_argument);
}

TEST(DescentStep, SmallStepNeverIncreasesLoss) {
  const auto basis = TrigBasis::build(32, 6);
  for (ModelKind kind : {ModelKind::ppo1, ModelKind::ppo3, ModelKind::dae2}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Mlp m = make_model(kind, 32, 14, seed);
      const Matrix clean = synthesize(basis, random_matrix(8, 14, seed + 10));
      const Matrix noisy = clean + 0.3 * random_matrix(8, 32, seed + 20);
      auto eval = [&](const Mlp& x) {
        return is_ppo(kind) ? ppo_loss_and_grad(basis, x, noisy, clean, 1e-4)
                            : dae_loss_and_grad(x, noisy, clean, 1e-4);
      };
      const auto lg = eval(m);
      double gnorm2 = 0.0;
      for (const auto& g : lg.grads.layers) gnorm2 += g.weight.squaredNorm() + g.bias.squaredNorm();
      const double lr = 1e-3 / std::max(1.0, std::sqrt(gnorm2));
      for (std::size_t i = 0; i < m.layers.size(); ++i) {
        m.layers[i].weight -= lr * lg.grads.layers[i].weight;
        m.layers[i].bias -= lr * lg.grads.layers[i].bias;
      }
      EXPECT_LE(eval(m).loss, lg.loss) << to_string(kind) << " seed " << seed;
    }
  }
}

TEST(ForwardPurity, RepeatedCallsAreBitIdentical) {
  const Mlp m = make_model(ModelKind::dae3, 24, 10, 4);
  const Matrix x = random_matrix(7, 24, 8);
  EXPECT_TRUE(mlp_predict(m, x) == mlp_predict(m, x));
}

TEST(ModelKind, ParseRoundTrip) {
  for (auto k : {ModelKind::ppo1, ModelKind::ppo2, ModelKind::ppo3, ModelKind::dae1, ModelKind::dae2, ModelKind::dae3})
    EXPECT_EQ(parse_model_kind(to_string(k)), k);
  EXPECT_FALSE(parse_model_kind("PPO4").has_value());
}

}  // namespace
}  // namespace ppo
