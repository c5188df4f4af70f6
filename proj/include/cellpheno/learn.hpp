#pragma once

#include "cellpheno/types.hpp"

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

namespace cellpheno::learn {

enum class ClassifierKind {
  LogisticRegression,
  RandomForest,
  AdaBoost,
  NaiveBayes,
  QDA,
  NeuralNet,
};
inline constexpr std::array<ClassifierKind, 6> kAllClassifiers = {
    ClassifierKind::LogisticRegression, ClassifierKind::RandomForest, ClassifierKind::AdaBoost,
    ClassifierKind::NaiveBayes,         ClassifierKind::QDA,          ClassifierKind::NeuralNet};
const char* to_string(ClassifierKind k);

// Hyperparameters (defaults are the pipeline's fixed choices).
struct LogRegParams {
  int iterations = 500;
  double step = 0.1;
  double l2 = 1e-3;
};
struct ForestParams {
  int trees = 50;
  int max_depth = 8;
  int min_samples_split = 2;
};
struct AdaBoostParams {
  int rounds = 50;
};
struct NaiveBayesParams {
  double variance_floor = 1e-9;
};
struct QdaParams {
  double ridge = 1e-3;  // gamma in gamma * trace/d * I
};
struct NeuralNetParams {
  int hidden = 16;
  int epochs = 200;
  int batch = 32;
  double step = 0.05;
  double init_range = 0.1;
};
struct LearnParams {
  LogRegParams logreg;
  ForestParams forest;
  AdaBoostParams adaboost;
  NaiveBayesParams nb;
  QdaParams qda;
  NeuralNetParams nn;
};

// --- model states --------------------------------------------------------

struct LogRegModel {
  Eigen::VectorXd w;
  double b = 0;
};

struct GaussianNbModel {
  // index 0/1 = class label
  std::array<Eigen::VectorXd, 2> mean, var;
  std::array<double, 2> log_prior{};
};

struct QdaModel {
  std::array<Eigen::VectorXd, 2> mean;
  std::array<Eigen::MatrixXd, 2> cov_inverse;
  std::array<double, 2> log_det{}, log_prior{};
};

struct Stump {
  int feature = 0;
  double threshold = 0;
  int polarity = 1;  // predicts polarity when x[feature] > threshold, else -polarity
};
struct AdaBoostModel {
  std::vector<Stump> stumps;
  std::vector<double> alphas;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1, right = -1;
  double p1 = 0;  // leaf posterior for class 1
};
struct DecisionTree {
  std::vector<TreeNode> nodes;
};
struct ForestModel {
  std::vector<DecisionTree> trees;
};

struct NeuralNetModel {
  Eigen::MatrixXd w1;  // hidden x d
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // 2 x hidden
  Eigen::VectorXd b2;
};

struct TrainedModel {
  ClassifierKind kind = ClassifierKind::LogisticRegression;
  std::uint64_t training_seed = 0;
  std::variant<LogRegModel, GaussianNbModel, QdaModel, AdaBoostModel, ForestModel, NeuralNetModel>
      state;
};

struct Prediction {
  int label = 0;
  double posterior = 0.5;  // P(y = 1 | x)
};

/// Trains one classifier on rows X (n x d) with labels y in {0,1}.
/// Deterministic given seed. Throws DegenerateLabels on single-class input.
TrainedModel train(ClassifierKind kind, const Eigen::MatrixXd& X, const std::vector<int>& y,
                   std::uint64_t seed, const LearnParams& hp = {});

Prediction predict(const TrainedModel& model, const Eigen::RowVectorXd& x);

// Neural-net internals, exposed so the loss gradient can be finite-difference
// checked against the analytic backprop.
double nn_loss(const NeuralNetModel& m, const Eigen::MatrixXd& X, const std::vector<int>& y);
NeuralNetModel nn_gradients(const NeuralNetModel& m, const Eigen::MatrixXd& X,
                            const std::vector<int>& y);

// --- cross-validated ensemble bits ---------------------------------------

struct OofResult {
  std::vector<std::array<std::uint8_t, 6>> bits;  // [instance][classifier], out-of-fold
  std::array<double, 6> accuracy{};               // per classifier, over all instances
};

/// Stratified seeded K-fold; every instance is scored by models trained on
/// the other folds. Throws StratificationError when a class has fewer
/// members than folds.
OofResult out_of_fold_bits(const Eigen::MatrixXd& X, const std::vector<int>& y, int folds,
                           std::uint64_t seed, const LearnParams& hp = {});

// --- iterative ensemble-vote pruning --------------------------------------

struct PruneConfig {
  std::vector<int> vote_thresholds = {1, 2, 3, 4, 5};
  bool final_unanimity = true;
  int folds = 5;
  std::uint64_t seed = 0;
  double early_stop_delta = -1.0;  // >=0 enables: stop when all accuracy deltas are below it

  void validate() const;
};

struct PruneIteration {
  int threshold = 0;
  std::size_t n_before = 0, n_after = 0;
  std::array<double, 6> accuracy{};
  std::vector<std::string> ids;                   // instances evaluated this iteration
  std::vector<std::array<std::uint8_t, 6>> bits;  // parallel to ids
};

struct EnsembleReport {
  std::vector<PruneIteration> iterations;
};

struct PruneResult {
  std::vector<std::string> retained_ids;  // in original row order
  EnsembleReport report;
};

struct PrunedToDegenerate : PipelineError {
  EnsembleReport report;
  PrunedToDegenerate(const std::string& msg, EnsembleReport r)
      : PipelineError(msg), report(std::move(r)) {}
};

/// Iteration t retrains all six classifiers on the surviving rows and keeps
/// instances whose out-of-fold correct-vote count reaches vote_thresholds[t];
/// an optional final pass keeps only unanimously correct instances.
PruneResult prune(const Eigen::MatrixXd& X, const std::vector<int>& y,
                  const std::vector<std::string>& ids, const PruneConfig& cfg,
                  const LearnParams& hp = {});

std::string prune_report_to_json(const EnsembleReport& report, const PruneConfig& cfg);

}  // namespace cellpheno::learn
