#include "cellpheno/learn.hpp"

#include "cellpheno/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cellpheno::learn {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_two_classes(const std::vector<int>& y) {
  bool has0 = false, has1 = false;
  for (int v : y) {
    if (v == 0) has0 = true;
    else if (v == 1) has1 = true;
    else throw PipelineError("labels must be 0 or 1");
  }
  if (!has0 || !has1) throw DegenerateLabels("training data contains a single class");
}

// --- logistic regression ---------------------------------------------------

LogRegModel train_logreg(const Eigen::MatrixXd& X, const std::vector<int>& y,
                         const LogRegParams& p) {
  const Eigen::Index n = X.rows(), d = X.cols();
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) yv(i) = y[static_cast<std::size_t>(i)];
  LogRegModel m;
  m.w = Eigen::VectorXd::Zero(d);
  for (int it = 0; it < p.iterations; ++it) {
    Eigen::VectorXd z = X * m.w;
    z.array() += m.b;
    Eigen::VectorXd prob(n);
    for (Eigen::Index i = 0; i < n; ++i) prob(i) = sigmoid(z(i));
    const Eigen::VectorXd err = prob - yv;
    const Eigen::VectorXd grad_w = X.transpose() * err / static_cast<double>(n) + p.l2 * m.w;
    const double grad_b = err.mean();
    m.w -= p.step * grad_w;
    m.b -= p.step * grad_b;
  }
  return m;
}

// --- Gaussian naive Bayes ---------------------------------------------------

GaussianNbModel train_nb(const Eigen::MatrixXd& X, const std::vector<int>& y,
                         const NaiveBayesParams& p) {
  const Eigen::Index d = X.cols();
  GaussianNbModel m;
  for (int c = 0; c < 2; ++c) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) idx.push_back(static_cast<Eigen::Index>(i));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), var = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i : idx) mean += X.row(i).transpose();
    mean /= static_cast<double>(idx.size());
    for (Eigen::Index i : idx) {
      const Eigen::VectorXd dv = X.row(i).transpose() - mean;
      var += dv.cwiseProduct(dv);
    }
    var /= static_cast<double>(idx.size());
    m.mean[static_cast<std::size_t>(c)] = mean;
    m.var[static_cast<std::size_t>(c)] = var.cwiseMax(p.variance_floor);
    m.log_prior[static_cast<std::size_t>(c)] =
        std::log(static_cast<double>(idx.size()) / static_cast<double>(y.size()));
  }
  return m;
}

double nb_class_loglik(const GaussianNbModel& m, int c, const Eigen::RowVectorXd& x) {
  const auto& mean = m.mean[static_cast<std::size_t>(c)];
  const auto& var = m.var[static_cast<std::size_t>(c)];
  double ll = m.log_prior[static_cast<std::size_t>(c)];
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double dv = x(j) - mean(j);
    ll += -0.5 * std::log(2.0 * M_PI * var(j)) - 0.5 * dv * dv / var(j);
  }
  return ll;
}

// --- QDA --------------------------------------------------------------------

QdaModel train_qda(const Eigen::MatrixXd& X, const std::vector<int>& y, const QdaParams& p) {
  const Eigen::Index d = X.cols();
  QdaModel m;
  for (int c = 0; c < 2; ++c) {
    std::vector<Eigen::Index> idx;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == c) idx.push_back(static_cast<Eigen::Index>(i));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i : idx) mean += X.row(i).transpose();
    mean /= static_cast<double>(idx.size());
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i : idx) {
      const Eigen::VectorXd dv = X.row(i).transpose() - mean;
      cov += dv * dv.transpose();
    }
    cov /= static_cast<double>(idx.size());
    cov += (p.ridge * cov.trace() / static_cast<double>(d) + 1e-12) *
           Eigen::MatrixXd::Identity(d, d);
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw PipelineError("QDA covariance not positive definite");
    double log_det = 0;
    for (Eigen::Index j = 0; j < d; ++j) log_det += 2.0 * std::log(llt.matrixL()(j, j));
    const std::size_t ci = static_cast<std::size_t>(c);
    m.mean[ci] = mean;
    m.cov_inverse[ci] = llt.solve(Eigen::MatrixXd::Identity(d, d));
    m.log_det[ci] = log_det;
    m.log_prior[ci] =
        std::log(static_cast<double>(idx.size()) / static_cast<double>(y.size()));
  }
  return m;
}

double qda_discriminant(const QdaModel& m, int c, const Eigen::RowVectorXd& x) {
  const std::size_t ci = static_cast<std::size_t>(c);
  const Eigen::VectorXd dv = x.transpose() - m.mean[ci];
  return -0.5 * m.log_det[ci] - 0.5 * dv.dot(m.cov_inverse[ci] * dv) + m.log_prior[ci] -
         0.5 * static_cast<double>(x.size()) * std::log(2.0 * M_PI);
}

// --- decision stumps / AdaBoost ---------------------------------------------

// best stump under instance weights; deterministic scan order
Stump best_stump(const Eigen::MatrixXd& X, const std::vector<int>& y,
                 const Eigen::VectorXd& w, double* out_err,
                 const std::vector<std::vector<Eigen::Index>>& sorted_idx) {
  const Eigen::Index d = X.cols();
  Stump best;
  double best_err = std::numeric_limits<double>::infinity();
  const double total_pos = [&] {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] == 1) s += w(static_cast<Eigen::Index>(i));
    return s;
  }();
  const double total = w.sum();

  for (Eigen::Index f = 0; f < d; ++f) {
    const auto& order = sorted_idx[static_cast<std::size_t>(f)];
    // err(threshold t, polarity +1) = w(y=1, x<=t) + w(y=0, x>t)
    double pos_below = 0, neg_below = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Eigen::Index i = order[k];
      if (y[static_cast<std::size_t>(i)] == 1)
        pos_below += w(i);
      else
        neg_below += w(i);
      if (k + 1 < order.size() && X(order[k + 1], f) == X(i, f)) continue;
      const double thr = k + 1 < order.size()
                             ? 0.5 * (X(i, f) + X(order[k + 1], f))
                             : X(i, f) + 1.0;
      const double err_pos = pos_below + (total - total_pos - neg_below);
      const double err_neg = total - err_pos;
      if (err_pos < best_err) {
        best_err = err_pos;
        best = {static_cast<int>(f), thr, +1};
      }
      if (err_neg < best_err) {
        best_err = err_neg;
        best = {static_cast<int>(f), thr, -1};
      }
    }
  }
  *out_err = best_err / std::max(total, 1e-300);
  return best;
}

int stump_predict(const Stump& s, const Eigen::RowVectorXd& x) {
  const int raw = x(s.feature) > s.threshold ? 1 : -1;
  return raw * s.polarity > 0 ? 1 : 0;
}

AdaBoostModel train_adaboost(const Eigen::MatrixXd& X, const std::vector<int>& y,
                             const AdaBoostParams& p) {
  const Eigen::Index n = X.rows(), d = X.cols();
  std::vector<std::vector<Eigen::Index>> sorted_idx(static_cast<std::size_t>(d));
  for (Eigen::Index f = 0; f < d; ++f) {
    auto& order = sorted_idx[static_cast<std::size_t>(f)];
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return X(a, f) != X(b, f) ? X(a, f) < X(b, f) : a < b;
    });
  }

  AdaBoostModel m;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (int round = 0; round < p.rounds; ++round) {
    double err = 0;
    const Stump s = best_stump(X, y, w, &err, sorted_idx);
    err = std::clamp(err, 1e-10, 1.0 - 1e-10);
    const double alpha = 0.5 * std::log((1.0 - err) / err);
    m.stumps.push_back(s);
    m.alphas.push_back(alpha);
    double z = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int yi = y[static_cast<std::size_t>(i)] == 1 ? 1 : -1;
      const int hi = stump_predict(s, X.row(i)) == 1 ? 1 : -1;
      w(i) *= std::exp(-alpha * yi * hi);
      z += w(i);
    }
    w /= z;
  }
  return m;
}

double adaboost_margin(const AdaBoostModel& m, const Eigen::RowVectorXd& x) {
  double score = 0;
  for (std::size_t t = 0; t < m.stumps.size(); ++t)
    score += m.alphas[t] * (stump_predict(m.stumps[t], x) == 1 ? 1.0 : -1.0);
  return score;
}

// --- random forest -----------------------------------------------------------

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  const std::vector<int>& y;
  const ForestParams& params;
  Rng& rng;
  int mtry;
  DecisionTree tree;

  int build(std::vector<Eigen::Index>& idx, int depth) {
    const auto node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    std::size_t pos = 0;
    for (const Eigen::Index i : idx)
      if (y[static_cast<std::size_t>(i)] == 1) ++pos;
    const double p1 = static_cast<double>(pos) / static_cast<double>(idx.size());
    tree.nodes[static_cast<std::size_t>(node_id)].p1 = p1;
    if (depth >= params.max_depth || idx.size() < static_cast<std::size_t>(params.min_samples_split) ||
        pos == 0 || pos == idx.size())
      return node_id;

    // feature subsample for this node
    std::vector<int> feats(static_cast<std::size_t>(X.cols()));
    std::iota(feats.begin(), feats.end(), 0);
    rng.shuffle(feats);
    feats.resize(static_cast<std::size_t>(mtry));

    const double n = static_cast<double>(idx.size());
    double best_gain = 1e-12;
    int best_f = -1;
    double best_thr = 0;
    std::vector<Eigen::Index> order;
    const double parent_gini =
        1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1);
    for (const int f : feats) {
      order = idx;
      std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return X(a, f) != X(b, f) ? X(a, f) < X(b, f) : a < b;
      });
      double pos_l = 0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        if (y[static_cast<std::size_t>(order[k])] == 1) ++pos_l;
        if (X(order[k + 1], f) == X(order[k], f)) continue;
        const double nl = static_cast<double>(k + 1), nr = n - nl;
        const double pl = pos_l / nl, pr = (static_cast<double>(pos) - pos_l) / nr;
        const double gini =
            nl / n * (1.0 - pl * pl - (1.0 - pl) * (1.0 - pl)) +
            nr / n * (1.0 - pr * pr - (1.0 - pr) * (1.0 - pr));
        const double gain = parent_gini - gini;
        if (gain > best_gain) {
          best_gain = gain;
          best_f = f;
          best_thr = 0.5 * (X(order[k], f) + X(order[k + 1], f));
        }
      }
    }
    if (best_f < 0) return node_id;

    std::vector<Eigen::Index> left, right;
    for (const Eigen::Index i : idx)
      (X(i, best_f) <= best_thr ? left : right).push_back(i);
    if (left.empty() || right.empty()) return node_id;
    tree.nodes[static_cast<std::size_t>(node_id)].feature = best_f;
    tree.nodes[static_cast<std::size_t>(node_id)].threshold = best_thr;
    const int l = build(left, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_id)].left = l;
    const int r = build(right, depth + 1);
    tree.nodes[static_cast<std::size_t>(node_id)].right = r;
    return node_id;
  }
};

ForestModel train_forest(const Eigen::MatrixXd& X, const std::vector<int>& y,
                         const ForestParams& p, std::uint64_t seed) {
  const Eigen::Index n = X.rows();
  const int mtry = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(X.cols()))));
  ForestModel m;
  for (int t = 0; t < p.trees; ++t) {
    Rng rng(derive_seed(seed, 0xF0BE57ULL, static_cast<std::uint64_t>(t)));
    std::vector<Eigen::Index> sample(static_cast<std::size_t>(n));
    for (auto& s : sample) s = static_cast<Eigen::Index>(rng.uniform_int(n));
    TreeBuilder builder{X, y, p, rng, mtry, {}};
    builder.build(sample, 0);
    m.trees.push_back(std::move(builder.tree));
  }
  return m;
}

double tree_p1(const DecisionTree& t, const Eigen::RowVectorXd& x) {
  int node = 0;
  while (t.nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const auto& nd = t.nodes[static_cast<std::size_t>(node)];
    node = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
  }
  return t.nodes[static_cast<std::size_t>(node)].p1;
}

// --- neural net ---------------------------------------------------------------

NeuralNetModel nn_init(Eigen::Index d, const NeuralNetParams& p, Rng& rng) {
  NeuralNetModel m;
  m.w1.resize(p.hidden, d);
  m.b1.resize(p.hidden);
  m.w2.resize(2, p.hidden);
  m.b2.resize(2);
  for (Eigen::Index i = 0; i < m.w1.size(); ++i)
    m.w1.data()[i] = rng.uniform(-p.init_range, p.init_range);
  for (Eigen::Index i = 0; i < m.b1.size(); ++i)
    m.b1(i) = rng.uniform(-p.init_range, p.init_range);
  for (Eigen::Index i = 0; i < m.w2.size(); ++i)
    m.w2.data()[i] = rng.uniform(-p.init_range, p.init_range);
  for (Eigen::Index i = 0; i < m.b2.size(); ++i)
    m.b2(i) = rng.uniform(-p.init_range, p.init_range);
  return m;
}

Eigen::Vector2d nn_softmax_logits(const NeuralNetModel& m, const Eigen::RowVectorXd& x) {
  const Eigen::VectorXd h = (m.w1 * x.transpose() + m.b1).array().tanh();
  return m.w2 * h + m.b2;
}

Eigen::Vector2d softmax(const Eigen::Vector2d& z) {
  const double mx = z.maxCoeff();
  const Eigen::Vector2d e = (z.array() - mx).exp().matrix();
  return e / e.sum();
}

NeuralNetModel train_nn(const Eigen::MatrixXd& X, const std::vector<int>& y,
                        const NeuralNetParams& p, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x22EFULL));
  NeuralNetModel m = nn_init(X.cols(), p, rng);
  const Eigen::Index n = X.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < p.epochs; ++epoch) {
    rng.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += p.batch) {
      const Eigen::Index stop = std::min<Eigen::Index>(start + p.batch, n);
      Eigen::MatrixXd xb(stop - start, X.cols());
      std::vector<int> yb(static_cast<std::size_t>(stop - start));
      for (Eigen::Index k = start; k < stop; ++k) {
        xb.row(k - start) = X.row(order[static_cast<std::size_t>(k)]);
        yb[static_cast<std::size_t>(k - start)] =
            y[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
      }
      const NeuralNetModel g = nn_gradients(m, xb, yb);
      m.w1 -= p.step * g.w1;
      m.b1 -= p.step * g.b1;
      m.w2 -= p.step * g.w2;
      m.b2 -= p.step * g.b2;
    }
  }
  return m;
}

}  // namespace

double nn_loss(const NeuralNetModel& m, const Eigen::MatrixXd& X, const std::vector<int>& y) {
  double loss = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::Vector2d prob = softmax(nn_softmax_logits(m, X.row(i)));
    loss -= std::log(std::max(prob(y[static_cast<std::size_t>(i)]), 1e-300));
  }
  return loss / static_cast<double>(X.rows());
}

NeuralNetModel nn_gradients(const NeuralNetModel& m, const Eigen::MatrixXd& X,
                            const std::vector<int>& y) {
  NeuralNetModel g;
  g.w1 = Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols());
  g.b1 = Eigen::VectorXd::Zero(m.b1.size());
  g.w2 = Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols());
  g.b2 = Eigen::VectorXd::Zero(m.b2.size());
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Eigen::VectorXd a = m.w1 * X.row(i).transpose() + m.b1;
    const Eigen::VectorXd h = a.array().tanh();
    const Eigen::Vector2d z = m.w2 * h + m.b2;
    Eigen::Vector2d delta = softmax(z);
    delta(y[static_cast<std::size_t>(i)]) -= 1.0;
    g.w2 += delta * h.transpose() / n;
    g.b2 += delta / n;
    const Eigen::VectorXd dh =
        (m.w2.transpose() * delta).cwiseProduct((1.0 - h.array().square()).matrix());
    g.w1 += dh * X.row(i) / n;
    g.b1 += dh / n;
  }
  return g;
}

const char* to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::LogisticRegression: return "logistic_regression";
    case ClassifierKind::RandomForest: return "random_forest";
    case ClassifierKind::AdaBoost: return "adaboost";
    case ClassifierKind::NaiveBayes: return "naive_bayes";
    case ClassifierKind::QDA: return "qda";
    case ClassifierKind::NeuralNet: return "neural_net";
  }
  return "?";
}

TrainedModel train(ClassifierKind kind, const Eigen::MatrixXd& X, const std::vector<int>& y,
                   std::uint64_t seed, const LearnParams& hp) {
  if (X.rows() != static_cast<Eigen::Index>(y.size()))
    throw PipelineError("train: X/y size mismatch");
  check_two_classes(y);
  TrainedModel m;
  m.kind = kind;
  m.training_seed = seed;
  switch (kind) {
    case ClassifierKind::LogisticRegression: m.state = train_logreg(X, y, hp.logreg); break;
    case ClassifierKind::NaiveBayes: m.state = train_nb(X, y, hp.nb); break;
    case ClassifierKind::QDA: m.state = train_qda(X, y, hp.qda); break;
    case ClassifierKind::AdaBoost: m.state = train_adaboost(X, y, hp.adaboost); break;
    case ClassifierKind::RandomForest: m.state = train_forest(X, y, hp.forest, seed); break;
    case ClassifierKind::NeuralNet: m.state = train_nn(X, y, hp.nn, seed); break;
  }
  return m;
}

Prediction predict(const TrainedModel& model, const Eigen::RowVectorXd& x) {
  double p1 = 0.5;
  switch (model.kind) {
    case ClassifierKind::LogisticRegression: {
      const auto& m = std::get<LogRegModel>(model.state);
      p1 = sigmoid(x * m.w + m.b);
      break;
    }
    case ClassifierKind::NaiveBayes: {
      const auto& m = std::get<GaussianNbModel>(model.state);
      p1 = sigmoid(nb_class_loglik(m, 1, x) - nb_class_loglik(m, 0, x));
      break;
    }
    case ClassifierKind::QDA: {
      const auto& m = std::get<QdaModel>(model.state);
      p1 = sigmoid(qda_discriminant(m, 1, x) - qda_discriminant(m, 0, x));
      break;
    }
    case ClassifierKind::AdaBoost: {
      const auto& m = std::get<AdaBoostModel>(model.state);
      p1 = sigmoid(2.0 * adaboost_margin(m, x));
      break;
    }
    case ClassifierKind::RandomForest: {
      const auto& m = std::get<ForestModel>(model.state);
      double votes = 0;
      for (const auto& t : m.trees) votes += tree_p1(t, x) >= 0.5 ? 1.0 : 0.0;
      p1 = votes / static_cast<double>(m.trees.size());
      break;
    }
    case ClassifierKind::NeuralNet: {
      const auto& m = std::get<NeuralNetModel>(model.state);
      p1 = softmax(nn_softmax_logits(m, x))(1);
      break;
    }
  }
  return {p1 >= 0.5 ? 1 : 0, p1};
}

OofResult out_of_fold_bits(const Eigen::MatrixXd& X, const std::vector<int>& y, int folds,
                           std::uint64_t seed, const LearnParams& hp) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (folds < 2) throw PipelineError("out_of_fold_bits: folds must be >= 2");
  if (n < folds) throw StratificationError("fewer instances than folds");
  check_two_classes(y);

  // stratified fold assignment: shuffle within class, deal round-robin
  std::vector<int> fold_of(static_cast<std::size_t>(n), -1);
  for (int c = 0; c < 2; ++c) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i)
      if (y[static_cast<std::size_t>(i)] == c) idx.push_back(i);
    if (static_cast<int>(idx.size()) < folds)
      throw StratificationError(std::string("class ") + std::to_string(c) +
                                " has fewer members than folds");
    Rng rng(derive_seed(seed, 0x57A7ULL, static_cast<std::uint64_t>(c)));
    rng.shuffle(idx);
    for (std::size_t k = 0; k < idx.size(); ++k)
      fold_of[static_cast<std::size_t>(idx[k])] = static_cast<int>(k % static_cast<std::size_t>(folds));
  }

  OofResult res;
  res.bits.assign(static_cast<std::size_t>(n), {});
  std::array<std::int64_t, 6> correct{};
  for (int f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> train_idx, test_idx;
    for (Eigen::Index i = 0; i < n; ++i)
      (fold_of[static_cast<std::size_t>(i)] == f ? test_idx : train_idx).push_back(i);
    Eigen::MatrixXd xt(static_cast<Eigen::Index>(train_idx.size()), X.cols());
    std::vector<int> yt(train_idx.size());
    for (std::size_t k = 0; k < train_idx.size(); ++k) {
      xt.row(static_cast<Eigen::Index>(k)) = X.row(train_idx[k]);
      yt[k] = y[static_cast<std::size_t>(train_idx[k])];
    }
    for (std::size_t ci = 0; ci < kAllClassifiers.size(); ++ci) {
      const TrainedModel model =
          train(kAllClassifiers[ci], xt, yt,
                derive_seed(seed, static_cast<std::uint64_t>(f), static_cast<std::uint64_t>(ci)),
                hp);
      for (const Eigen::Index i : test_idx) {
        const Prediction pred = predict(model, X.row(i));
        const bool ok = pred.label == y[static_cast<std::size_t>(i)];
        res.bits[static_cast<std::size_t>(i)][ci] = ok ? 1 : 0;
        if (ok) ++correct[ci];
      }
    }
  }
  for (std::size_t ci = 0; ci < 6; ++ci)
    res.accuracy[ci] = static_cast<double>(correct[ci]) / static_cast<double>(n);
  return res;
}

void PruneConfig::validate() const {
  if (folds < 2) throw ConfigError("learn.folds must be >= 2");
  if (vote_thresholds.empty()) throw ConfigError("learn.vote_thresholds must not be empty");
  int prev = 0;
  for (const int t : vote_thresholds) {
    if (t <= prev || t > 6)
      throw ConfigError("learn.vote_thresholds must be strictly increasing and <= 6");
    prev = t;
  }
}

PruneResult prune(const Eigen::MatrixXd& X, const std::vector<int>& y,
                  const std::vector<std::string>& ids, const PruneConfig& cfg,
                  const LearnParams& hp) {
  cfg.validate();
  if (X.rows() != static_cast<Eigen::Index>(y.size()) || y.size() != ids.size())
    throw PipelineError("prune: X/y/ids size mismatch");
  check_two_classes(y);

  std::vector<int> thresholds = cfg.vote_thresholds;
  if (cfg.final_unanimity) thresholds.push_back(6);

  std::vector<Eigen::Index> keep(static_cast<std::size_t>(X.rows()));
  std::iota(keep.begin(), keep.end(), 0);
  EnsembleReport report;
  std::array<double, 6> prev_acc{};

  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    Eigen::MatrixXd xc(static_cast<Eigen::Index>(keep.size()), X.cols());
    std::vector<int> yc(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      xc.row(static_cast<Eigen::Index>(k)) = X.row(keep[k]);
      yc[k] = y[static_cast<std::size_t>(keep[k])];
    }
    OofResult oof;
    try {
      oof = out_of_fold_bits(xc, yc, cfg.folds, derive_seed(cfg.seed, 0x9147ULL, t), hp);
    } catch (const DegenerateLabels&) {
      throw PrunedToDegenerate("pruning removed one class entirely", std::move(report));
    } catch (const StratificationError&) {
      throw PrunedToDegenerate("retained set too small to stratify", std::move(report));
    }

    PruneIteration iter;
    iter.threshold = thresholds[t];
    iter.n_before = keep.size();
    iter.accuracy = oof.accuracy;
    iter.ids.reserve(keep.size());
    for (const Eigen::Index i : keep) iter.ids.push_back(ids[static_cast<std::size_t>(i)]);
    iter.bits = oof.bits;

    std::vector<Eigen::Index> next;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      int votes = 0;
      for (const std::uint8_t b : oof.bits[k]) votes += b;
      if (votes >= thresholds[t]) next.push_back(keep[k]);
    }
    iter.n_after = next.size();
    report.iterations.push_back(std::move(iter));

    bool has0 = false, has1 = false;
    for (const Eigen::Index i : next) {
      (y[static_cast<std::size_t>(i)] == 1 ? has1 : has0) = true;
    }
    if (next.empty() || !has0 || !has1)
      throw PrunedToDegenerate("pruning removed one class entirely", std::move(report));
    keep = std::move(next);

    if (cfg.early_stop_delta >= 0 && t > 0) {
      bool saturated = true;
      for (std::size_t ci = 0; ci < 6; ++ci)
        if (std::abs(oof.accuracy[ci] - prev_acc[ci]) >= cfg.early_stop_delta) saturated = false;
      if (saturated) break;
    }
    prev_acc = oof.accuracy;
  }

  PruneResult result;
  result.report = std::move(report);
  result.retained_ids.reserve(keep.size());
  for (const Eigen::Index i : keep) result.retained_ids.push_back(ids[static_cast<std::size_t>(i)]);
  return result;
}

std::string prune_report_to_json(const EnsembleReport& report, const PruneConfig& cfg) {
  nlohmann::json j;
  j["folds"] = cfg.folds;
  j["vote_thresholds"] = cfg.vote_thresholds;
  j["final_unanimity"] = cfg.final_unanimity;
  j["iterations"] = nlohmann::json::array();
  for (const auto& it : report.iterations) {
    nlohmann::json ji;
    ji["threshold"] = it.threshold;
    ji["n_before"] = it.n_before;
    ji["n_after"] = it.n_after;
    nlohmann::json acc;
    for (std::size_t ci = 0; ci < kAllClassifiers.size(); ++ci)
      acc[to_string(kAllClassifiers[ci])] = it.accuracy[ci];
    ji["accuracy"] = acc;
    j["iterations"].push_back(ji);
  }
  return j.dump(2) + "\n";
}

}  // namespace cellpheno::learn
