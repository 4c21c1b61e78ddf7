#include <set>

#include "doctest.h"
#include "netchoice/error.hpp"
#include "netchoice/estimation.hpp"
#include "support.hpp"

using namespace netchoice;

namespace {

ModelSpec logit_spec() {
  ModelSpec s;
  s.kind = ModelKind::logit;
  return s;
}

ModelSpec small_skip() {
  ModelSpec s;
  s.fc_layers = 1;
  s.fc_width = 4;
  s.gcn_layers = 2;
  return s;
}

TrainConfig quick(std::uint64_t seed = 1) {
  TrainConfig c;
  c.seed = seed;
  c.epochs = 20;
  c.learning_rate = 0.05;
  c.batch_size = 16;
  return c;
}

}  // namespace

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 4; ++s)
    for (std::uint64_t a = 0; a < 4; ++a)
      for (std::uint64_t b = 0; b < 4; ++b) seen.insert(derive_seed(s, a, b));
  CHECK(seen.size() == 64);
}

TEST_CASE("weighted cross-entropy") {
  const std::vector<int> y{0, 1, 1, 0};
  CHECK(loss_weighted_xent(DenseMatrix(4, 1, 0.5), y, {}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const DenseMatrix perfect = DenseMatrix::from_rows({{0.0}, {1.0}, {1.0}, {0.0}});
  CHECK(loss_weighted_xent(perfect, y, {}, false) <= 1e-10);
  const DenseMatrix wrong = DenseMatrix::from_rows({{1.0}, {1.0}, {1.0}, {0.0}});
  CHECK(loss_weighted_xent(wrong, y, {}) == doctest::Approx(-std::log(1e-12) / 4));
  const DenseMatrix p = DenseMatrix::from_rows({{0.2}, {0.7}, {0.9}, {0.4}});
  const std::vector<double> w{2.0, 0.5};
  const double expected = -(2 * std::log(0.8) + 0.5 * std::log(0.7) + 0.5 * std::log(0.9) + 2 * std::log(0.6)) / 5.0;
  CHECK(loss_weighted_xent(p, y, w) == doctest::Approx(expected).epsilon(1e-14));
  const DenseMatrix pm = DenseMatrix::from_rows({{0.2, 0.5, 0.3}, {0.1, 0.1, 0.8}});
  CHECK(loss_weighted_xent(pm, std::vector<int>{1, 2}, {}) ==
        doctest::Approx(-(std::log(0.5) + std::log(0.8)) / 2).epsilon(1e-14));
  CHECK_THROWS_AS(loss_weighted_xent(p, std::vector<int>{0, 1}, {}), ShapeError);
  CHECK_THROWS_AS(loss_weighted_xent(DenseMatrix(0, 1), std::vector<int>{}, {}), ParameterError);
}

TEST_CASE("inverse-frequency class weights") {
  const auto w = default_class_weights(std::vector<int>{0, 0, 0, 1}, 2);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(1.5));
  const auto absent = default_class_weights(std::vector<int>{0, 2, 2}, 3);
  CHECK(absent[1] == 1.0);
  CHECK(absent[0] == doctest::Approx(2.0 * absent[2]));
  const std::vector<std::size_t> rows{0, 3};
  const auto sub = default_class_weights(std::vector<int>{0, 0, 0, 1}, 2, rows);
  CHECK(sub[0] == doctest::Approx(1.0));
}

TEST_CASE("weighted accuracy") {
  SUBCASE("hand-worked confusion matrix") {
    // Rows true class, columns predicted: [[5,1,0],[0,4,2],[1,0,7]].
    std::vector<int> y, pred;
    const int counts[3][3] = {{5, 1, 0}, {0, 4, 2}, {1, 0, 7}};
    for (int t = 0; t < 3; ++t)
      for (int p = 0; p < 3; ++p)
        for (int k = 0; k < counts[t][p]; ++k) {
          y.push_back(t);
          pred.push_back(p);
        }
    CHECK(weighted_accuracy(pred, y, 3) == doctest::Approx((5.0 / 6 + 4.0 / 5 + 7.0 / 9) / 3).epsilon(1e-15));
    CHECK(weighted_accuracy(pred, y, 3) == doctest::Approx(oracle::mean_precision(pred, y, 3)));
    CHECK(weighted_accuracy(pred, y, 3, true) == doctest::Approx(oracle::balanced_recall(pred, y, 3)));
  }
  SUBCASE("binary is balanced recall") {
    std::mt19937_64 rng(1);
    std::bernoulli_distribution coin(0.3);
    std::vector<int> y(200), pred(200);
    for (int i = 0; i < 200; ++i) {
      y[i] = coin(rng);
      pred[i] = coin(rng);
    }
    CHECK(weighted_accuracy(pred, y, 2) == doctest::Approx(oracle::balanced_recall(pred, y, 2)).epsilon(1e-14));
  }
  CHECK(weighted_accuracy(std::vector<int>{0, 1, 1}, std::vector<int>{0, 1, 1}, 2) == 1.0);
  CHECK(weighted_accuracy(std::vector<int>{1, 1, 1, 1}, std::vector<int>{0, 1, 0, 1}, 2) == 0.5);
  const auto one_class = score_accuracy(std::vector<int>{1, 0}, std::vector<int>{1, 1}, 2);
  CHECK(one_class.flagged);
  CHECK(one_class.value == 0.5);
  CHECK_FALSE(score_accuracy(std::vector<int>{1, 0}, std::vector<int>{1, 0}, 2).flagged);
  CHECK_THROWS_AS(weighted_accuracy(std::vector<int>{}, std::vector<int>{}, 2), ParameterError);
}

TEST_CASE("training configuration validation and JSON") {
  TrainConfig c;
  c.learning_rate = -1;
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = {};
  c.epochs = 0;
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = {};
  c.class_weights = {1.0, 0.0};
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = {};
  c.learning_rate = 0.0;
  CHECK_NOTHROW(validate(c));
  c.sgld.enabled = true;
  c.sgld.schedule = StepSchedule::polynomial;
  c.swa_cycle = 4;
  c.class_weights = {1.0, 2.0};
  CHECK(train_config_from_json(to_json(c)) == c);
  CHECK_THROWS_AS(train_config_from_json({{"lr", 0.1}}), ParameterError);
  CHECK_THROWS_AS(train_config_from_json({{"sgld", {{"schedule", "cosine"}}}}), ParameterError);
}

TEST_CASE("gradient descent") {
  const ChoiceDataset d = fixture::binary_data(60, 2, 1, 21);
  const auto m = make_model(small_skip(), d.dims());
  SUBCASE("zero learning rate leaves the weights alone") {
    TrainConfig c = quick();
    c.learning_rate = 0.0;
    const TrainResult r = train_sgd(*m, d, d.graph_ptr(), c);
    CHECK(r.weights.values == r.initial);
    CHECK(r.updates == 20 * 4);  // 60 rows in batches of 16: 16, 16, 16, 12
  }
  SUBCASE("a trailing single row joins the previous batch") {
    TrainConfig c = quick();
    c.batch_size = 59;
    CHECK(train_sgd(*m, d, d.graph_ptr(), c).updates == 20);
  }
  SUBCASE("runs are reproducible and the loss goes down") {
    const TrainResult a = train_sgd(*m, d, d.graph_ptr(), quick(3));
    const TrainResult b = train_sgd(*m, d, d.graph_ptr(), quick(3));
    CHECK(a.weights == b.weights);
    CHECK(a.epoch_loss == b.epoch_loss);
    CHECK(a.epoch_loss.back() < a.epoch_loss.front());
    CHECK(train_sgd(*m, d, d.graph_ptr(), quick(4)).weights != a.weights);
    CHECK(a.weights.batchnorm.ready);
  }
  SUBCASE("explicit start and row subsets") {
    const std::vector<double> start(m->layout().size(), 0.01);
    const std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    TrainConfig c = quick();
    c.learning_rate = 0.0;
    const TrainResult r = train_sgd(*m, d, d.graph_ptr(), c, rows, start);
    CHECK(r.weights.values == start);
    CHECK(r.updates == 20);
    CHECK_THROWS_AS(train_sgd(*m, d, d.graph_ptr(), c, {}, std::vector<double>{1.0}), ShapeError);
    const std::vector<std::size_t> bad{1000};
    CHECK_THROWS_AS(train_sgd(*m, d, d.graph_ptr(), c, bad), ParameterError);
  }
  SUBCASE("divergence is reported") {
    TrainConfig c = quick();
    c.learning_rate = 1e200;
    CHECK_THROWS_AS(train_sgd(*m, d, d.graph_ptr(), c), NumericError);
  }
  SUBCASE("full-batch logit descent reaches the penalised optimum") {
    const ChoiceDataset plain = fixture::binary_data(80, 2, 0, 22, false);
    const auto lm = make_model(logit_spec(), plain.dims());
    TrainConfig c;
    c.learning_rate = 2.0;
    c.momentum = true;
    c.epochs = 600;
    c.class_weights = {1.0, 1.0};
    c.weight_decay = 4.0;
    const TrainResult r = train_sgd(*lm, plain, nullptr, c);
    oracle::Mat x;
    for (std::size_t i = 0; i < 80; ++i) x.push_back({plain.x(i, 0), plain.x(i, 1), 1.0});
    // Mean NLL + lambda / (2N) |w|^2 has the optimum of the summed NLL + lambda / 2 |w|^2.
    const auto ref = oracle::newton_logit(x, plain.y, 4.0);
    const ParamLayout& l = lm->layout();
    CHECK(r.weights.values[l.block(l.index_of("beta")).offset] == doctest::Approx(ref.coef[0]).epsilon(1e-8));
    CHECK(r.weights.values[l.block(l.index_of("beta")).offset + 1] == doctest::Approx(ref.coef[1]).epsilon(1e-8));
    CHECK(r.weights.values[l.block(l.index_of("intercept")).offset] == doctest::Approx(ref.coef[2]).epsilon(1e-8));
  }
}

TEST_CASE("stochastic weight averaging") {
  const ChoiceDataset d = fixture::binary_data(40, 2, 0, 31);
  const auto m = make_model(small_skip(), d.dims());
  TrainConfig c = quick();
  SUBCASE("cycle longer than the run keeps the initial weights") {
    c.swa_cycle = 1000;
    const TrainResult r = train_swa(*m, d, d.graph_ptr(), c);
    CHECK(r.weights.values == r.initial);
    CHECK(r.swa_iterates.empty());
  }
  SUBCASE("zero learning rate averages to the initial weights") {
    c.swa_cycle = 2;
    c.learning_rate = 0.0;
    const TrainResult r = train_swa(*m, d, d.graph_ptr(), c);
    // The running mean (a m + a) / (m + 1) can differ from a in the last bit.
    for (std::size_t p = 0; p < r.initial.size(); ++p)
      CHECK(r.weights.values[p] == doctest::Approx(r.initial[p]).epsilon(1e-15));
  }
  SUBCASE("three iterates average to their mean") {
    c.epochs = 3;
    c.batch_size = 0;
    c.swa_cycle = 1;
    const TrainResult r = train_swa(*m, d, d.graph_ptr(), c);
    REQUIRE(r.swa_iterates.size() == 3);
    // Replay: plain SGD for 1, 2, 3 epochs gives the trajectory.
    for (std::size_t e = 1; e <= 3; ++e) {
      TrainConfig ce = c;
      ce.epochs = e;
      CHECK(train_sgd(*m, d, d.graph_ptr(), ce).weights.values == r.swa_iterates[e - 1]);
    }
    for (std::size_t p = 0; p < r.weights.values.size(); ++p) {
      const double mean = (r.swa_iterates[0][p] + r.swa_iterates[1][p] + r.swa_iterates[2][p]) / 3.0;
      CHECK(r.weights.values[p] == doctest::Approx(mean).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(train_swa(*m, d, d.graph_ptr(), quick()), ParameterError);
}

TEST_CASE("Langevin dynamics") {
  // Quadratic log-likelihood: each observation contributes -(w - m_i)^2 / 2.
  const std::vector<double> centres{0.5, 1.5, 2.0, -1.0};
  const LogLikGradient grad = [&](std::span<const double> w, std::span<const std::size_t> batch, std::vector<double>& g) {
    g.assign(1, 0.0);
    for (std::size_t i : batch) g[0] += centres[i] - w[0];
  };
  TrainConfig c;
  c.seed = 5;
  c.weight_decay = 0.5;
  c.sgld.steps = 100;
  c.sgld.thinning = 10;
  c.sgld.burn_in = 0.0;
  SUBCASE("noise off is the discretised gradient flow") {
    c.sgld.noise = false;
    c.sgld.step_size = 0.01;
    const PosteriorSamples s = sgld_run({3.0}, 4, grad, c);
    REQUIRE(s.samples.size() == 10);
    // w <- w + a/2 (-l w + sum (m_i - w)) = r w + a/2 sum m_i
    const double a = 0.01, r = 1.0 - a / 2 * (0.5 + 4.0), shift = a / 2 * 3.0;
    const double fixed = shift / (1.0 - r);
    for (std::size_t k = 0; k < s.samples.size(); ++k) {
      const double t = static_cast<double>(s.steps[k] + 1);
      CHECK(std::abs(s.samples[k][0] - (fixed + std::pow(r, t) * (3.0 - fixed))) < 1e-10);
    }
  }
  SUBCASE("zero step size never moves") {
    c.sgld.step_size = 0.0;
    const PosteriorSamples s = sgld_run({3.0}, 4, grad, c);
    for (const auto& w : s.samples) CHECK(w[0] == 3.0);
  }
  SUBCASE("polynomial schedule") {
    c.sgld.schedule = StepSchedule::polynomial;
    c.sgld.step_size = 0.1;
    c.sgld.decay_offset = 2.0;
    const PosteriorSamples s = sgld_run({0.0}, 4, grad, c);
    for (std::size_t k = 0; k < s.steps.size(); ++k)
      CHECK(s.step_sizes[k] ==
            doctest::Approx(0.1 * std::pow(2.0 + static_cast<double>(s.steps[k]), -kSgldDecayPower)));
  }
  SUBCASE("thinning and burn-in") {
    c.sgld.burn_in = 0.2;
    c.sgld.step_size = 0.01;
    c.sgld.thinning = 8;
    const PosteriorSamples s = sgld_run({0.0}, 4, grad, c);
    CHECK(s.samples.size() == 10);
    CHECK(s.steps.front() == 27);
    c.sgld.thinning = 7;
    CHECK_THROWS_AS(sgld_run({0.0}, 4, grad, c), ParameterError);
  }
  SUBCASE("reproducible and stationary at the right spread") {
    c.sgld.steps = 200000;
    c.sgld.thinning = 20;
    c.sgld.step_size = 0.01;
    const PosteriorSamples a = sgld_run({0.0}, 4, grad, c);
    CHECK(a.samples == sgld_run({0.0}, 4, grad, c).samples);
    double mean = 0.0, sq = 0.0;
    for (const auto& w : a.samples) mean += w[0];
    mean /= static_cast<double>(a.samples.size());
    for (const auto& w : a.samples) sq += (w[0] - mean) * (w[0] - mean);
    const double var = sq / static_cast<double>(a.samples.size());
    // Gaussian posterior: precision 4.5, mean 3 / 4.5.
    CHECK(mean == doctest::Approx(3.0 / 4.5).epsilon(0.03));
    CHECK(var == doctest::Approx(1.0 / 4.5).epsilon(0.05));
  }
  SUBCASE("divergence") {
    c.sgld.noise = false;
    c.sgld.step_size = 10.0;
    CHECK_THROWS_AS(sgld_run({1.0}, 4, grad, c), NumericError);
  }
  c.weight_decay = 0.0;
  CHECK_THROWS_AS(sgld_run({0.0}, 4, grad, c), ParameterError);
}

TEST_CASE("SGLD on a choice model records batch statistics per sample") {
  const ChoiceDataset d = fixture::binary_data(30, 2, 1, 41);
  const auto m = make_model(small_skip(), d.dims());
  TrainConfig c;
  c.seed = 3;
  c.sgld.steps = 50;
  c.sgld.thinning = 10;
  c.sgld.burn_in = 0.0;
  c.sgld.step_size = 1e-3;
  const PosteriorSamples s = sgld_sample(*m, d, d.graph_ptr(), c);
  REQUIRE(s.samples.size() == 5);
  for (std::size_t k = 0; k < 5; ++k)
    CHECK(s.batchnorm[k] == whole_sample_statistics(*m, s.samples[k], d.x, d.q, d.graph_ptr()));
}

TEST_CASE("fold assignment") {
  const auto f = fold_assignment(103, 5, 9);
  CHECK(f == fold_assignment(103, 5, 9));
  CHECK(f != fold_assignment(103, 5, 10));
  std::vector<std::size_t> sizes(5, 0);
  for (std::size_t a : f) ++sizes.at(a);
  for (std::size_t s : sizes) CHECK((s == 20 || s == 21));
  CHECK_THROWS_AS(fold_assignment(3, 5, 1), ParameterError);
  CHECK_THROWS_AS(fold_assignment(10, 1, 1), ParameterError);
}

TEST_CASE("cross-validation") {
  SUBCASE("an oracle feature scores perfectly") {
    ChoiceDataset d = fixture::binary_data(100, 1, 0, 51, false);
    for (std::size_t i = 0; i < 100; ++i) d.x(i, 0) = d.y[i] == 1 ? 3.0 : -3.0;
    TrainConfig c = quick();
    c.learning_rate = 0.5;
    const CvReport r = kfold_cv(logit_spec(), d, nullptr, c, 5);
    CHECK(r.mean == 1.0);
    CHECK(r.folds.size() == 5);
  }
  SUBCASE("uninformative features score about one half") {
    std::mt19937_64 rng(52);
    ChoiceDataset d = fixture::binary_data(1000, 2, 0, 52, false);
    for (std::size_t i = 0; i < 1000; ++i) d.y[i] = static_cast<int>(i % 2);
    std::shuffle(d.y.begin(), d.y.end(), rng);
    const CvReport r = kfold_cv(logit_spec(), d, nullptr, quick(), 5);
    CHECK(std::abs(r.mean - 0.5) < 0.05);
  }
  SUBCASE("threads do not change the report") {
    const ChoiceDataset d = fixture::binary_data(80, 2, 1, 53);
    const CvReport one = kfold_cv(small_skip(), d, d.graph_ptr(), quick(), 4, 1);
    const CvReport three = kfold_cv(small_skip(), d, d.graph_ptr(), quick(), 4, 3);
    CHECK(one.mean == three.mean);
    CHECK(one.assignment == three.assignment);
    for (std::size_t f = 0; f < 4; ++f) {
      CHECK(one.folds[f].accuracy == three.folds[f].accuracy);
      CHECK(one.folds[f].seed == three.folds[f].seed);
      CHECK(one.folds[f].train_size + one.folds[f].test_size == 80);
    }
  }
}

TEST_CASE("random grid search") {
  const ChoiceDataset d = fixture::binary_data(60, 2, 0, 61);
  SearchSpace space;
  space.fc_width = {2, 4, 8};
  space.learning_rate = {0.01, 0.1};
  CHECK(space.size() == 6);
  ModelSpec spec = small_skip();
  TrainConfig cfg = quick();
  space.apply(5, spec, cfg);
  CHECK(spec.fc_width == 8);
  CHECK(cfg.learning_rate == 0.1);
  CHECK(search_space_from_json(to_json(space)).fc_width == space.fc_width);

  SUBCASE("whole space when trials exceed it, reproducibly") {
    const SearchResult a = random_grid_search(small_skip(), space, 50, d, d.graph_ptr(), quick(), 3);
    CHECK(a.trials.size() == 6);
    std::set<std::size_t> points;
    for (const auto& t : a.trials) points.insert(t.point);
    CHECK(points.size() == 6);
    const SearchResult b = random_grid_search(small_skip(), space, 50, d, d.graph_ptr(), quick(), 3);
    for (std::size_t t = 0; t < 6; ++t) CHECK(a.trials[t].point == b.trials[t].point);
    CHECK(a.best == b.best);
    for (const auto& t : a.trials) CHECK(t.cv.mean <= a.trials[a.best].cv.mean);
  }
  SUBCASE("one-point space") {
    const SearchResult r = random_grid_search(small_skip(), SearchSpace{}, 3, d, d.graph_ptr(), quick(), 3);
    CHECK(r.trials.size() == 1);
    CHECK(r.trials[0].spec == small_skip());
  }
  SUBCASE("a dominant setting wins") {
    SearchSpace lr;
    lr.learning_rate = {0.0, 0.5};
    ChoiceDataset easy = fixture::binary_data(60, 1, 0, 62, false);
    for (std::size_t i = 0; i < 60; ++i) easy.x(i, 0) = easy.y[i] == 1 ? 1.0 : -1.0;
    const SearchResult r = random_grid_search(logit_spec(), lr, 2, easy, nullptr, quick(), 3);
    CHECK(r.trials[r.best].train.learning_rate == 0.5);
  }
}
