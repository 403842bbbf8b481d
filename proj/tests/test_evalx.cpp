#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "morpho/error.hpp"
#include "morpho/evalx.hpp"

using namespace morpho;
using namespace morpho::evalx;
using features::Feature;
using features::SamplePoint;

namespace {

constexpr auto RES = EnvironmentClass::RES;
constexpr auto ULR = EnvironmentClass::ULR;
constexpr auto UHR = EnvironmentClass::UHR;

SamplePoint sample(double x, double y, EnvironmentClass label, Feature fx = Feature::avg_height,
                   Feature fy = Feature::building_count) {
  SamplePoint s;
  s.location = {x, y};
  s.features.values[static_cast<std::size_t>(fx)] = x;
  s.features.values[static_cast<std::size_t>(fy)] = y;
  s.label = label;
  return s;
}

std::vector<SamplePoint> labelled(std::size_t n_res, std::size_t n_ulr, std::size_t n_uhr) {
  std::vector<SamplePoint> v;
  double k = 0.0;
  for (std::size_t i = 0; i < n_res; ++i) v.push_back(sample(k++, 0.0, RES));
  for (std::size_t i = 0; i < n_ulr; ++i) v.push_back(sample(k++, 0.0, ULR));
  for (std::size_t i = 0; i < n_uhr; ++i) v.push_back(sample(k++, 0.0, UHR));
  return v;
}

std::vector<double> keys(const std::vector<SamplePoint>& v) {
  std::vector<double> k;
  for (const auto& s : v) k.push_back(s.location.x);
  return k;
}

ConfusionMatrix reference_matrix() {
  ConfusionMatrix cm;
  cm.counts = {{{3901, 7, 0}, {5, 17893, 0}, {0, 0, 913}}};
  return cm;
}

}  // namespace

TEST_CASE("split sizes and disjointness") {
  const auto ten = labelled(10, 0, 0);
  const auto s = split(ten, 0.7, 1, false);
  CHECK(s.train.size() == 7);
  CHECK(s.test.size() == 3);

  const auto ab = labelled(10, 10, 0);
  const auto st = split(ab, 0.7, 9, true);
  CHECK(std::count_if(st.train.begin(), st.train.end(), [](auto& p) { return p.label == RES; }) == 7);
  CHECK(std::count_if(st.train.begin(), st.train.end(), [](auto& p) { return p.label == ULR; }) == 7);

  const auto mix = labelled(37, 113, 11);
  const auto sm = split(mix, 0.7, 3, true);
  auto all = keys(sm.train);
  const auto t = keys(sm.test);
  all.insert(all.end(), t.begin(), t.end());
  std::sort(all.begin(), all.end());
  CHECK(all == keys(mix));
  for (auto [c, n] : {std::pair{RES, 37.0}, std::pair{ULR, 113.0}, std::pair{UHR, 11.0}}) {
    const auto got = std::count_if(sm.train.begin(), sm.train.end(), [c = c](auto& p) { return p.label == c; });
    CHECK(std::abs(static_cast<double>(got) - 0.7 * n) <= 1.0);
  }
}

TEST_CASE("split is seeded") {
  const auto mix = labelled(30, 40, 20);
  CHECK(keys(split(mix, 0.7, 5).train) == keys(split(mix, 0.7, 5).train));
  CHECK(keys(split(mix, 0.7, 5).train) != keys(split(mix, 0.7, 6).train));
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(split(labelled(10, 0, 0), 0.7, 1, true), EvalError);
  CHECK_THROWS_AS(split({}, 0.7, 1, false), EvalError);
  CHECK_THROWS_AS(split(labelled(5, 5, 0), 1.0, 1, true), EvalError);
  auto unlabelled = labelled(5, 5, 0);
  unlabelled[3].label.reset();
  CHECK_THROWS_AS(split(unlabelled, 0.7, 1, true), EvalError);
}

TEST_CASE("confusion from label lists") {
  std::vector<EnvironmentClass> five(5, RES);
  auto cm = confusion(five, five);
  CHECK(cm.counts[0][0] == 5);
  CHECK(cm.total() == 5);

  const std::vector<EnvironmentClass> a{RES}, p{UHR};
  CHECK(confusion(a, p).counts[0][2] == 1);

  // Rebuild the reference matrix from a shuffled pair list.
  const auto want = reference_matrix();
  std::vector<EnvironmentClass> actual, predicted;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::uint64_t k = 0; k < want.counts[r][c]; ++k) {
        actual.push_back(kTrainable[r]);
        predicted.push_back(kTrainable[c]);
      }
  std::mt19937_64 rng(1);
  std::vector<std::size_t> order(actual.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<EnvironmentClass> sa, sp;
  for (auto i : order) {
    sa.push_back(actual[i]);
    sp.push_back(predicted[i]);
  }
  cm = confusion(sa, sp);
  CHECK(cm.counts == want.counts);
  CHECK(cm.row_sum(0) == 3908);
  CHECK(cm.column_sum(0) == 3906);
  CHECK(cm.total() == 22719);

  CHECK_THROWS_AS(confusion(five, p), EvalError);
  const std::vector<EnvironmentClass> empty;
  CHECK_THROWS_AS(confusion(empty, empty), EvalError);
  const std::vector<EnvironmentClass> open{EnvironmentClass::OPEN};
  CHECK_THROWS_AS(confusion(open, a), EvalError);
}

TEST_CASE("row sums count actual labels") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> cls(0, 2);
  std::vector<EnvironmentClass> a, p;
  std::array<std::uint64_t, 3> n{};
  for (int i = 0; i < 500; ++i) {
    a.push_back(kTrainable[static_cast<std::size_t>(cls(rng))]);
    p.push_back(kTrainable[static_cast<std::size_t>(cls(rng))]);
    ++n[index_of(a.back())];
  }
  const auto cm = confusion(a, p);
  for (std::size_t c = 0; c < 3; ++c) CHECK(cm.row_sum(c) == n[c]);
  CHECK(cm.total() == 500);
  const auto perfect = metrics(confusion(a, a));
  CHECK(perfect.accuracy == 1.0);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(perfect.precision[c] == 1.0);
    CHECK(perfect.recall[c] == 1.0);
  }
}

TEST_CASE("reference confusion matrix metrics") {
  const auto m = metrics(reference_matrix());
  auto r4 = [](double v) { return std::round(v * 1e4) / 1e4; };
  CHECK(r4(*m.precision[0]) == 0.9987);
  CHECK(r4(*m.recall[0]) == 0.9982);
  CHECK(r4(*m.precision[1]) == 0.9996);
  CHECK(r4(*m.recall[1]) == 0.9997);
  CHECK(*m.precision[2] == 1.0);
  CHECK(*m.recall[2] == 1.0);
  CHECK(r4(m.accuracy) == 0.9995);
  // Exact ratios.
  CHECK(*m.precision[0] == 3901.0 / 3906.0);
  CHECK(*m.recall[0] == 3901.0 / 3908.0);
  CHECK(*m.precision[1] == 17893.0 / 17900.0);
  CHECK(*m.recall[1] == 17893.0 / 17898.0);
  CHECK(m.accuracy == 22707.0 / 22719.0);

  const auto j = nlohmann::json::parse(metrics_json(reference_matrix(), m));
  CHECK(j["confusion"][1][1] == 17893);
  CHECK(j["precision"]["RES"].get<double>() == *m.precision[0]);
  const auto table = metrics_table(reference_matrix(), m);
  CHECK(table.find("0.9987") != std::string::npos);
  CHECK(table.find("accuracy 0.9995") != std::string::npos);
}

TEST_CASE("metrics edge cases") {
  ConfusionMatrix id;
  id.counts = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  const auto m = metrics(id);
  CHECK(m.accuracy == 1.0);
  for (std::size_t c = 0; c < 3; ++c) CHECK((m.precision[c] == 1.0 && m.recall[c] == 1.0));

  // Three pairs, everything predicted ULR.
  const std::vector<EnvironmentClass> a{RES, ULR, UHR}, p{ULR, ULR, ULR};
  const auto one = metrics(confusion(a, p));
  CHECK(one.recall[0] == 0.0);
  CHECK(one.recall[1] == 1.0);
  CHECK(one.recall[2] == 0.0);
  CHECK_FALSE(one.precision[0]);
  CHECK(one.precision[1] == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(one.precision[2]);
  CHECK(one.accuracy == doctest::Approx(1.0 / 3.0));
  const auto j = nlohmann::json::parse(metrics_json(confusion(a, p), one));
  CHECK(j["precision"]["RES"].is_null());

  CHECK_THROWS_AS(metrics(ConfusionMatrix{}), EvalError);
}

TEST_CASE("nearest-rank percentile") {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  CHECK(percentile_nearest_rank(v, 1.0) == 1.0);
  CHECK(percentile_nearest_rank(v, 99.0) == 99.0);
  CHECK(percentile_nearest_rank(v, 100.0) == 100.0);
  CHECK(percentile_nearest_rank(v, 50.0) == 50.0);
  CHECK(percentile_nearest_rank({3.0, 1.0, 2.0, 4.0, 5.0}, 30.0) == 2.0);
  CHECK(percentile_nearest_rank({7.0}, 1.0) == 7.0);
  CHECK_THROWS_AS(percentile_nearest_rank({}, 50.0), EvalError);
}

TEST_CASE("decision boundary errors") {
  forest::ForestConfig cfg;
  cfg.n_trees = 5;
  std::vector<SamplePoint> v;
  for (int i = 0; i < 20; ++i) v.push_back(sample(i, i % 3, i < 10 ? RES : UHR));
  CHECK_THROWS_AS(decision_boundary(v, Feature::avg_height, Feature::avg_height, cfg, nullptr, 10), EvalError);
  std::vector<SamplePoint> flat;
  for (int i = 0; i < 20; ++i) flat.push_back(sample(i, 4.0, i < 10 ? RES : UHR));
  CHECK_THROWS_AS(decision_boundary(flat, Feature::avg_height, Feature::building_count, cfg, nullptr, 10), EvalError);
}

TEST_CASE("decision boundary on separable data") {
  // Class depends only on x; threshold at 10 between the two clusters.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lo(2.0, 9.0), hi(11.0, 30.0), yd(0.0, 50.0);
  std::vector<SamplePoint> v;
  for (int i = 0; i < 150; ++i) v.push_back(sample(lo(rng), yd(rng), RES));
  for (int i = 0; i < 150; ++i) v.push_back(sample(hi(rng), yd(rng), UHR));
  forest::ForestConfig cfg;
  cfg.n_trees = 15;
  cfg.seed = 2;
  const std::size_t res = 60;
  const auto g = decision_boundary(v, Feature::avg_height, Feature::building_count, cfg, nullptr, res);
  CHECK(g.cell_class.size() == res * res);
  CHECK(g.x_range.first < g.x_range.second);

  // Hand 1-split tree oracle: the boundary lies somewhere in the gap (9, 11).
  const double cell_w = (g.x_range.second - g.x_range.first) / static_cast<double>(res);
  std::size_t disagreements = 0;
  for (std::size_t j = 0; j < res; ++j)
    for (std::size_t i = 0; i < res; ++i) {
      const double x = g.cell_x(i);
      const auto oracle = x <= 10.0 ? RES : UHR;
      if (g.at(i, j) != oracle) {
        ++disagreements;
        CHECK(std::abs(x - 10.0) <= 1.0 + cell_w);
      }
    }
  CHECK(disagreements <= 2 * res);

  // Overlay keeps only points inside the percentile box.
  for (const auto& p : g.point_overlay) {
    CHECK(p.x >= g.x_range.first);
    CHECK(p.x <= g.x_range.second);
    CHECK(p.y >= g.y_range.first);
    CHECK(p.y <= g.y_range.second);
    CHECK(p.predicted == (p.x < 10.0 ? RES : UHR));
  }
  CHECK(g.point_overlay.size() < v.size());
  CHECK(g.point_overlay.size() >= v.size() * 9 / 10);

  // Sample order does not change the cells.
  auto shuffled = v;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto g2 = decision_boundary(shuffled, Feature::avg_height, Feature::building_count, cfg, nullptr, res);
  CHECK(g2.cell_class == g.cell_class);

  const auto dir = std::filesystem::temp_directory_path() / "morpho_test_evalx";
  write_boundary_csv(dir / "b.csv", g);
  write_boundary_svg(dir / "b.svg", g);
  std::ifstream csv(dir / "b.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "cell_x,cell_y,class");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == res * res);
  std::stringstream svg;
  svg << std::ifstream(dir / "b.svg").rdbuf();
  CHECK(svg.str().rfind("<svg", 0) == 0);
  CHECK(svg.str().find("avg_height") != std::string::npos);
}
