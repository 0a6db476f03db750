#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "autothrottle/errors.hpp"
#include "autothrottle/workload.hpp"

using namespace autothrottle;
using namespace autothrottle::workload;

namespace {

struct Summary {
  double min, avg, max;
};

Summary summarize(const Trace& t) {
  Summary s{1e300, 0.0, -1e300};
  for (const auto& p : t) {
    s.min = std::min(s.min, p.rps);
    s.max = std::max(s.max, p.rps);
    s.avg += p.rps;
  }
  s.avg /= static_cast<double>(t.size());
  return s;
}

sim::CompiledApp two_types() {
  sim::Application app;
  sim::ServiceSpec s;
  s.id = "svc";
  s.demand_ms_per_request = {{"A", 1.0}, {"B", 2.0}};
  app.services.push_back(s);
  app.request_types = {{"A", {{"svc"}}}, {"B", {{"svc"}}}};
  return sim::CompiledApp(app);
}

}  // namespace

TEST(GenTrace, ConstantPresetHitsRange) {
  const auto t = gen_trace(TraceKind::kConstant, 3600, 390, 500, 588, 1);
  ASSERT_EQ(t.size(), 3600u);
  const auto s = summarize(t);
  EXPECT_EQ(s.min, 390);
  EXPECT_EQ(s.max, 588);
  EXPECT_NEAR(s.avg, 500, 25);
}

TEST(GenTrace, EveryKindRespectsBoundsAndMean) {
  const struct {
    double lo, avg, hi;
  } presets[] = {{227, 394, 656}, {390, 500, 588}, {100, 300, 900}, {50, 60, 400}};
  for (auto kind : {TraceKind::kDiurnal, TraceKind::kConstant, TraceKind::kNoisy, TraceKind::kBursty})
    for (const auto& r : presets)
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto t = gen_trace(kind, 3600, r.lo, r.avg, r.hi, seed);
        const auto s = summarize(t);
        ASSERT_EQ(s.min, r.lo) << to_string(kind);
        ASSERT_EQ(s.max, r.hi) << to_string(kind);
        ASSERT_LE(std::abs(s.avg - r.avg), 0.05 * r.avg) << to_string(kind) << " seed " << seed;
        for (std::size_t k = 0; k < t.size(); ++k) ASSERT_EQ(t[k].t_s, static_cast<double>(k));
      }
}

TEST(GenTrace, DiurnalHasOnePeak) {
  const auto t = gen_trace(TraceKind::kDiurnal, 3600, 227, 394, 656, 1);
  const auto peak = std::max_element(t.begin(), t.end(), [](auto& a, auto& b) { return a.rps < b.rps; });
  EXPECT_NEAR(peak->t_s, 1800.0, 5.0);
  for (auto it = t.begin(); it + 1 < peak; ++it) EXPECT_LE(it->rps, (it + 1)->rps + 1e-9);
}

TEST(GenTrace, DegenerateCases) {
  EXPECT_TRUE(gen_trace(TraceKind::kDiurnal, 0, 1, 2, 3, 1).empty());
  for (const auto& p : gen_trace(TraceKind::kDiurnal, 100, 300, 300, 300, 1)) EXPECT_EQ(p.rps, 300);
  EXPECT_THROW(gen_trace(TraceKind::kNoisy, 10, 5, 4, 6, 1), ConfigError);
  EXPECT_THROW(gen_trace(TraceKind::kNoisy, 10, -1, 4, 6, 1), ConfigError);
  EXPECT_THROW(gen_trace(TraceKind::kNoisy, -5, 1, 4, 6, 1), ConfigError);
  EXPECT_THROW(parse_trace_kind("spiky"), ConfigError);
}

TEST(GenTrace, SameSeedSameTrace) {
  EXPECT_EQ(gen_trace(TraceKind::kBursty, 600, 10, 20, 90, 4), gen_trace(TraceKind::kBursty, 600, 10, 20, 90, 4));
  EXPECT_NE(gen_trace(TraceKind::kBursty, 600, 10, 20, 90, 4), gen_trace(TraceKind::kBursty, 600, 10, 20, 90, 5));
}

TEST(ParseTrace, TwoLines) {
  const auto t = parse_trace("0,100\n1,110");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[1].t_s, 1.0);
  EXPECT_EQ(t[1].rps, 110.0);
  EXPECT_EQ(parse_trace("0,100\n1,110\n").size(), 2u);
}

TEST(ParseTrace, ErrorsCarryLineNumbers) {
  auto line_of = [](std::string_view text) -> std::size_t {
    try {
      parse_trace(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 9999;
  };
  EXPECT_EQ(line_of("0,1\n2,3\n1,4\n"), 3u);
  EXPECT_EQ(line_of(""), 0u);
  EXPECT_EQ(line_of("0,1\nabc\n"), 2u);
  EXPECT_EQ(line_of("0,1\n1,2,3\n"), 2u);
  EXPECT_EQ(line_of("0,1\r\n1,2\r\n"), 1u);
  EXPECT_EQ(line_of("0,-5\n"), 1u);
  EXPECT_EQ(line_of("0,1\n\n2,3\n"), 2u);
  EXPECT_EQ(line_of("0, 1\n"), 1u);
  EXPECT_EQ(line_of("0,nan\n"), 1u);
}

TEST(ParseTrace, WriteParseRoundTripIsExact) {
  const auto t = gen_trace(TraceKind::kNoisy, 500, 10, 55.5, 120, 3);
  std::ostringstream os;
  write_trace(os, t);
  EXPECT_EQ(parse_trace(os.str()), t);
}

TEST(RpsAt, ZeroOrderHold) {
  const Trace t{{0, 10}, {2, 30}, {5, 50}};
  EXPECT_EQ(rps_at(t, 0.0), 10);
  EXPECT_EQ(rps_at(t, 1.9), 10);
  EXPECT_EQ(rps_at(t, 2.0), 30);
  EXPECT_EQ(rps_at(t, 99.0), 50);
  EXPECT_EQ(trace_duration_s(t), 6.0);
}

TEST(Arrivals, PoissonMean) {
  const auto app = two_types();
  ArrivalSampler s(app, {{"A", 0.5}, {"B", 0.5}});
  std::mt19937_64 rng(1);
  const int periods = 10000;
  long total = 0;
  for (int p = 0; p < periods; ++p) total += static_cast<long>(s.sample(100.0, 0.1, rng).size());
  const double mean = static_cast<double>(total) / periods;
  EXPECT_LE(std::abs(mean - 10.0), 3.0 * std::sqrt(10.0 / periods));
}

TEST(Arrivals, ZeroRateAndSingleType) {
  const auto app = two_types();
  ArrivalSampler only_a(app, {{"A", 1.0}});
  std::mt19937_64 rng(2);
  EXPECT_TRUE(only_a.sample(0.0, 0.1, rng).empty());
  for (int p = 0; p < 100; ++p)
    for (const auto& a : only_a.sample(200.0, 0.1, rng)) ASSERT_EQ(a.type, *app.type_index("A"));
}

TEST(Arrivals, CompositionValidation) {
  const auto app = two_types();
  EXPECT_THROW(ArrivalSampler(app, {{"A", 0.5}, {"B", 0.4}}), ConfigError);
  EXPECT_THROW(ArrivalSampler(app, {{"C", 1.0}}), ConfigError);
  EXPECT_THROW(ArrivalSampler(app, {}), ConfigError);
  EXPECT_THROW(ArrivalSampler(app, {{"A", 1.5}, {"B", -0.5}}), ConfigError);
  EXPECT_NO_THROW(ArrivalSampler(app, {{"A", 0.3}, {"B", 0.7}}));
}

TEST(Arrivals, SameSeedSameStream) {
  const auto app = two_types();
  ArrivalSampler s(app, {{"A", 0.3}, {"B", 0.7}});
  const Trace t{{0, 120}, {1, 80}};
  std::mt19937_64 r1(9), r2(9);
  for (std::uint64_t p = 0; p < 200; ++p) {
    const auto a = arrivals_for_period(t, s, p, 100.0, r1);
    const auto b = arrivals_for_period(t, s, p, 100.0, r2);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) ASSERT_EQ(a[k].type, b[k].type);
  }
}

TEST(Fluctuate, RangesMatchExamples) {
  Trace base;
  for (int t = 0; t < 3600; ++t) base.push_back({static_cast<double>(t), 300.0});
  EXPECT_EQ(fluctuate(base, 0.0, 60.0, 1), base);
  const auto mid = summarize(fluctuate(base, 150.0, 60.0, 1));
  EXPECT_GE(mid.min, 150.0);
  EXPECT_LE(mid.max, 450.0);
  const auto wide = summarize(fluctuate(base, 300.0, 60.0, 1));
  EXPECT_GE(wide.min, 1.0);
  EXPECT_LE(wide.max, 600.0);
  EXPECT_LT(wide.min, 60.0);
  EXPECT_GT(wide.max, 540.0);
  EXPECT_THROW(fluctuate(base, -1.0, 60.0, 1), std::invalid_argument);
}

TEST(Fluctuate, OneDrawPerWindow) {
  Trace base;
  for (int t = 0; t < 600; ++t) base.push_back({static_cast<double>(t), 300.0});
  const auto f = fluctuate(base, 100.0, 60.0, 3);
  for (std::size_t k = 0; k < f.size(); ++k) ASSERT_EQ(f[k].rps, f[k - k % 60].rps);
  EXPECT_NE(f[0].rps, f[60].rps);
}
