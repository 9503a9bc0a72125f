// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "blockpulse/classify.hpp"
#include "blockpulse/simulate.hpp"
#include "support.hpp"

using namespace blockpulse;
using blockpulse::testing::kJan1;  // a Wednesday

namespace {

BlockProfile lab() {
  BlockProfile p;
  p.block = Block24{0xC00002};
  p.size = 24;
  p.baseline = 10;
  p.amplitude = 8;
  return p;
}

std::vector<ObservationRecord> flatten(const std::vector<ObserverStream>& streams) {
  std::vector<ObservationRecord> all;
  for (const auto& s : streams) all.insert(all.end(), s.records.begin(), s.records.end());
  std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return merge_key(a) < merge_key(b); });
  return all;
}

}  // namespace

TEST(Weekday, MondayIsZero) {
  EXPECT_EQ(weekday(utc_day(kJan1)), 2);      // Wednesday
  EXPECT_EQ(weekday(utc_day(1578268800)), 0);  // 2020-01-06
  EXPECT_EQ(weekday(0), 3);                    // 1970-01-01, Thursday
}

TEST(GenTruth, FlatProfileIsConstant) {
  BlockProfile p = lab();
  p.amplitude = 0;
  const auto t = gen_truth(p, kJan1, 7, 5);
  ASSERT_EQ(t.rounds(), static_cast<std::size_t>(7 * 86400 / 660));
  for (int c : t.counts) EXPECT_EQ(c, 10);
  for (std::size_t r = 0; r < t.rounds(); ++r)
    for (int i = 0; i < p.size; ++i) EXPECT_EQ(t.up(r, i), i < 10);
}

TEST(GenTruth, LabShapeWeekdayBump) {
  const auto p = lab();
  const auto t = gen_truth(p, kJan1, 14, 5);
  int bumped = 0;
  for (std::size_t r = 0; r < t.rounds(); ++r) {
    const auto ts = t.round_time(r);
    const auto day = utc_day(ts);
    const double hour = double(ts - day * kDaySeconds) / 3600;
    const bool work = weekday(day) < 5 && hour >= 9 && hour < 17;
    EXPECT_EQ(t.counts[r], work ? 18 : 10) << r;
    bumped += work;
  }
  EXPECT_GT(bumped, 0);
}

TEST(GenTruth, ChangeTakesEffectOnItsDay) {
  BlockProfile p = lab();
  p.change = ProfileChange{8, 7, 0};
  const auto t = gen_truth(p, kJan1, 14, 5);
  for (std::size_t r = 0; r < t.rounds(); ++r) {
    if (t.round_time(r) >= kJan1 + 8 * kDaySeconds) {
      EXPECT_EQ(t.counts[r], 7);
    }
  }
}

TEST(GenTruth, DeterministicInSeed) {
  BlockProfile p = lab();
  p.noise = 0.05;
  const auto a = gen_truth(p, kJan1, 7, 11), b = gen_truth(p, kJan1, 7, 11), c = gen_truth(p, kJan1, 7, 12);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.counts, b.counts);
  EXPECT_NE(a.states, c.states);
}

TEST(GenTruth, RejectsBadInput) {
  EXPECT_THROW(gen_truth(lab(), kJan1, 6, 1), std::invalid_argument);
  BlockProfile p = lab();
  p.amplitude = 20;
  EXPECT_THROW(gen_truth(p, kJan1, 7, 1), std::invalid_argument);
  p = lab();
  p.noise = 1.5;
  EXPECT_THROW(gen_truth(p, kJan1, 7, 1), std::invalid_argument);
  p = lab();
  p.change = ProfileChange{3, 20, 10};
  EXPECT_THROW(gen_truth(p, kJan1, 7, 1), std::invalid_argument);
}

TEST(GenProbing, SparseBlockCoveredInCeilRounds) {
  BlockProfile p;
  p.block = Block24{0x0A0000};
  p.size = 256;
  const auto truth = gen_truth(p, kJan1, 7, 1);
  const auto list = p.ever_active();
  const auto streams = gen_probing(truth, list, ProbePolicy{}, 1, 1);
  ASSERT_EQ(streams.size(), 1u);
  EXPECT_EQ(streams[0].records.size(), truth.rounds() * 15);
  for (const auto& r : streams[0].records) EXPECT_FALSE(r.response);
  const auto scan = full_scan_time(list, streams[0].records, {}, truth.start);
  ASSERT_TRUE(scan.complete);
  EXPECT_EQ(scan.rounds, (256 + 14) / 15);
}

TEST(GenProbing, DenseBlockOneProbePerRound) {
  BlockProfile p;
  p.block = Block24{0x0A0000};
  p.size = 256;
  p.baseline = 256;
  const auto truth = gen_truth(p, kJan1, 7, 1);
  const auto list = p.ever_active();
  const auto streams = gen_probing(truth, list, ProbePolicy{}, 1, 1);
  EXPECT_EQ(streams[0].records.size(), truth.rounds());
  const auto scan = full_scan_time(list, streams[0].records, {}, truth.start);
  ASSERT_TRUE(scan.complete);
  EXPECT_EQ(scan.rounds, 256);

  ProbePolicy exhaustive;
  exhaustive.stop_on_first_positive = false;
  const auto all = gen_probing(truth, list, exhaustive, 1, 1);
  EXPECT_EQ(all[0].records.size(), truth.rounds() * 15);
}

TEST(GenProbing, WalkContinuesAcrossRounds) {
  BlockProfile p;
  p.block = Block24{0x0A0000};
  p.size = 40;
  const auto truth = gen_truth(p, kJan1, 7, 1);
  ProbePolicy pol;
  pol.budget = 7;
  const auto s = gen_probing(truth, p.ever_active(), pol, 1, 3)[0];
  for (std::size_t i = 0; i < 100; ++i) {
    EXPECT_EQ(s.records[i].offset, i % 40);
    const auto round = floor_div(s.records[i].timestamp - kJan1, kRoundSeconds);
    EXPECT_EQ(round, static_cast<std::int64_t>(i / 7));
  }
}

TEST(GenProbing, ObserversAreOutOfPhase) {
  BlockProfile p = lab();
  const auto truth = gen_truth(p, kJan1, 7, 1);
  const auto streams = gen_probing(truth, p.ever_active(), ProbePolicy{}, 5, 1);
  ASSERT_EQ(streams.size(), 5u);
  std::set<std::string> ids;
  std::set<std::int64_t> first_times;
  for (const auto& s : streams) {
    ids.insert(s.observer);
    first_times.insert(s.records.front().timestamp);
    EXPECT_TRUE(std::is_sorted(s.records.begin(), s.records.end(),
                               [](auto& a, auto& b) { return a.timestamp < b.timestamp; }));
  }
  EXPECT_EQ(ids, (std::set<std::string>{"e", "g", "j", "n", "w"}));
  EXPECT_EQ(first_times.size(), 5u);
  EXPECT_THROW(gen_probing(truth, p.ever_active(), ProbePolicy{}, 0, 1), std::invalid_argument);
  ProbePolicy bad;
  bad.budget = 17;
  EXPECT_THROW(gen_probing(truth, p.ever_active(), bad, 1, 1), std::invalid_argument);
}

TEST(GenProbing, MoreObserversCoverNoSlower) {
  for (std::uint32_t b = 0; b < 10; ++b) {
    BlockProfile p;
    p.block = Block24{0x0A0000 + b};
    p.size = 60 + 19 * static_cast<int>(b);
    p.baseline = p.size / 3;
    p.amplitude = p.size / 3;
    p.noise = 0.01;
    const auto truth = gen_truth(p, kJan1, 7, b);
    const auto list = p.ever_active();
    const auto one = full_scan_time(list, flatten(gen_probing(truth, list, ProbePolicy{}, 1, b)), {}, kJan1);
    const auto five = full_scan_time(list, flatten(gen_probing(truth, list, ProbePolicy{}, 5, b)), {}, kJan1);
    ASSERT_TRUE(one.complete);
    ASSERT_TRUE(five.complete);
    EXPECT_LE(five.rounds, one.rounds) << b;
  }
}

TEST(Pearson, Cases) {
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(*pearson(x, x), 1.0);
  EXPECT_FALSE(pearson(x, std::vector<double>(5, 3.0)));
  EXPECT_FALSE(pearson(std::vector<double>{1}, std::vector<double>{2}));
  // mean x 3, mean y 4; sxy = 7, sxx = 10, syy = 10 -> 0.7
  EXPECT_NEAR(*pearson(x, std::vector<double>{2, 5, 3, 4, 6}), 0.7, 1e-15);
  EXPECT_DOUBLE_EQ(*pearson(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0);
  EXPECT_THROW(pearson(x, std::vector<double>{1, 2}), std::invalid_argument);
}

TEST(ReconstructionCorrelation, AgainstTruth) {
  BlockProfile p = lab();
  p.noise = 0.01;
  const auto truth = gen_truth(p, kJan1, 7, 3);
  auto exact = blockpulse::testing::round_series(truth.counts, kJan1, p.block);
  EXPECT_NEAR(*reconstruction_correlation(truth, exact), 1.0, 1e-12);

  auto flat = exact;
  for (auto& s : flat.samples) s.count = 4;
  EXPECT_FALSE(reconstruction_correlation(truth, flat));

  auto short_overlap = exact;
  short_overlap.samples.resize(static_cast<std::size_t>(2 * kDaySeconds / kRoundSeconds) - 1);
  EXPECT_THROW(reconstruction_correlation(truth, short_overlap), InsufficientData);
}

TEST(Profiles, ParseAndSerializeRoundTrip) {
  const char* text =
      "# comment\n"
      "block=192.0.2.0/24 size=24 baseline=10 amplitude=8 work_start=16 work_end=24 noise=0.001 lat=34.02 "
      "lon=-118.29\n"
      "block=198.51.100.0/24 size=40 baseline=5 amplitude=9 workdays=0111110 change_day=42 change_baseline=2 "
      "change_amplitude=0\n"
      "block=100.64.5.0/24 size=3\n";
  const auto ps = parse_profiles(text);
  ASSERT_EQ(ps.size(), 3u);
  EXPECT_EQ(ps[0].work_start_hour, 16);
  ASSERT_TRUE(ps[0].location);
  EXPECT_EQ(ps[0].location->lon, -118.29);
  EXPECT_EQ(ps[1].workdays, 0b0111110);
  ASSERT_TRUE(ps[1].change);
  EXPECT_EQ(ps[1].change->baseline, 2);
  EXPECT_FALSE(ps[2].location);
  EXPECT_FALSE(ps[2].change);

  const auto again = parse_profiles(serialize_profiles(ps));
  EXPECT_EQ(serialize_profiles(again), serialize_profiles(ps));

  EXPECT_THROW(parse_profiles("size=3\n"), ParseError);
  EXPECT_THROW(parse_profiles("block=10.0.0.0/24 size=3 colour=red\n"), ParseError);
  EXPECT_THROW(parse_profiles("block=10.0.0.0/24 size=3 baseline=4\n"), ParseError);
  EXPECT_THROW(parse_profiles("block=10.0.0.0/24 lat=3\n"), ParseError);
  EXPECT_THROW(parse_profiles("block=10.0.0.0/24 workdays=11111\n"), ParseError);
}

TEST(Cohort, CountsAndDeterminism) {
  CohortSpec spec;
  spec.blocks = 200;
  spec.changed = 37;
  const auto a = gen_cohort(spec, 9), b = gen_cohort(spec, 9), c = gen_cohort(spec, 10);
  ASSERT_EQ(a.size(), 200u);
  EXPECT_EQ(serialize_profiles(a), serialize_profiles(b));
  EXPECT_NE(serialize_profiles(a), serialize_profiles(c));
  int changed = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& p = a[i];
    EXPECT_EQ(p.block.prefix, spec.first_block.prefix + i);
    EXPECT_GE(p.size, 30);
    EXPECT_LE(p.size, 64);
    EXPECT_LE(p.noise, spec.max_noise);
    ASSERT_TRUE(p.location);
    if (p.change) {
      ++changed;
      EXPECT_EQ(p.change->day, 42);
      EXPECT_EQ(p.change->amplitude, 0);
      EXPECT_EQ(p.change->baseline, std::max(0, p.baseline - 3));
    }
  }
  EXPECT_EQ(changed, 37);
  spec.changed = 201;
  EXPECT_THROW(gen_cohort(spec, 1), std::invalid_argument);
}

TEST(EndToEnd, StrongDiurnalProfileIsChangeSensitive) {
  BlockProfile p;
  p.block = Block24{0x0A0000};
  p.size = 64;
  p.baseline = 10;
  p.amplitude = 30;
  const auto truth = gen_truth(p, kJan1, 28, 4);
  const auto list = p.ever_active();
  const auto streams = gen_probing(truth, list, ProbePolicy{}, 5, 4);
  const auto rec = fuse_observers(list, streams, kJan1);
  const auto c = classify(rec.series);
  EXPECT_TRUE(c.responsive);
  EXPECT_TRUE(c.diurnal) << c.diurnal_score;
  EXPECT_TRUE(c.wide_swing);
  EXPECT_TRUE(c.change_sensitive);
  EXPECT_GT(*reconstruction_correlation(truth, rec.series), 0.5);
}
