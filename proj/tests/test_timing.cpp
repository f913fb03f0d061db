#include <gtest/gtest.h>

#include <sstream>

#include "cipherloop/timing.hpp"

using namespace cipherloop;

TEST(Timing, Quantile) {
  EXPECT_DOUBLE_EQ(quantile({3.0, 1.0, 2.0}, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(quantile({1.0, 2.0, 3.0, 4.0}, 0.5), 2.5);
  EXPECT_DOUBLE_EQ(quantile({5.0}, 0.99), 5.0);
  EXPECT_DOUBLE_EQ(quantile({0.0, 10.0}, 0.99), 9.9);
  EXPECT_THROW(quantile({}, 0.5), ParameterError);
}

TEST(Timing, MinPeriodCoversEveryStage) {
  StepTiming t;
  t.encrypt_us = 1;
  t.control_us = 2;
  t.decrypt_us = 3;
  t.total_us = 6;
  t.update_us = 10;
  EXPECT_DOUBLE_EQ(step_min_period_us(t), 12.0);
  t.randomizer_us = 20;
  EXPECT_DOUBLE_EQ(step_min_period_us(t), 24.0);
}

TEST(Timing, RowsAndCsv) {
  TimingOptions options;
  options.reps = 20;
  options.warmup = 2;
  const auto rows = measure_min_period({64, 128}, static_preset(), options);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.exact);
    EXPECT_GT(r.total_median_us, 0.0);
    EXPECT_LE(r.total_min_us, r.total_median_us);
    EXPECT_LE(r.total_median_us, r.total_p99_us);
    EXPECT_GE(r.min_period_median_us, r.total_median_us * 0.999);
  }
  EXPECT_EQ(rows[0].w, 8u);
  EXPECT_EQ(rows[1].w, 16u);
  std::ostringstream csv;
  write_timing_csv(csv, rows);
  std::istringstream lines(csv.str());
  std::string header, line;
  std::getline(lines, header);
  const auto columns = std::count(header.begin(), header.end(), ',') + 1;
  EXPECT_EQ(columns, 17);
  int n = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ',') + 1, columns);
    ++n;
  }
  EXPECT_EQ(n, 2);
}

TEST(Timing, InlineRandomizerIsOnTheCriticalPath) {
  TimingOptions options;
  options.reps = 30;
  options.warmup = 2;
  SeededEntropy rng(5);
  const auto keys = paillier::keygen(128, rng);
  options.mode = RandomizerMode::overlap;
  const auto overlap = measure_key_length(static_preset(), keys, options);
  options.mode = RandomizerMode::inline_;
  const auto inline_row = measure_key_length(static_preset(), keys, options);
  EXPECT_GT(overlap.randomizer_us, 0.0);
  EXPECT_EQ(inline_row.randomizer_us, 0.0);
  EXPECT_LT(overlap.encrypt_us, inline_row.encrypt_us);
}

TEST(Timing, TotalCoversCriticalPathParts) {
  SeededEntropy rng(6);
  const auto keys = paillier::keygen(64, rng);
  LoopOptions options;
  options.steps = 50;
  const auto run = run_in_process(static_preset(), static_preset().spec(), keys, options);
  for (const auto& r : run.records) {
    const auto& t = r.timing;
    ASSERT_GE(t.total_us, t.encrypt_us + t.network_out_us + t.control_us + t.network_back_us + t.decrypt_us) << r.k;
  }
}

TEST(Timing, CriticalPathJitterBounded) {
  // Exponentiations run a fixed number of multiplications, so step times at a
  // fixed key length should cluster.
  SeededEntropy rng(7);
  const auto keys = paillier::keygen(256, rng);
  TimingOptions options;
  options.reps = 1000;
  options.warmup = 20;
  const auto row = measure_key_length(qube_preset(), keys, options);
  EXPECT_LT(row.jitter_ratio(), 3.0) << "median " << row.total_median_us << " us, p99 " << row.total_p99_us << " us";
}
