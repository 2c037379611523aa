#include <gtest/gtest.h>

#include <sstream>

#include "tacdss/datagen.hpp"

using namespace tacdss;

TEST(LatentScore, Extremes) {
  EXPECT_EQ(latent_score({1000, 0, 100, 0}), 1.0);
  EXPECT_EQ(latent_score({0, 60, 0, 10}), 0.0);
  EXPECT_EQ(latent_score({500, 30, 50, 5}), 0.5);
}

TEST(LatentScore, OutOfRangeFieldIsRejected) {
  EXPECT_THROW(latent_score({1000.5, 0, 100, 0}), InvalidArgument);
  EXPECT_THROW(latent_score({0, -1, 0, 0}), InvalidArgument);
  EXPECT_THROW(latent_score({0, 0, 101, 0}), InvalidArgument);
  EXPECT_THROW(latent_score({0, 0, 0, std::numeric_limits<double>::quiet_NaN()}), InvalidArgument);
  try {
    latent_score({0, 0, 0, 11});
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("danger"), std::string::npos);
  }
}

TEST(LatentScore, DirectionOfEachFactor) {
  const ScenarioEvent base{400, 20, 40, 6};
  const double s = latent_score(base);
  EXPECT_GT(latent_score({500, 20, 40, 6}), s);
  EXPECT_LT(latent_score({400, 30, 40, 6}), s);
  EXPECT_GT(latent_score({400, 20, 50, 6}), s);
  EXPECT_LT(latent_score({400, 20, 40, 7}), s);
}

TEST(LatentScore, DecisionTablePrototypesAreOrdered) {
  // Qualitative levels at 0.9 / 0.5 / 0.1 of each range, oriented so the
  // first row is full fuel, fast intercept, sufficient weapons, low danger.
  const ScenarioEvent good{900, 6, 90, 1};
  const ScenarioEvent acceptable{500, 30, 50, 5};
  const ScenarioEvent bad{100, 54, 10, 9};
  EXPECT_GT(latent_score(good), latent_score(acceptable));
  EXPECT_GT(latent_score(acceptable), latent_score(bad));
}

TEST(GenerateMaster, Deterministic) {
  EXPECT_EQ(generate_master(1000, 42).events, generate_master(1000, 42).events);
  EXPECT_NE(generate_master(1000, 42).events, generate_master(1000, 43).events);
}

TEST(GenerateMaster, EveryThirdHoldsAtLeastTwentyPercent) {
  const MasterDataset master = generate_master(1000, 42);
  std::array<int, 3> counts{};
  for (const auto& e : master.events) ++counts[static_cast<std::size_t>(score_stratum(latent_score(e)))];
  for (int c : counts) EXPECT_GE(c, 200);
  EXPECT_EQ(counts, (std::array<int, 3>{334, 333, 333}));
}

TEST(GenerateMaster, SmallDatasetInRange) {
  const MasterDataset master = generate_master(10, 7);
  EXPECT_EQ(master.size(), 10u);
  EXPECT_EQ(master.seed, 7u);
  for (const auto& e : master.events) EXPECT_TRUE(invalid_field(e).empty());
}

TEST(GenerateMaster, EventsFallInTheirBands) {
  const MasterDataset master = generate_master(300, 5);
  for (std::size_t i = 0; i < master.size(); ++i) {
    EXPECT_TRUE(in_stratum_band(latent_score(master.events[i]), static_cast<int>(i % 3))) << i;
  }
}

TEST(GenerateMaster, RejectsTinySize) { EXPECT_THROW(generate_master(9, 1), InvalidArgument); }

TEST(Csv, RoundTripIsExact) {
  const MasterDataset master = generate_master(50, 11);
  std::stringstream ss;
  write_csv(ss, master.events);
  EXPECT_EQ(ss.str().substr(0, kCsvHeader.size() + 1), std::string(kCsvHeader) + "\n");
  EXPECT_EQ(read_csv(ss), master.events);
}

TEST(Csv, AcceptsExternalFilesWithWhitespaceAndCrlf) {
  std::istringstream in("fuel,intercept_time,weapon,danger\r\n 500, 30,50 ,5\r\n\r\n1000,0,100,0\n");
  const auto events = read_csv(in);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0], (ScenarioEvent{500, 30, 50, 5}));
}

TEST(Csv, ErrorsCarryLineNumbers) {
  auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_csv(in);
    } catch (const ParseError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("fuel,weapon\n").find("line 1"), std::string::npos);
  EXPECT_NE(message("fuel,intercept_time,weapon,danger\n1,2,3,4\n1,2,x,4\n").find("line 3"), std::string::npos);
  EXPECT_NE(message("fuel,intercept_time,weapon,danger\n1,2,3\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("fuel,intercept_time,weapon,danger\n1,2,3,40\n").find("danger"), std::string::npos);
  EXPECT_NE(message("").find("empty"), std::string::npos);
}
