#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hedgelab/calibration.hpp"

using namespace hedgelab;

namespace {

CalibrationSettings quick_settings() {
    CalibrationSettings s;
    s.pricing.cheb = {16, 4, 8, 200};
    s.starts = 1;
    s.simplex = {600, 1e-6, 1e-14, 0.05};
    return s;
}

const std::vector<double> kStrikes{90, 95, 100, 105, 110};

std::vector<OptionQuote> quotes_from(double sigma0, double nu, double rho,
                                     const PricingSettings& pricing = quick_settings().pricing) {
    const SABRParams truth{100, sigma0, nu, rho, 0.05, 0.05};
    return synthetic_quotes(truth, "TEST", "2023-10-16", "2024-01-19", kStrikes, pricing);
}

}  // namespace

TEST(Dates, ParseFormatAndTradingDays) {
    EXPECT_EQ(format_date(parse_date("10/16/2023")), "2023-10-16");
    EXPECT_EQ(format_date(parse_date("2023-11-17")), "2023-11-17");
    EXPECT_THROW(parse_date("2023-13-01"), std::invalid_argument);
    EXPECT_THROW(parse_date("yesterday"), std::invalid_argument);
    // Monday to the following Monday
    EXPECT_EQ(trading_days_between(parse_date("2023-10-16"), parse_date("2023-10-23")), 5);
    EXPECT_EQ(trading_days_between(parse_date("2023-10-16"), parse_date("2023-11-17")), 24);
}

TEST(Quotes, CsvRoundTripAndValidation) {
    const auto q = quotes_from(0.2, 0.5, -0.5);
    std::stringstream ss;
    write_quotes_csv(ss, q);
    const auto back = read_quotes_csv(ss);
    ASSERT_EQ(back.size(), q.size());
    EXPECT_NEAR(back[2].mid, q[2].mid, 1e-9);
    std::stringstream bad("symbol,quote_date,expiry,strike,mid,spot,rate\nX,2023-10-16,2024-01-19,120,1.0,100,0.05\n");
    EXPECT_THROW(read_quotes_csv(bad), std::runtime_error);
    std::stringstream header("strike,mid\n");
    EXPECT_THROW(read_quotes_csv(header), std::runtime_error);
}

TEST(Quotes, MaturityInTradingYears) {
    const OptionQuote q{"X", "2023-10-16", "2023-11-17", 100, 1, 100, 0.05};
    EXPECT_DOUBLE_EQ(q.maturity_years(), 24.0 / 252.0);
}

TEST(CalibrationLoss, RoundTripAndMonotoneResiduals) {
    auto q = quotes_from(0.2, 0.5, -0.5);
    const SABRParams truth{100, 0.2, 0.5, -0.5, 0.05, 0.05};
    const double at_truth = calibration_loss(truth, q, quick_settings().pricing);
    EXPECT_LT(at_truth, 1e-4);
    for (auto& x : q) x.mid *= 2.0;
    EXPECT_GT(calibration_loss(truth, q, quick_settings().pricing), at_truth);
}

TEST(CalibrationLoss, GeneratorRepricesItsOwnQuotesExactly) {
    const auto q = quotes_from(0.25, 0.0, 0.0);
    const SABRParams truth{100, 0.25, 0.0, 0.0, 0.05, 0.05};
    const auto again = model_prices(truth, q, quick_settings().pricing);
    for (std::size_t i = 0; i < q.size(); ++i) EXPECT_EQ(again[i], q[i].mid) << q[i].strike;
    EXPECT_EQ(calibration_loss(truth, q, quick_settings().pricing), 0.0);
}

TEST(CalibrationLoss, SmoothInVolOfVolNearZero) {
    const auto q = quotes_from(0.25, 0.0, 0.0);
    SABRParams p{100, 0.25, 0.0, 0.0, 0.05, 0.05};
    std::vector<double> loss;
    for (double nu : {0.0, 0.01, 0.02, 0.04}) {
        p.nu = nu;
        loss.push_back(calibration_loss(p, q, quick_settings().pricing));
    }
    for (std::size_t i = 1; i < loss.size(); ++i) EXPECT_GT(loss[i], loss[i - 1]);
}

TEST(AnchorVol, NearImpliedVolOnTheLadder) {
    const auto q = quotes_from(0.25, 0.0, 0.0);
    const double a = anchor_vol(q);
    EXPECT_NEAR(a, 0.25, 0.03);
    EXPECT_NEAR(std::remainder(std::log(a), std::log(1.1)), 0.0, 1e-9);
}

TEST(CalibrationLoss, RejectsSingleQuoteAndDropsCheapOnes) {
    auto q = quotes_from(0.2, 0.5, -0.5);
    EXPECT_THROW(calibration_loss({}, {q[0]}, quick_settings().pricing), std::invalid_argument);
    q[0].mid = 0.005;
    std::vector<std::string> notes;
    EXPECT_EQ(usable_quotes(q, &notes).size(), 4u);
    EXPECT_EQ(notes.size(), 1u);
    EXPECT_THROW(calibrate({q[0], q[1]}, SABRParams{}, quick_settings()), std::invalid_argument);
}

TEST(CalibrationLoss, DeterministicInParameters) {
    const auto q = quotes_from(0.25, 0.4, -0.3);
    const SABRParams p{100, 0.3, 0.3, 0.0, 0.05, 0.05};
    EXPECT_EQ(calibration_loss(p, q, quick_settings().pricing), calibration_loss(p, q, quick_settings().pricing));
}

TEST(Calibrate, ImprovesOnGuessAndStaysInBounds) {
    const auto q = quotes_from(0.2, 0.5, -0.5);
    const SABRParams guess{100, 0.3, 0.3, 0.0, 0.05, 0.05};
    const auto r = calibrate(q, guess, quick_settings());
    EXPECT_LT(r.objective, 1e-4);
    EXPECT_LE(r.objective, calibration_loss(guess, q, quick_settings().pricing));
    EXPECT_TRUE(sabr_bounds().contains({r.params.sigma0, r.params.nu, r.params.rho}));
    EXPECT_EQ(r.residuals.size(), 5u);
    EXPECT_TRUE(r.surface.has_value());
}

// Single starts can stall in the shallow (nu, rho) valley, so recovery uses the default multi-start.
TEST(Calibrate, RecoversGeneratorParameters) {
    const CalibrationSettings full;
    const auto q = quotes_from(0.2, 0.5, -0.5, full.pricing);
    const auto r = calibrate(q, {100, 0.3, 0.3, 0.0, 0.05, 0.05}, full);
    EXPECT_LT(r.objective, 1e-4);
    EXPECT_NEAR(r.params.sigma0, 0.2, 0.01);
    EXPECT_NEAR(r.params.nu, 0.5, 0.1);
    EXPECT_NEAR(r.params.rho, -0.5, 0.1);
}

TEST(Calibrate, DegenerateVolOfVolFitsNearZero) {
    const CalibrationSettings full;
    const auto q = quotes_from(0.25, 0.0, 0.0, full.pricing);
    const auto r = calibrate(q, {100, 0.3, 0.3, 0.0, 0.05, 0.05}, full);
    EXPECT_LT(r.params.nu, 0.05);
    EXPECT_NEAR(r.params.sigma0, 0.25, 0.01);
}

TEST(Calibrate, WarmStartConvergesQuickly) {
    const auto q = quotes_from(0.2, 0.5, -0.5);
    const auto r = calibrate(q, {100, 0.2, 0.5, -0.5, 0.05, 0.05}, quick_settings());
    EXPECT_TRUE(r.converged);
    EXPECT_LT(r.objective, 1e-4);
    EXPECT_NEAR(r.params.sigma0, 0.2, 1e-3);
    EXPECT_LT(r.iterations, 150);
}

TEST(Calibrate, Deterministic) {
    const auto q = quotes_from(0.2, 0.5, -0.5);
    const auto a = calibrate(q, {100, 0.3, 0.3, 0.0, 0.05, 0.05}, quick_settings());
    const auto b = calibrate(q, {100, 0.3, 0.3, 0.0, 0.05, 0.05}, quick_settings());
    EXPECT_EQ(a.params.sigma0, b.params.sigma0);
    EXPECT_EQ(a.objective, b.objective);
}

TEST(CalibrationJson, HoldsResidualsAndStarts) {
    const auto q = quotes_from(0.2, 0.5, -0.5);
    const auto r = calibrate(q, {100, 0.2, 0.5, -0.5, 0.05, 0.05}, quick_settings());
    const auto j = to_json(r);
    EXPECT_EQ(j.at("residuals").size(), 5u);
    EXPECT_EQ(j.at("starts").size(), 1u);
    EXPECT_DOUBLE_EQ(j.at("params").at("sigma0").get<double>(), r.params.sigma0);
}
