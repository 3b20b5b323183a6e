#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "gridfreq/synth.hpp"
#include "gridfreq/zcfreq.hpp"
#include "testutil.hpp"

using namespace gridfreq;
using Catch::Approx;

TEST_CASE("rising zero crossing interpolation") {
    SECTION("symmetric pair interpolates to the midpoint") {
        SampleStream s{{-0.5, 0.5}, 25000.0, UtcTime::from_seconds(0)};
        auto zcs = zcfreq::find_rising_zero_crossings(s);
        REQUIRE(zcs.size() == 1);
        CHECK(zcs[0].t.sec == 0);
        CHECK(zcs[0].t.frac == Approx(20e-6).margin(1e-12));
    }
    SECTION("exact zero lands on the zero sample") {
        SampleStream s{{-0.25, 0.0, 0.0, 0.75}, 25000.0, UtcTime::from_seconds(0)};
        auto zcs = zcfreq::find_rising_zero_crossings(s);
        REQUIRE(zcs.size() == 1);  // a run of zeros yields one crossing
        CHECK(zcs[0].t.frac == Approx(40e-6).margin(1e-15));
    }
    SECTION("one second of 50 Hz yields 50 crossings spaced 20 ms") {
        auto s = testutil::constant_sine(50.0, 25000.0, 1.0, 3.0);
        auto zcs = zcfreq::find_rising_zero_crossings(s);
        REQUIRE(zcs.size() == 50);
        for (std::size_t i = 0; i + 1 < zcs.size(); ++i)
            CHECK(zcs[i + 1].t.diff(zcs[i].t) == Approx(0.02).margin(1e-6));
    }
    SECTION("all-positive signal yields nothing") {
        SampleStream s{std::vector<double>(100, 2.0), 25000.0, {}};
        CHECK(zcfreq::find_rising_zero_crossings(s).empty());
    }
}

TEST_CASE("period frequencies") {
    SECTION("20 ms spacing reads 50 Hz") {
        std::vector<zcfreq::ZeroCrossing> zcs{{UtcTime::make(0, 0.005)},
                                              {UtcTime::make(0, 0.025)}};
        auto p = zcfreq::period_frequencies(zcs);
        REQUIRE(p.size() == 1);
        CHECK(p[0].f_p == Approx(50.0).margin(1e-9));
    }
    SECTION("16.6667 ms spacing reads 60 Hz") {
        std::vector<zcfreq::ZeroCrossing> zcs{{UtcTime::make(0, 0.1)},
                                              {UtcTime::make(0, 0.1166667)}};
        auto p = zcfreq::period_frequencies(zcs);
        CHECK(p[0].f_p == Approx(60.0).margin(0.01));
    }
    SECTION("constant 50.1 Hz input reads 50.1 Hz per period") {
        auto s = testutil::constant_sine(50.1, 25000.0, 5.0, 0.3);
        auto filt = fir::apply_zero_phase(fir::design_zc_prefilter(25000.0, 50.0), s);
        auto zcs = zcfreq::find_rising_zero_crossings(filt.stream, filt.valid_begin,
                                                      filt.valid_end);
        auto periods = zcfreq::period_frequencies(zcs);
        for (const auto& p : periods) CHECK(p.f_p == Approx(50.1).margin(1e-6));
    }
    SECTION("fewer than two crossings rejected") {
        std::vector<zcfreq::ZeroCrossing> one{{UtcTime::make(0, 0.5)}};
        CHECK_THROWS_AS(zcfreq::period_frequencies(one), std::invalid_argument);
    }
}

namespace {

std::set<std::uint32_t> period_counts(double f, double phase, double seconds = 8.0) {
    auto s = testutil::constant_sine(f, 25000.0, seconds, phase);
    auto aggs = testutil::run_pipeline(s);
    std::set<std::uint32_t> counts;
    REQUIRE(aggs.size() >= 4);
    // Interior seconds only; the stream edges may open or close short.
    for (std::size_t i = 1; i + 1 < aggs.size(); ++i) {
        REQUIRE(aggs[i].qi == zcfreq::kQiOk);
        counts.insert(aggs[i].n_periods);
    }
    return counts;
}

}  // namespace

TEST_CASE("per-second period counts for in-band frequencies") {
    // With the interval rule (open at the last crossing at-or-before the
    // boundary, close at the next interval's opener) a constant f in
    // [m, m+1) can only produce m or m+1 periods per second.
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> ph(0.0, 2.0 * std::numbers::pi);
    SECTION("49.5 Hz stays within {49, 50}") {
        for (int t = 0; t < 5; ++t)
            for (auto n : period_counts(49.5, ph(rng))) CHECK((n == 49 || n == 50));
    }
    SECTION("50.5 Hz stays within {50, 51}") {
        for (int t = 0; t < 5; ++t)
            for (auto n : period_counts(50.5, ph(rng))) CHECK((n == 50 || n == 51));
    }
    SECTION("random frequencies in [49,51)") {
        std::uniform_real_distribution<double> fr(49.0, 51.0);
        for (int t = 0; t < 10; ++t) {
            const double f = fr(rng);
            const auto lo = static_cast<std::uint32_t>(f);
            for (auto n : period_counts(f, ph(rng))) {
                CHECK(n >= lo);
                CHECK(n <= lo + 1);
            }
        }
    }
}

TEST_CASE("phase-aligned 50 Hz aggregates to exactly 50 Hz") {
    auto s = testutil::constant_sine(50.0, 25000.0, 10.0);
    auto aggs = testutil::run_pipeline(s);
    REQUIRE(aggs.size() == 10);
    for (const auto& a : aggs) {
        REQUIRE(a.qi == zcfreq::kQiOk);
        CHECK(a.f_hz == Approx(50.0).margin(1e-6));
    }
}

TEST_CASE("interval chaining and the sum identity") {
    auto s = testutil::constant_sine(49.93, 25000.0, 10.0, 1.1);
    auto aggs = testutil::run_pipeline(s);
    REQUIRE(aggs.size() == 10);
    for (std::size_t i = 1; i + 1 < aggs.size(); ++i) {
        CHECK(aggs[i].t_close == aggs[i + 1].t_open);  // shared boundary crossing
        const double dt = aggs[i].t_close.diff(aggs[i].t_open);
        CHECK(static_cast<double>(aggs[i].n_periods) / aggs[i].f_hz ==
              Approx(dt).epsilon(1e-15));
    }
}

TEST_CASE("gain and polarity invariance at constant frequency") {
    auto base = testutil::constant_sine(49.93, 25000.0, 8.0, 1.1);
    auto ref = testutil::run_pipeline(base);
    for (double c : {0.1, 10.0, -1.0}) {
        auto scaled = base;
        for (double& v : scaled.samples) v *= c;
        auto got = testutil::run_pipeline(scaled);
        REQUIRE(got.size() == ref.size());
        for (std::size_t i = 1; i + 1 < got.size(); ++i) {
            REQUIRE(got[i].qi == zcfreq::kQiOk);
            CHECK(got[i].f_hz == Approx(ref[i].f_hz).margin(1e-6));
        }
    }
}

TEST_CASE("aggregation modes agree for slow modulation") {
    synth::SyntheticSpec spec;
    spec.fs = 25000.0;
    spec.duration = 250000;
    spec.modulation = synth::Modulation::sine(0.05);
    spec.d_f = 0.05;
    auto stream = synth::make_fm_signal(spec);

    zcfreq::AggregationOptions cycles;
    zcfreq::AggregationOptions mean;
    mean.cycle_count_mean = false;
    auto a = testutil::run_pipeline(stream, cycles);
    auto b = testutil::run_pipeline(stream, mean);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].f_hz == Approx(b[i].f_hz).margin(1e-6));
}

TEST_CASE("aggregate_seconds rejects unordered periods") {
    std::vector<zcfreq::PeriodMeasurement> periods{
        {UtcTime::make(0, 0.50), UtcTime::make(0, 0.52), 50.0},
        {UtcTime::make(0, 0.30), UtcTime::make(0, 0.32), 50.0},
    };
    CHECK_THROWS_AS(zcfreq::aggregate_seconds(periods, 0, 1, {}), std::invalid_argument);
}

TEST_CASE("sanity band flags wild periods") {
    // A lost crossing doubles one period (implying ~25 Hz); the affected
    // second must not pass as valid even though it aggregates.
    std::vector<zcfreq::ZeroCrossing> zcs;
    double t = 0.902;
    for (int i = 0; i < 10; ++i, t += 0.02) zcs.push_back({UtcTime::make(0, 0).plus(t)});
    t += 0.02;  // skipped crossing
    for (int i = 0; i < 60; ++i, t += 0.02) zcs.push_back({UtcTime::make(0, 0).plus(t)});
    auto periods = zcfreq::period_frequencies(zcs);
    auto aggs = zcfreq::aggregate_seconds(periods, 1, 2, {});
    REQUIRE(aggs.size() == 1);
    CHECK(aggs[0].qi == zcfreq::kQiInvalid);
    CHECK(aggs[0].has_interval);
}

TEST_CASE("streaming equals batch") {
    synth::SyntheticSpec spec;
    spec.fs = 25000.0;
    spec.duration = 10 * 25000;
    spec.modulation = synth::Modulation::sine(0.2);
    spec.d_f = 0.08;
    auto stream = synth::make_fm_signal(spec, UtcTime::from_seconds(100));

    zcfreq::AggregationOptions opts;
    auto batch = testutil::run_pipeline(stream, opts);
    REQUIRE(batch.size() == 10);

    SECTION("ten one-second blocks reproduce the batch run bit for bit") {
        zcfreq::Estimator est(fir::design_zc_prefilter(25000.0, 50.0), opts);
        std::vector<zcfreq::SecondAggregate> got;
        for (int b = 0; b < 10; ++b) {
            SampleStream block;
            block.fs = spec.fs;
            block.t0 = UtcTime::from_seconds(100 + b);
            block.samples.assign(stream.samples.begin() + b * 25000,
                                 stream.samples.begin() + (b + 1) * 25000);
            auto out = est.process_block(block);
            got.insert(got.end(), out.begin(), out.end());
        }
        auto tail = est.finish();
        got.insert(got.end(), tail.begin(), tail.end());
        REQUIRE(got.size() == batch.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].k == batch[i].k);
            CHECK(got[i].f_hz == batch[i].f_hz);  // bitwise
            CHECK(got[i].n_periods == batch[i].n_periods);
            CHECK(got[i].qi == batch[i].qi);
        }
    }
    SECTION("random partitions reproduce the batch run bit for bit") {
        std::mt19937 rng(23);
        for (int trial = 0; trial < 20; ++trial) {
            zcfreq::Estimator est(fir::design_zc_prefilter(25000.0, 50.0), opts);
            std::vector<zcfreq::SecondAggregate> got;
            std::size_t pos = 0;
            while (pos < stream.samples.size()) {
                std::uniform_int_distribution<std::size_t> d(1, 60000);
                const std::size_t n = std::min(d(rng), stream.samples.size() - pos);
                SampleStream block;
                block.fs = spec.fs;
                block.t0 = UtcTime::from_seconds(100).plus(static_cast<double>(pos) / spec.fs);
                block.samples.assign(stream.samples.begin() + pos,
                                     stream.samples.begin() + pos + n);
                auto out = est.process_block(block);
                got.insert(got.end(), out.begin(), out.end());
                pos += n;
            }
            auto tail = est.finish();
            got.insert(got.end(), tail.begin(), tail.end());
            REQUIRE(got.size() == batch.size());
            bool identical = true;
            for (std::size_t i = 0; i < got.size(); ++i)
                identical = identical && got[i].f_hz == batch[i].f_hz &&
                            got[i].n_periods == batch[i].n_periods && got[i].qi == batch[i].qi;
            CHECK(identical);
        }
    }
}

TEST_CASE("dropped block flags the gap and its neighbours") {
    auto stream = testutil::constant_sine(50.0, 25000.0, 10.0, 0.4);
    zcfreq::AggregationOptions opts;
    zcfreq::Estimator est(fir::design_zc_prefilter(25000.0, 50.0), opts);
    std::vector<zcfreq::SecondAggregate> got;
    for (int b = 0; b < 10; ++b) {
        if (b == 5) continue;  // lost second [5, 6)
        SampleStream block;
        block.fs = 25000.0;
        block.t0 = UtcTime::from_seconds(b);
        block.samples.assign(stream.samples.begin() + b * 25000,
                             stream.samples.begin() + (b + 1) * 25000);
        auto out = est.process_block(block);
        got.insert(got.end(), out.begin(), out.end());
    }
    auto tail = est.finish();
    got.insert(got.end(), tail.begin(), tail.end());
    REQUIRE(got.size() == 10);
    for (const auto& a : got) {
        const bool affected = a.k >= 4 && a.k <= 6;
        CAPTURE(a.k);
        CHECK(a.qi == (affected ? zcfreq::kQiInvalid : zcfreq::kQiOk));
        if (a.qi == zcfreq::kQiOk) CHECK(a.f_hz == Approx(50.0).margin(1e-6));
    }
}

TEST_CASE("estimator rejects bad block sequences") {
    auto stream = testutil::constant_sine(50.0, 25000.0, 2.0);
    zcfreq::Estimator est(fir::design_zc_prefilter(25000.0, 50.0), {});
    SampleStream b0{std::vector<double>(stream.samples.begin(), stream.samples.begin() + 25000),
                    25000.0, UtcTime::from_seconds(0)};
    est.process_block(b0);
    SECTION("out of order") {
        SampleStream bad = b0;
        CHECK_THROWS_AS(est.process_block(bad), std::invalid_argument);
    }
    SECTION("fs mismatch") {
        SampleStream bad{std::vector<double>(100, 0.0), 12800.0, UtcTime::from_seconds(1)};
        CHECK_THROWS_AS(est.process_block(bad), std::invalid_argument);
    }
    SECTION("empty block is a no-op") {
        SampleStream empty{{}, 25000.0, UtcTime::from_seconds(1)};
        CHECK(est.process_block(empty).empty());
    }
}

TEST_CASE("mark_missing_seconds") {
    auto mk = [](std::int64_t k, double open_at, double close_at) {
        zcfreq::SecondAggregate a;
        a.k = k;
        a.f_hz = 50.0;
        a.n_periods = 50;
        a.qi = zcfreq::kQiOk;
        a.has_interval = true;
        a.t_open = UtcTime::make(0, 0).plus(open_at);
        a.t_close = UtcTime::make(0, 0).plus(close_at);
        return a;
    };
    // Chained intervals around seconds 5..7.
    std::vector<zcfreq::SecondAggregate> aggs{mk(5, 4.996, 5.996), mk(6, 5.996, 6.992),
                                              mk(7, 6.992, 7.998)};

    SECTION("full coverage keeps everything valid") {
        std::vector<zcfreq::CoverageRange> cov{
            {UtcTime::from_seconds(0), UtcTime::from_seconds(10)}};
        for (const auto& a : zcfreq::mark_missing_seconds(aggs, cov))
            CHECK(a.qi == zcfreq::kQiOk);
    }
    SECTION("a hole mid-second spoils exactly that second") {
        std::vector<zcfreq::CoverageRange> cov{
            {UtcTime::from_seconds(0), UtcTime::make(6, 0.4)},
            {UtcTime::make(6, 0.5), UtcTime::from_seconds(10)}};
        auto out = zcfreq::mark_missing_seconds(aggs, cov);
        CHECK(out[0].qi == zcfreq::kQiOk);
        CHECK(out[1].qi == zcfreq::kQiInvalid);
        CHECK(out[2].qi == zcfreq::kQiOk);
    }
    SECTION("a hole over the shared opener spoils the predecessor too") {
        std::vector<zcfreq::CoverageRange> cov{
            {UtcTime::from_seconds(0), UtcTime::make(5, 0.99)},
            {UtcTime::make(6, 0.5), UtcTime::from_seconds(10)}};
        auto out = zcfreq::mark_missing_seconds(aggs, cov);
        CHECK(out[0].qi == zcfreq::kQiInvalid);  // closes at 5.996, past the coverage
        CHECK(out[1].qi == zcfreq::kQiInvalid);
        CHECK(out[2].qi == zcfreq::kQiOk);
    }
}
